#pragma once

#include "contrastlab/losses.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>

namespace contrastlab {

// Numeric table: one row per line, values separated by commas or
// whitespace, `#` comments. All rows must have the same length.
Matrix read_matrix(std::istream& in, const std::string& what);
Matrix load_matrix(const std::filesystem::path& path);
void write_matrix(const Matrix& m, std::ostream& out);

// One +1 / -1 per line (a single-column table).
LabelFunction load_labels(const std::filesystem::path& path, LabelDomain domain);

// SHA-256 of the file bytes, lowercase hex.
std::string file_digest(const std::filesystem::path& path);

}  // namespace contrastlab
