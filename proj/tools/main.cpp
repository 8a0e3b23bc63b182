#include "contrastlab/augmodel.hpp"
#include "contrastlab/bounds.hpp"
#include "contrastlab/config.hpp"
#include "contrastlab/hypercube.hpp"
#include "contrastlab/io.hpp"
#include "contrastlab/presets.hpp"
#include "contrastlab/spectral.hpp"
#include "contrastlab/spurious.hpp"
#include "contrastlab/textlab.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace contrastlab;

namespace {

struct CommonOptions {
  std::string out = "out";
  std::uint64_t seed = 0;
};

void add_common(CLI::App* cmd, CommonOptions& opt) {
  cmd->add_option("--out", opt.out, "Output directory")->capture_default_str();
  cmd->add_option("--seed", opt.seed, "Base seed; consumers derive their own streams")->capture_default_str();
}

std::ofstream open_output(const fs::path& dir, const std::string& name) {
  std::ofstream f(dir / name, std::ios::binary);
  if (!f) throw InputError("cannot write " + (dir / name).string());
  return f;
}

// Written before any other output; holds everything needed to replay the run.
void write_manifest(const fs::path& out, const std::string& command, const std::string& config_path,
                    std::uint64_t seed, const std::vector<std::string>& inputs,
                    const std::vector<std::string>& argv) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw InputError("cannot create output directory " + out.string() + ": " + ec.message());
  nlohmann::ordered_json m;
  m["command"] = command;
  m["config"] = config_path;
  m["seed"] = seed;
  m["out"] = out.string();
  m["version"] = CONTRASTLAB_VERSION;
  nlohmann::ordered_json digests = nlohmann::ordered_json::object();
  for (const auto& p : inputs)
    if (!p.empty()) digests[p] = file_digest(p);
  m["inputs"] = digests;
  m["argv"] = argv;
  auto f = open_output(out, "manifest.json");
  f << m.dump(2) << '\n';
}

AugmentationModel read_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open model file " + path);
  try {
    return load_model(in);
  } catch (const InputError& e) {
    throw InputError(path + ": " + e.what());
  }
}

// ---- analyze ----

struct AnalyzeOptions {
  CommonOptions common;
  std::string model;
};

void run_analyze(const AnalyzeOptions& o, const std::vector<std::string>& argv) {
  write_manifest(o.common.out, "analyze", "", o.common.seed, {o.model}, argv);
  const AugmentationModel model = read_model_file(o.model);
  const SpectralGraph graph = build_matrices(model);
  {
    auto f = open_output(o.common.out, "spectrum.csv");
    export_spectrum(graph, f);
  }
  auto f = open_output(o.common.out, "report.txt");
  const Index n = model.n_inputs();
  f << "n_inputs=" << n << '\n';
  f << "n_augs=" << model.n_augs() << '\n';
  f << "n_augs_kept=" << graph.n_kept() << '\n';
  f << "bayes_error=" << format_double(bayes_error(model)) << '\n';
  f << "is_disjoint=" << (is_disjoint(model) ? "true" : "false") << '\n';
  const double rho = rho_bar(model);
  f << "rho_bar=" << (std::isfinite(rho) ? format_double(rho) : std::string("inf")) << '\n';
  f << "gram_identity_residual=" << format_double(gram_identity_residual(graph)) << '\n';
  for (Index d = 1; d <= std::min<Index>(8, n - 1); ++d) {
    const double b = eigengap_bound(model, d);
    f << "lambda_" << (d + 1) << '=' << format_double(graph.laplacian_eigs[d]) << '\n';
    f << "eigengap_bound_d" << d << '=' << (std::isfinite(b) ? format_double(b) : std::string("inf")) << '\n';
  }
}

// ---- bound ----

struct BoundOptions {
  CommonOptions common;
  std::string mode = "fnclass";
  std::string model, features, labels, g_file;
  std::string g_strategy = "propagate";
  Index d = 1;
  Index d_prime = 0;
  double subopt = 0.0;
  std::optional<double> alpha;
  double c1 = 1.0, c2 = 1.0;
  Index k = 10;
};

void run_bound(const BoundOptions& o, const std::vector<std::string>& argv) {
  write_manifest(o.common.out, "bound", "", o.common.seed, {o.model, o.features, o.labels, o.g_file}, argv);
  require(o.subopt >= 0.0, "--subopt must be non-negative");
  auto f = open_output(o.common.out, "report.txt");
  if (o.mode == "hypercube") {
    f << "bound=" << format_double(hypercube_bound(o.k, o.subopt)) << '\n';
    f << "vacuous=false\n";
    f << "k=" << o.k << '\n';
    f << "subopt=" << format_double(o.subopt) << '\n';
    return;
  }
  if (o.model.empty()) throw InputError("--model is required for mode " + o.mode);
  const AugmentationModel model = read_model_file(o.model);
  if (o.mode == "haochen") {
    double alpha = 0.0;
    if (o.alpha) {
      alpha = *o.alpha;
    } else {
      if (o.labels.empty()) throw InputError("haochen mode needs --alpha or --labels");
      const LabelFunction ystar = load_labels(o.labels, LabelDomain::inputs);
      alpha = inconsistency(model, propagate_labels(model, ystar), ystar);
    }
    const SpectralGraph graph = build_matrices(model);
    const Index dp = o.d_prime > 0 ? o.d_prime : o.d;
    write_report(haochen_bound(graph, alpha, o.d, dp, o.subopt, o.c1, o.c2), f);
    f << "alpha=" << format_double(alpha) << '\n';
    return;
  }
  if (o.mode != "fnclass") throw InputError("unknown mode '" + o.mode + "' (fnclass, haochen, hypercube)");
  if (o.features.empty() || o.labels.empty()) throw InputError("fnclass mode needs --features and --labels");
  const FeatureMatrix phi(load_matrix(o.features));
  const LabelFunction ystar = load_labels(o.labels, LabelDomain::inputs);
  GStrategy strategy = GStrategy::propagate_labels;
  std::optional<LabelFunction> user_g;
  if (o.g_strategy == "exact") {
    strategy = GStrategy::exact_enumeration;
  } else if (o.g_strategy == "user") {
    if (o.g_file.empty()) throw InputError("--g-strategy user needs --g");
    strategy = GStrategy::user_supplied;
    user_g = load_labels(o.g_file, LabelDomain::augmentations);
  } else if (o.g_strategy != "propagate") {
    throw InputError("unknown g strategy '" + o.g_strategy + "' (exact, propagate, user)");
  }
  write_report(fnclass_bound(model, phi, ystar, o.subopt, o.d, o.d_prime, strategy, user_g ? &*user_g : nullptr),
               f);
}

// ---- hypercube / train ----

struct HypercubeOptions {
  CommonOptions common;
  std::string preset, config;
  std::optional<Index> seeds, epochs, n_train, n_val, eval_every;
  std::string arms;
  bool no_timing = false;
};

void write_experiment(const fs::path& out, const ExperimentResult& r) {
  {
    auto f = open_output(out, "summary.csv");
    r.write_summary_csv(f);
  }
  {
    auto f = open_output(out, "aggregate.csv");
    r.write_aggregate_csv(f);
  }
  const fs::path dir = out / "trajectories";
  fs::create_directories(dir);
  for (const auto& row : r.rows) {
    auto f = open_output(dir, row.arm + "_seed" + std::to_string(row.seed) + ".csv");
    row.trajectory.write_csv(f);
  }
}

void report_progress(const ArmResult& a) {
  std::cerr << a.arm << " seed " << a.seed << ": loss " << format_double(a.final_cont_loss) << ", acc "
            << format_double(a.final_acc) << '\n';
}

void run_hypercube(const HypercubeOptions& o, const std::vector<std::string>& argv) {
  if (!o.preset.empty() && !o.config.empty()) throw InputError("give either --preset or --config, not both");
  write_manifest(o.common.out, "hypercube", o.config.empty() ? "preset:" + o.preset : o.config, o.common.seed,
                 {o.config}, argv);
  KeyValueConfig cfg;
  if (!o.config.empty()) {
    cfg = KeyValueConfig::load(o.config);
  } else {
    std::istringstream in(builtin_preset(o.preset.empty() ? "table1" : o.preset));
    cfg = KeyValueConfig::parse(in, "preset " + o.preset);
  }
  if (o.seeds) cfg.set("seeds", std::to_string(*o.seeds));
  if (o.epochs) cfg.set("epochs", std::to_string(*o.epochs));
  if (o.n_train) cfg.set("n_train", std::to_string(*o.n_train));
  if (o.n_val) cfg.set("n_val", std::to_string(*o.n_val));
  if (o.eval_every) cfg.set("eval_every", std::to_string(*o.eval_every));
  if (!o.arms.empty()) cfg.set("arms", o.arms);
  HypercubeExperiment exp = hypercube_experiment_from_config(cfg, o.common.seed);
  for (auto& a : exp.arms) a.train.record_wall_time = !o.no_timing;
  write_experiment(o.common.out, run_experiment(exp, report_progress));
}

struct TrainOptions {
  CommonOptions common;
  std::string model_kind = "mlp2", loss = "spectral", optimizer = "adam";
  double lr = 1e-3, weight_decay = 0.0, temperature = 0.5;
  std::optional<double> clip;
  Index epochs = 500, batch = 512, eval_every = 25, dim = 50, label_dim = 10, n_train = 50000, n_val = 12500;
  Index hidden = 100, rep_dim = 20;
  bool label_orthogonal = false, no_timing = false;
};

void run_train(const TrainOptions& o, const std::vector<std::string>& argv) {
  write_manifest(o.common.out, "train", "", o.common.seed, {}, argv);
  ArmSpec arm;
  if (o.model_kind == "linear") {
    arm.kind = ModelKind::linear;
  } else if (o.model_kind == "mlp2") {
    arm.kind = ModelKind::mlp2;
  } else {
    throw InputError("unknown model kind '" + o.model_kind + "' (linear, mlp2)");
  }
  TrainConfig& t = arm.train;
  if (o.loss == "spectral") {
    t.loss = LossKind::spectral_sampled;
  } else if (o.loss == "simclr") {
    t.loss = LossKind::simclr;
  } else {
    throw InputError("unknown loss '" + o.loss + "' (spectral, simclr)");
  }
  if (o.optimizer == "adam") {
    t.optimizer = OptimizerKind::adam;
  } else if (o.optimizer == "sgd") {
    t.optimizer = OptimizerKind::sgd;
  } else {
    throw InputError("unknown optimizer '" + o.optimizer + "' (adam, sgd)");
  }
  t.lr = o.lr;
  t.weight_decay = o.weight_decay;
  t.temperature = o.temperature;
  t.grad_clip_norm = o.clip;
  t.epochs = o.epochs;
  t.batch_size = o.batch;
  t.eval_every = o.eval_every;
  t.label_orthogonal = o.label_orthogonal;
  t.record_wall_time = !o.no_timing;
  t.validate();
  arm.name = o.model_kind + "_" + o.loss + "_" + o.optimizer + (o.label_orthogonal ? "_orth" : "");

  HypercubeExperiment exp;
  exp.cfg.dim = o.dim;
  exp.cfg.label_dim = o.label_dim;
  require(o.label_dim >= 1 && o.label_dim < o.dim, "need 1 <= label-dim < dim");
  exp.n_train = o.n_train;
  exp.n_val = o.n_val;
  exp.hidden = o.hidden;
  exp.rep_dim = o.rep_dim;
  exp.seeds = {o.common.seed};
  exp.arms = {arm};
  exp.spurious_arm = false;
  const ExperimentResult r = run_experiment(exp, report_progress);
  {
    auto f = open_output(o.common.out, "summary.csv");
    r.write_summary_csv(f);
  }
  auto f = open_output(o.common.out, "trajectory.csv");
  r.rows.front().trajectory.write_csv(f);
}

// ---- spurious ----

struct SpuriousOptions {
  CommonOptions common;
  std::string model, rep, labels;
  Index budget = 20000;
  Index restarts = 16;
};

void run_spurious(const SpuriousOptions& o, const std::vector<std::string>& argv) {
  write_manifest(o.common.out, "spurious", "", o.common.seed, {o.model, o.rep, o.labels}, argv);
  const AugmentationModel model = read_model_file(o.model);
  const RepMatrix rep(load_matrix(o.rep));
  const LabelFunction ystar = load_labels(o.labels, LabelDomain::inputs);
  const RepMatrix collapsed = collapse_to_means(model, rep);
  Rng rng(derive_seed(o.common.seed, 4));
  const PermutationSearch s = search_bad_permutation(model, collapsed, ystar, o.budget, rng, o.restarts);
  const RepMatrix permuted = permute_embeddings(model, collapsed, s.perm);
  const double before = spectral_loss_population(model, collapsed);
  const double after = spectral_loss_population(model, permuted);
  {
    auto f = open_output(o.common.out, "permutation.txt");
    write_permutation(s.perm, f);
  }
  {
    auto f = open_output(o.common.out, "permuted_rep.csv");
    write_matrix(permuted.values, f);
  }
  auto f = open_output(o.common.out, "report.txt");
  f << "probe_error=" << format_double(s.probe_error) << '\n';
  f << "identity_error=" << format_double(s.identity_error) << '\n';
  f << "loss_collapsed=" << format_double(before) << '\n';
  f << "loss_permuted=" << format_double(after) << '\n';
  f << "loss_residual=" << format_double(std::abs(after - before)) << '\n';
  f << "evaluations=" << s.evaluations << '\n';
  f << "restarts_run=" << s.restarts_run << '\n';
  f << "unbalanced=" << (s.unbalanced ? "true" : "false") << '\n';
  f << "majority_baseline=" << format_double(s.majority_baseline) << '\n';
}

// ---- text ----

struct TextOptions {
  CommonOptions common;
  std::string corpus, preset, config, aug;
  std::optional<double> p_drop, lr;
  std::optional<Index> epochs;
  SyntheticCorpusSpec synth;
  bool no_timing = false;
};

void run_text(const TextOptions& o, const std::vector<std::string>& argv) {
  if (!o.preset.empty() && !o.config.empty()) throw InputError("give either --preset or --config, not both");
  write_manifest(o.common.out, "text", o.config.empty() ? (o.preset.empty() ? "" : "preset:" + o.preset) : o.config,
                 o.common.seed, {o.corpus, o.config}, argv);
  KeyValueConfig cfg;
  if (!o.config.empty()) {
    cfg = KeyValueConfig::load(o.config);
  } else if (!o.preset.empty()) {
    std::istringstream in(builtin_preset(o.preset));
    cfg = KeyValueConfig::parse(in, "preset " + o.preset);
  }
  if (!o.aug.empty()) cfg.set("aug", o.aug);
  if (o.p_drop) cfg.set("p_drop", format_double(*o.p_drop));
  if (o.lr) cfg.set("lr", format_double(*o.lr));
  if (o.epochs) cfg.set("epochs", std::to_string(*o.epochs));
  TextExperiment exp = text_experiment_from_config(cfg, o.common.seed);
  exp.train.record_wall_time = !o.no_timing;

  Corpus corpus;
  if (!o.corpus.empty()) {
    corpus = load_corpus(o.corpus);
  } else {
    SyntheticCorpusSpec spec = o.synth;
    spec.seed = derive_seed(o.common.seed, 300);
    corpus = synthetic_corpus(spec);
    auto f = open_output(o.common.out, "corpus.tsv");
    write_corpus(f, corpus);
  }
  const TextResult r = run_text_experiment(corpus, exp);
  {
    auto f = open_output(o.common.out, "trajectory.csv");
    r.trajectory.write_csv(f);
  }
  auto f = open_output(o.common.out, "report.txt");
  f << "aug=" << to_string(exp.aug) << '\n';
  f << "p_drop=" << format_double(exp.p_drop) << '\n';
  f << "n_classes=" << corpus.n_classes << '\n';
  f << "n_train=" << r.n_train << '\n';
  f << "n_val=" << r.n_val << '\n';
  f << "epochs_run=" << r.trajectory.rows.back().epoch << '\n';
  f << "stopped_early=" << (r.trajectory.stopped_early ? "true" : "false") << '\n';
  f << "final_cont_loss=" << format_double(r.trajectory.rows.back().cont_val_loss) << '\n';
  f << "final_acc=" << format_double(r.final_acc) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contrastive representation analysis toolkit"};
  app.require_subcommand(1);
  const std::vector<std::string> args(argv + 1, argv + argc);

  AnalyzeOptions analyze;
  auto* c_analyze = app.add_subcommand("analyze", "Spectrum and disjointness report for a model file");
  add_common(c_analyze, analyze.common);
  c_analyze->add_option("--model", analyze.model, "Augmentation model file")->required();

  BoundOptions bound;
  auto* c_bound = app.add_subcommand("bound", "Downstream error bounds");
  add_common(c_bound, bound.common);
  c_bound->add_option("--mode", bound.mode, "fnclass, haochen or hypercube")->capture_default_str();
  c_bound->add_option("--model", bound.model, "Augmentation model file");
  c_bound->add_option("--features", bound.features, "Feature table, one row per augmentation");
  c_bound->add_option("--labels", bound.labels, "Input labels, one +1/-1 per line");
  c_bound->add_option("--g-strategy", bound.g_strategy, "exact, propagate or user")->capture_default_str();
  c_bound->add_option("--g", bound.g_file, "Augmentation labels for --g-strategy user");
  c_bound->add_option("--d", bound.d, "Representation dimension")->capture_default_str();
  c_bound->add_option("--d-prime", bound.d_prime, "Split index; 0 minimizes over 1..d (fnclass)")
      ->capture_default_str();
  c_bound->add_option("--subopt", bound.subopt, "Suboptimality epsilon")->capture_default_str();
  c_bound->add_option("--alpha", bound.alpha, "Label noise term (haochen); default from --labels");
  c_bound->add_option("--c1", bound.c1, "First constant (haochen)")->capture_default_str();
  c_bound->add_option("--c2", bound.c2, "Second constant (haochen)")->capture_default_str();
  c_bound->add_option("--k", bound.k, "Label coordinates (hypercube)")->capture_default_str();

  HypercubeOptions hyper;
  auto* c_hyper = app.add_subcommand("hypercube", "Multi-arm hypercube experiment");
  add_common(c_hyper, hyper.common);
  c_hyper->add_option("--preset", hyper.preset, "Built-in preset (table1)");
  c_hyper->add_option("--config", hyper.config, "key = value config file");
  c_hyper->add_option("--seeds", hyper.seeds, "Number of seeds");
  c_hyper->add_option("--epochs", hyper.epochs, "Override epochs");
  c_hyper->add_option("--n-train", hyper.n_train, "Override training set size");
  c_hyper->add_option("--n-val", hyper.n_val, "Override validation set size");
  c_hyper->add_option("--eval-every", hyper.eval_every, "Override evaluation interval");
  c_hyper->add_option("--arms", hyper.arms, "Comma-separated arm names");
  c_hyper->add_flag("--no-timing", hyper.no_timing, "Write 0 for wall time (byte-identical replays)");

  SpuriousOptions spur;
  auto* c_spur = app.add_subcommand("spurious", "Search a label-destroying permutation of a representation");
  add_common(c_spur, spur.common);
  c_spur->add_option("--model", spur.model, "Augmentation model file (disjoint, uniform inputs)")->required();
  c_spur->add_option("--rep", spur.rep, "Representation table, one row per augmentation")->required();
  c_spur->add_option("--labels", spur.labels, "Input labels, one +1/-1 per line")->required();
  c_spur->add_option("--budget", spur.budget, "Candidate evaluations")->capture_default_str();
  c_spur->add_option("--restarts", spur.restarts, "Search restarts")->capture_default_str();

  TextOptions text;
  auto* c_text = app.add_subcommand("text", "Bag-of-words contrastive run on a corpus");
  add_common(c_text, text.common);
  c_text->add_option("--corpus", text.corpus, "Corpus file (label<TAB>tokens); synthetic if omitted");
  c_text->add_option("--preset", text.preset, "Built-in preset (text)");
  c_text->add_option("--config", text.config, "key = value config file");
  c_text->add_option("--aug", text.aug, "drop, drop_permute, split or split_full");
  c_text->add_option("--p-drop", text.p_drop, "Token drop rate");
  c_text->add_option("--lr", text.lr, "Override learning rate");
  c_text->add_option("--epochs", text.epochs, "Override epochs");
  c_text->add_option("--classes", text.synth.classes, "Synthetic classes")->capture_default_str();
  c_text->add_option("--docs-per-class", text.synth.docs_per_class, "Synthetic documents per class")
      ->capture_default_str();
  c_text->add_option("--vocab", text.synth.vocab, "Synthetic vocabulary size")->capture_default_str();
  c_text->add_option("--doc-len", text.synth.doc_len, "Synthetic document length")->capture_default_str();
  c_text->add_option("--signal", text.synth.signal, "Synthetic class-token probability")->capture_default_str();
  c_text->add_flag("--no-timing", text.no_timing, "Write 0 for wall time (byte-identical replays)");

  TrainOptions train;
  auto* c_train = app.add_subcommand("train", "Train one representation on a hypercube instance");
  add_common(c_train, train.common);
  c_train->add_option("--model-kind", train.model_kind, "linear or mlp2")->capture_default_str();
  c_train->add_option("--loss", train.loss, "spectral or simclr")->capture_default_str();
  c_train->add_option("--optimizer", train.optimizer, "adam or sgd")->capture_default_str();
  c_train->add_option("--lr", train.lr, "Learning rate")->capture_default_str();
  c_train->add_option("--weight-decay", train.weight_decay, "L2 weight decay")->capture_default_str();
  c_train->add_option("--temperature", train.temperature, "SimCLR temperature")->capture_default_str();
  c_train->add_option("--clip", train.clip, "Gradient clipping norm");
  c_train->add_option("--epochs", train.epochs, "Epochs")->capture_default_str();
  c_train->add_option("--batch", train.batch, "Batch size")->capture_default_str();
  c_train->add_option("--eval-every", train.eval_every, "Evaluation interval")->capture_default_str();
  c_train->add_option("--dim", train.dim, "Hypercube dimension")->capture_default_str();
  c_train->add_option("--label-dim", train.label_dim, "Label coordinates")->capture_default_str();
  c_train->add_option("--n-train", train.n_train, "Training inputs")->capture_default_str();
  c_train->add_option("--n-val", train.n_val, "Validation inputs")->capture_default_str();
  c_train->add_option("--hidden", train.hidden, "Hidden width (mlp2)")->capture_default_str();
  c_train->add_option("--rep-dim", train.rep_dim, "Representation dimension")->capture_default_str();
  c_train->add_flag("--label-orthogonal", train.label_orthogonal, "Subtract class means from a memory bank");
  c_train->add_flag("--no-timing", train.no_timing, "Write 0 for wall time (byte-identical replays)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*c_analyze) run_analyze(analyze, args);
    if (*c_bound) run_bound(bound, args);
    if (*c_hyper) run_hypercube(hyper, args);
    if (*c_spur) run_spurious(spur, args);
    if (*c_text) run_text(text, args);
    if (*c_train) run_train(train, args);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
