// srforge: dataset synthesis, training, architecture search, inference and
// evaluation from the command line.
//
// Exit codes: 0 success, 1 unexpected error, 2 invalid flags or config,
// 3 I/O or file-format failure, 4 training aborted on a non-finite loss.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "srforge/data.hpp"
#include "srforge/ensemble.hpp"
#include "srforge/error.hpp"
#include "srforge/models.hpp"
#include "srforge/nas.hpp"
#include "srforge/parallel.hpp"
#include "srforge/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace srforge;

namespace {

enum Exit { kOk = 0, kUnexpected = 1, kUsage = 2, kIo = 3, kDiverged = 4 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Binds CLI options to JSON config keys. Keys are the long flag names with
// dashes replaced by underscores; a flag given on the command line wins over
// the file.
class Bindings {
 public:
  explicit Bindings(CLI::App* app) : app_(app) {}

  template <typename T>
  CLI::Option* option(const std::string& name, T& value, const std::string& help) {
    CLI::Option* opt = app_->add_option("--" + name, value, help)->capture_default_str();
    add(name, opt, [&value](const json& j) { value = j.get<T>(); });
    return opt;
  }

  CLI::Option* flag(const std::string& name, bool& value, const std::string& help) {
    CLI::Option* opt = app_->add_flag("--" + name, value, help);
    add(name, opt, [&value](const json& j) { value = j.get<bool>(); });
    return opt;
  }

  void apply(const json& config) const {
    if (!config.is_object()) throw UsageError("config file must hold a JSON object");
    for (const auto& [key, value] : config.items()) {
      const auto it = std::find_if(items_.begin(), items_.end(), [&](const Item& i) { return i.key == key; });
      if (it == items_.end()) throw UsageError("unknown config key '" + key + "' for '" + app_->get_name() + "'");
      if (it->opt->count() > 0) continue;
      try {
        it->set(value);
      } catch (const json::exception& e) {
        throw UsageError("config key '" + key + "': " + e.what());
      }
    }
  }

 private:
  struct Item {
    std::string key;
    CLI::Option* opt;
    std::function<void(const json&)> set;
  };
  void add(std::string name, CLI::Option* opt, std::function<void(const json&)> set) {
    std::replace(name.begin(), name.end(), '-', '_');
    items_.push_back({std::move(name), opt, std::move(set)});
  }

  CLI::App* app_;
  std::vector<Item> items_;
};

json read_json_file(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config " + path.string());
  try {
    return json::parse(f);
  } catch (const json::parse_error& e) {
    throw UsageError("config " + path.string() + " is not valid JSON: " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw IoError("failed writing " + path.string());
}

void check_scale(int scale) {
  if (scale != 2 && scale != 3 && scale != 4) {
    throw UsageError("--scale " + std::to_string(scale) + " is invalid; valid scales are {2,3,4}");
  }
}

fs::path manifest_file(const fs::path& data) { return fs::is_directory(data) ? data / "manifest.jsonl" : data; }

DatasetManifest open_manifest(const fs::path& data) {
  const fs::path file = manifest_file(data);
  if (!fs::exists(file)) throw IoError("manifest not found: " + file.string());
  return load_manifest(file);
}

int manifest_scale(const DatasetManifest& m) {
  if (m.entries.empty()) throw UsageError("manifest has no entries");
  for (const auto& e : m.entries)
    if (e.scale != m.entries.front().scale) throw UsageError("manifest mixes scales");
  return m.entries.front().scale;
}

std::string fmt(double v, int precision) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  std::ostringstream s;
  s << std::fixed << std::setprecision(precision) << v;
  return s.str();
}

json metric_json(const MetricReport& r) {
  json entries = json::array();
  for (const auto& e : r.entries) {
    entries.push_back({{"id", e.id},
                       {"psnr", std::isinf(e.psnr) ? json("inf") : json(e.psnr)},
                       {"ssim", e.ssim}});
  }
  json failures = json::array();
  for (const auto& f : r.failures) failures.push_back({{"id", f.id}, {"error", f.error}});
  const double mp = r.mean_psnr();
  return {{"count", r.entries.size()},
          {"failures", failures},
          {"mean_psnr", std::isfinite(mp) ? json(mp) : json(fmt(mp, 4))},
          {"mean_ssim", std::isfinite(r.mean_ssim()) ? json(r.mean_ssim()) : json(nullptr)},
          {"entries", entries}};
}

// ---- make-data ----

struct MakeDataArgs {
  std::string out;
  int count = 20;
  int scale = 2;
  int hr_size = 96;
  double blur_sigma = 0.8;
  double noise = 0.005;
  double val_fraction = 600.0 / 19000.0;
  double ncc_threshold = kDefaultNccThreshold;
  std::uint64_t seed = 0;
};

int cmd_make_data(const MakeDataArgs& a) {
  check_scale(a.scale);
  if (a.out.empty()) throw UsageError("--out is required");
  if (a.count < 1) throw UsageError("--count must be >= 1");
  if (a.hr_size < 2 * a.scale || a.hr_size % a.scale != 0) {
    throw UsageError("--hr-size must be a multiple of --scale and at least 2 * scale");
  }
  if (!(a.blur_sigma >= 0)) throw UsageError("--blur-sigma must be >= 0");
  if (!(a.val_fraction >= 0 && a.val_fraction <= 1)) throw UsageError("--val-fraction must lie in [0, 1]");

  SyntheticOptions o;
  o.count = a.count;
  o.hr_size = a.hr_size;
  o.spec.kernel = gaussian_kernel(a.blur_sigma);
  o.spec.scale = a.scale;
  o.spec.noise_sigma = a.noise;
  o.val_fraction = a.val_fraction;
  o.seed = a.seed;
  try {
    o.spec.validate();
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
  DatasetManifest m = make_synthetic_dataset(o, a.out);

  // Gate the pairs; rejected ones leave the manifest and are listed in the audit.
  json audit = {{"threshold", a.ncc_threshold}, {"kept", json::array()}, {"rejected", json::array()}};
  NccFilterResult gate = ncc_filter(m.load_pairs(""), a.ncc_threshold);
  std::vector<std::string> rejected_ids;
  for (const auto& p : gate.kept) audit["kept"].push_back({{"id", p.id}, {"ncc", p.ncc_score}});
  for (const auto& r : gate.rejected) {
    audit["rejected"].push_back({{"id", r.pair.id}, {"reason", r.reason}});
    rejected_ids.push_back(r.pair.id);
  }
  std::erase_if(m.entries, [&](const ManifestEntry& e) {
    return std::find(rejected_ids.begin(), rejected_ids.end(), e.id) != rejected_ids.end();
  });
  save_manifest(m);
  write_text(fs::path(a.out) / "ncc_audit.json", audit.dump(2) + "\n");
  std::cout << "wrote " << m.entries.size() << " pairs (" << m.count("train") << " train, " << m.count("val")
            << " val, " << rejected_ids.size() << " rejected) to " << a.out << "\n";
  return kOk;
}

// ---- train ----

struct TrainArgs {
  std::string data;
  std::string out;
  std::string preset = "drn-tiny";
  std::uint64_t init_seed = 0;
  int epochs = 30;
  int batch_size = 16;
  double lr = 1e-4;
  double lr_decay_factor = 0.5;
  int lr_decay_interval = 30;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int crop = 120;
  double alpha = kDefaultLossAlpha;
  std::uint64_t seed = 0;
  int checkpoint_interval = 1;
  double ncc_threshold = kDefaultNccThreshold;
  int val_patch = 120;
  int val_stride = 60;
  bool val_self_ensemble = false;
  bool resume = false;
};

TrainConfig to_train_config(const TrainArgs& a) {
  TrainConfig c;
  c.epochs = a.epochs;
  c.batch_size = a.batch_size;
  c.learning_rate = a.lr;
  c.lr_decay_factor = a.lr_decay_factor;
  c.lr_decay_interval = a.lr_decay_interval;
  c.adam = {a.beta1, a.beta2, a.eps};
  c.crop = a.crop;
  c.loss_alpha = a.alpha;
  c.seed = a.seed;
  c.checkpoint_interval = a.checkpoint_interval;
  c.ncc_threshold = a.ncc_threshold;
  c.validation = {a.val_self_ensemble, a.val_patch, a.val_stride};
  c.out_dir = a.out;
  c.resume = a.resume;
  return c;
}

int cmd_train(const TrainArgs& a) {
  if (a.data.empty() || a.out.empty()) throw UsageError("--data and --out are required");
  const DatasetManifest m = open_manifest(a.data);
  const int scale = manifest_scale(m);
  ModelConfig cfg;
  try {
    cfg = preset(a.preset, scale);
  } catch (const InvalidArgument& e) {
    std::string names;
    for (const auto& n : preset_names()) names += (names.empty() ? "" : ", ") + n;
    throw UsageError(std::string(e.what()) + " (available: " + names + ")");
  }
  Modelf model(cfg, a.init_seed);
  const TrainReport r = train(model, m, to_train_config(a));
  for (const auto& e : r.epochs) {
    std::cout << "epoch " << std::setw(3) << e.epoch << "  lr " << fmt(e.learning_rate, 6) << "  loss "
              << fmt(e.train_loss, 5) << "  val PSNR " << fmt(e.val_psnr, 3) << "  SSIM " << fmt(e.val_ssim, 4) << "\n";
  }
  std::cout << "bicubic val PSNR " << fmt(r.bicubic_val_psnr, 3) << "; best epoch " << r.best_epoch << "; report "
            << (fs::path(a.out) / "report.json").string() << "\n";
  return kOk;
}

// ---- search ----

struct SearchArgs {
  std::string evaluator = "synthetic";
  int budget = 20;
  int init = 5;
  std::string acquisition = "ucb";
  double beta = 2.0;
  std::uint64_t seed = 0;
  std::string out;
  std::string data;
  std::vector<int> features{16, 32, 64, 128};
  std::vector<int> depth{2, 4, 6, 8, 10, 12, 14, 16, 18, 20};
  std::vector<int> block_size{2, 3, 4};
  int epochs = 2;
  int batch_size = 1;
  double lr = 2e-3;
  int crop = 48;
  std::uint64_t init_seed = 0;
};

int cmd_search(const SearchArgs& a) {
  SearchConfig c;
  c.budget = a.budget;
  c.init_samples = std::min(a.init, a.budget);
  try {
    c.acquisition = {acquisition_from_string(a.acquisition), a.beta};
    c.validate();
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
  c.seed = a.seed;
  c.evaluator = a.evaluator;

  std::optional<SearchSpace> space;
  Evaluator eval;
  std::optional<QuadraticBenchmark> bench;
  if (a.evaluator == "synthetic") {
    space = benchmark_space();
    bench = benchmark_quadratic();
    eval = [&](const SearchPoint& p) { return (*bench)(*space, p); };
  } else if (a.evaluator == "mini-train") {
    if (a.data.empty()) throw UsageError("--data is required for the mini-train evaluator");
    const DatasetManifest m = open_manifest(a.data);
    try {
      space.emplace(ModelKind::Drn,
                    std::vector<SearchDimension>{{"features", a.features}, {"depth", a.depth}, {"block_size", a.block_size}},
                    manifest_scale(m));
    } catch (const InvalidArgument& e) {
      throw UsageError(e.what());
    }
    MiniTrainOptions o;
    o.train.epochs = a.epochs;
    o.train.batch_size = a.batch_size;
    o.train.learning_rate = a.lr;
    o.train.crop = a.crop;
    o.train.seed = a.seed;
    o.train.validation = {false, 0, 1};
    o.init_seed = a.init_seed;
    eval = mini_train_evaluator(*space, ncc_filter(m.load_pairs("train")).kept, m.load_pairs("val"), o);
  } else {
    throw UsageError("unknown evaluator '" + a.evaluator + "' (expected synthetic or mini-train)");
  }

  const SearchResult r = search(*space, eval, c);
  json report = r.to_json(*space);
  report["config"] = {{"evaluator", a.evaluator}, {"budget", a.budget}, {"init_samples", c.init_samples},
                      {"acquisition", to_string(c.acquisition.kind)}, {"beta", a.beta}, {"seed", a.seed}};
  if (bench) {
    report["benchmark_optimum"] = space->values(bench->optimum);
    report["found_optimum"] = r.ranked.front().point == bench->optimum;
  }
  if (!a.out.empty()) write_text(a.out, report.dump(2) + "\n");
  const auto& best = r.ranked.front();
  std::cout << r.history.size() << " evaluations; best score " << fmt(best.score, 4) << " at";
  const auto values = space->values(best.point);
  for (std::size_t k = 0; k < values.size(); ++k) std::cout << " " << space->dims()[k].name << "=" << values[k];
  std::cout << "\n";
  return kOk;
}

// ---- infer / eval shared ----

struct EnsembleArgs {
  std::vector<std::string> weights;
  std::vector<double> member_weights;
  int patch = 120;
  int stride = 60;
  bool no_self_ensemble = false;
};

struct LoadedEnsemble {
  std::vector<Modelf> models;
  std::vector<EnsembleMember> members;
  EnsembleOptions options;
};

LoadedEnsemble load_ensemble(const EnsembleArgs& a) {
  if (!a.member_weights.empty() && a.member_weights.size() != a.weights.size()) {
    throw UsageError("--member-weights needs one value per --weights file");
  }
  LoadedEnsemble e;
  e.models.reserve(a.weights.size());
  for (const auto& w : a.weights) e.models.push_back(load_weights(w));
  for (std::size_t i = 0; i < e.models.size(); ++i) {
    if (e.models[i].scale() != e.models.front().scale()) {
      throw UsageError("scale mismatch: " + a.weights[i] + " is x" + std::to_string(e.models[i].scale()) + " but " +
                       a.weights.front() + " is x" + std::to_string(e.models.front().scale()));
    }
    const double w = a.member_weights.empty() ? 1.0 : a.member_weights[i];
    if (!(w > 0)) throw UsageError("--member-weights must be positive");
    e.members.push_back({as_patch_fn(e.models[i]), e.models[i].scale(), w});
  }
  if (a.patch < 0 || a.stride < 1 || (a.patch > 0 && a.stride > a.patch)) {
    throw UsageError("--patch must be >= 0 and --stride in [1, patch]");
  }
  e.options = {!a.no_self_ensemble, a.patch, a.stride};
  return e;
}

void add_ensemble_options(Bindings& b, EnsembleArgs& a) {
  b.option("weights", a.weights, "weights file (repeat for a model ensemble)");
  b.option("member-weights", a.member_weights, "per-model averaging weights (default uniform)");
  b.option("patch", a.patch, "LR tile size for the patch ensemble; 0 = whole image");
  b.option("stride", a.stride, "tile stride in LR pixels");
  b.flag("no-self-ensemble", a.no_self_ensemble, "disable the x8 dihedral self-ensemble");
}

// ---- infer ----

struct InferArgs {
  EnsembleArgs ensemble;
  std::string input;
  std::string output;
};

int cmd_infer(const InferArgs& a) {
  if (a.ensemble.weights.empty()) throw UsageError("at least one --weights file is required");
  if (a.input.empty() || a.output.empty()) throw UsageError("--input and --output are required");
  const LoadedEnsemble e = load_ensemble(a.ensemble);
  std::vector<std::pair<fs::path, fs::path>> jobs;
  if (fs::is_directory(a.input)) {
    for (const auto& entry : fs::directory_iterator(a.input))
      if (entry.path().extension() == ".ppm") jobs.emplace_back(entry.path(), fs::path(a.output) / entry.path().filename());
    std::sort(jobs.begin(), jobs.end());
    fs::create_directories(a.output);
  } else {
    jobs.emplace_back(a.input, a.output);
  }
  for (const auto& [in, out] : jobs) {
    const Tensorf lr = load_ppm(in);
    const Tensorf sr = model_ensemble(e.members, lr, e.options);
    save_ppm(sr, out);
    std::cout << in.string() << " (" << lr.w() << "x" << lr.h() << ") -> " << out.string() << " (" << sr.w() << "x"
              << sr.h() << ")\n";
  }
  return kOk;
}

// ---- eval ----

struct EvalArgs {
  EnsembleArgs ensemble;
  std::string data;
  std::string split = "val";
  std::string json_out;
  bool self_check = false;
};

int cmd_eval(const EvalArgs& a) {
  if (a.data.empty()) throw UsageError("--data is required");
  const DatasetManifest m = open_manifest(a.data);
  const LoadedEnsemble e = load_ensemble(a.ensemble);
  const int scale = manifest_scale(m);
  if (!e.models.empty() && e.models.front().scale() != scale) {
    throw UsageError("scale mismatch: models are x" + std::to_string(e.models.front().scale()) + ", data is x" +
                     std::to_string(scale));
  }
  struct Row {
    std::string name;
    MetricReport report;
  };
  std::vector<Row> rows;
  const EnsembleMember bicubic{bicubic_patch_fn(scale), scale, 1.0};
  rows.push_back({"bicubic", evaluate(std::span(&bicubic, 1), m, a.split, {false, 0, 1})});
  if (a.self_check) {
    // HR against itself: PSNR +inf and SSIM 1 by construction.
    DatasetManifest self = m;
    for (auto& entry : self.entries) entry.lr_path = entry.hr_path;
    const EnsembleMember identity{[](const Tensorf& x) { return x; }, 1, 1.0};
    rows.push_back({"hr-vs-hr", evaluate(std::span(&identity, 1), self, a.split, {false, 0, 1})});
  }
  if (!e.members.empty()) {
    const std::string name = e.members.size() == 1 ? "model" : std::to_string(e.members.size()) + "-model ensemble";
    rows.push_back({name, evaluate(e.members, m, a.split, e.options)});
  }

  std::size_t width = 6;
  for (const auto& r : rows) width = std::max(width, r.name.size());
  std::cout << std::left << std::setw(static_cast<int>(width)) << "method" << std::right << std::setw(7) << "pairs"
            << std::setw(9) << "failed" << std::setw(10) << "PSNR" << std::setw(9) << "SSIM" << "\n";
  json out = json::object();
  out["split"] = a.split;
  out["rows"] = json::array();
  for (const auto& r : rows) {
    std::cout << std::left << std::setw(static_cast<int>(width)) << r.name << std::right << std::setw(7)
              << r.report.entries.size() << std::setw(9) << r.report.failures.size() << std::setw(10)
              << fmt(r.report.mean_psnr(), 3) << std::setw(9) << fmt(r.report.mean_ssim(), 4) << "\n";
    json row = metric_json(r.report);
    row["method"] = r.name;
    out["rows"].push_back(row);
  }
  for (const auto& r : rows)
    for (const auto& f : r.report.failures) std::cerr << r.name << ": " << f.id << ": " << f.error << "\n";
  if (!a.json_out.empty()) write_text(a.json_out, out.dump(2) + "\n");
  return kOk;
}

int run(int argc, char** argv) {
  CLI::App app{"srforge: super-resolution training, search and ensemble inference"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "worker threads (default: SRFORGE_THREADS, else 1)")
      ->check(CLI::PositiveNumber);

  struct Sub {
    CLI::App* app;
    std::unique_ptr<Bindings> bindings;
    std::string config;
  };
  std::vector<Sub> subs;
  auto add_sub = [&](const std::string& name, const std::string& help) -> Sub& {
    CLI::App* s = app.add_subcommand(name, help);
    subs.push_back({s, std::make_unique<Bindings>(s), {}});
    s->add_option("--config", subs.back().config, "JSON file with option values; flags override it");
    return subs.back();
  };
  subs.reserve(5);

  MakeDataArgs md;
  {
    Bindings& b = *add_sub("make-data", "synthesize degraded LR/HR pairs and a manifest").bindings;
    b.option("out", md.out, "output directory");
    b.option("count", md.count, "number of pairs");
    b.option("scale", md.scale, "upscaling factor, one of {2,3,4}");
    b.option("hr-size", md.hr_size, "HR image side in pixels");
    b.option("blur-sigma", md.blur_sigma, "Gaussian blur sigma before downsampling");
    b.option("noise", md.noise, "additive Gaussian noise sigma on LR");
    b.option("val-fraction", md.val_fraction, "fraction of pairs held out for validation");
    b.option("ncc-threshold", md.ncc_threshold, "alignment gate on NCC(LR, HR)");
    b.option("seed", md.seed, "random seed");
  }
  TrainArgs tr;
  {
    Bindings& b = *add_sub("train", "train a model on a manifest").bindings;
    b.option("data", tr.data, "manifest file or dataset directory");
    b.option("out", tr.out, "output directory for checkpoints and report.json");
    b.option("preset", tr.preset, "architecture: drn-tiny, drn-star, rcan-tiny, rcan-star, rcan");
    b.option("init-seed", tr.init_seed, "weight initialisation seed");
    b.option("epochs", tr.epochs, "training epochs");
    b.option("batch-size", tr.batch_size, "crops per optimizer step");
    b.option("lr", tr.lr, "initial learning rate");
    b.option("lr-decay-factor", tr.lr_decay_factor, "learning-rate multiplier per decay step");
    b.option("lr-decay-interval", tr.lr_decay_interval, "epochs between decay steps");
    b.option("beta1", tr.beta1, "Adam first-moment decay");
    b.option("beta2", tr.beta2, "Adam second-moment decay");
    b.option("eps", tr.eps, "Adam epsilon");
    b.option("crop", tr.crop, "LR crop size in pixels");
    b.option("alpha", tr.alpha, "MS-SSIM weight in the mixed loss");
    b.option("seed", tr.seed, "shuffle/crop/augmentation seed");
    b.option("checkpoint-interval", tr.checkpoint_interval, "epochs between checkpoints (0: final only)");
    b.option("ncc-threshold", tr.ncc_threshold, "alignment gate applied to training pairs");
    b.option("val-patch", tr.val_patch, "validation tile size; 0 = whole image");
    b.option("val-stride", tr.val_stride, "validation tile stride");
    b.flag("val-self-ensemble", tr.val_self_ensemble, "validate with the x8 self-ensemble");
    b.flag("resume", tr.resume, "continue from the checkpoint in --out");
  }
  SearchArgs se;
  {
    Bindings& b = *add_sub("search", "GP-based architecture search").bindings;
    b.option("evaluator", se.evaluator, "synthetic (quadratic benchmark) or mini-train");
    b.option("budget", se.budget, "total evaluations");
    b.option("init", se.init, "quasi-random design points before the surrogate takes over");
    b.option("acquisition", se.acquisition, "ucb or max-variance");
    b.option("beta", se.beta, "UCB exploration weight");
    b.option("seed", se.seed, "random seed");
    b.option("out", se.out, "search report JSON path");
    b.option("data", se.data, "manifest for the mini-train evaluator");
    b.option("features", se.features, "candidate feature widths")->delimiter(',');
    b.option("depth", se.depth, "candidate block counts")->delimiter(',');
    b.option("block-size", se.block_size, "candidate stages per block")->delimiter(',');
    b.option("epochs", se.epochs, "mini-train epochs per candidate");
    b.option("batch-size", se.batch_size, "mini-train batch size");
    b.option("lr", se.lr, "mini-train learning rate");
    b.option("crop", se.crop, "mini-train LR crop size");
    b.option("init-seed", se.init_seed, "weight initialisation seed for candidates");
  }
  InferArgs in;
  {
    Bindings& b = *add_sub("infer", "upscale PPM images with one or more models").bindings;
    add_ensemble_options(b, in.ensemble);
    b.option("input", in.input, "LR PPM file or directory of PPM files");
    b.option("output", in.output, "output PPM file or directory");
  }
  EvalArgs ev;
  {
    Bindings& b = *add_sub("eval", "PSNR/SSIM table on a manifest split").bindings;
    add_ensemble_options(b, ev.ensemble);
    b.option("data", ev.data, "manifest file or dataset directory");
    b.option("split", ev.split, "train, val, or empty for all");
    b.option("json", ev.json_out, "also write the table as JSON");
    b.flag("self-check", ev.self_check, "add an HR-vs-HR sentinel row");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  set_num_threads(threads > 0 ? threads : threads_from_env());
  for (const Sub& s : subs) {
    if (!s.app->parsed()) continue;
    if (!s.config.empty()) s.bindings->apply(read_json_file(s.config));
    const std::string name = s.app->get_name();
    if (name == "make-data") return cmd_make_data(md);
    if (name == "train") return cmd_train(tr);
    if (name == "search") return cmd_search(se);
    if (name == "infer") return cmd_infer(in);
    if (name == "eval") return cmd_eval(ev);
  }
  return kUsage;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const TrainingDiverged& e) {
    std::cerr << "error: " << e.what() << "\n" << e.snapshot().to_json().dump(2) << "\n";
    return kDiverged;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUnexpected;
  }
}
