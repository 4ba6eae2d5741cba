#include "srforge/trainer.hpp"

#include <bit>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>

#include "srforge/error.hpp"
#include "srforge/ops.hpp"
#include "srforge/parallel.hpp"
#include "srforge/random.hpp"

namespace srforge {
namespace fs = std::filesystem;

// ---- Adam ----

void adam_step(const std::vector<Parameter<float>*>& params, AdamState& state, double lr, const AdamConfig& config) {
  if (state.m.empty() && state.v.empty()) {
    for (const auto* p : params) {
      state.m.push_back(Eigen::VectorXd::Zero(p->value.size()));
      state.v.push_back(Eigen::VectorXd::Zero(p->value.size()));
    }
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw InvalidArgument("adam_step: optimizer state does not match the parameter list");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Eigen::Index n = params[i]->value.size();
    if (state.m[i].size() != n || state.v[i].size() != n || params[i]->grad.size() != n) {
      throw InvalidArgument("adam_step: moment shape mismatch for " + params[i]->name);
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(config.beta1, t);
  const double bc2 = 1.0 - std::pow(config.beta2, t);
  parallel_for(params.size(), [&](std::size_t i) {
    Parameter<float>& p = *params[i];
    const Eigen::VectorXd g = p.grad.values().cast<double>();
    state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * g;
    state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * g.cwiseAbs2();
    const Eigen::ArrayXd step = lr * (state.m[i].array() / bc1) / ((state.v[i].array() / bc2).sqrt() + config.eps);
    p.value.values() = (p.value.values().cast<double>().array() - step).cast<float>().matrix();
  });
}

namespace {

constexpr char kAdamMagic[4] = {'S', 'R', 'A', 'S'};
constexpr std::uint32_t kAdamVersion = 1;

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_u64(const std::vector<std::uint8_t>& in, std::size_t& pos) {
  if (in.size() - pos < 8) throw ParseError(ParseError::Kind::Truncated, "optimizer state truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in[pos++]) << (8 * i);
  return v;
}

std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

// Writes via a temporary file so an interrupted run never leaves a torn file.
void write_file_atomic(const fs::path& path, const std::string& bytes) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) throw IoError("cannot open " + tmp.string() + " for writing");
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("failed writing " + tmp.string());
  }
  fs::rename(tmp, path);
}

}  // namespace

void save_adam_state(const AdamState& state, const fs::path& path) {
  std::vector<std::uint8_t> out(std::begin(kAdamMagic), std::end(kAdamMagic));
  put_u64(out, kAdamVersion);
  put_u64(out, static_cast<std::uint64_t>(state.step));
  put_u64(out, state.m.size());
  for (std::size_t i = 0; i < state.m.size(); ++i) {
    put_u64(out, static_cast<std::uint64_t>(state.m[i].size()));
    for (double x : state.m[i]) put_u64(out, std::bit_cast<std::uint64_t>(x));
    for (double x : state.v[i]) put_u64(out, std::bit_cast<std::uint64_t>(x));
  }
  write_file_atomic(path, std::string(out.begin(), out.end()));
}

AdamState load_adam_state(const fs::path& path) {
  const std::vector<std::uint8_t> in = read_file(path);
  if (in.size() < 4 || !std::equal(std::begin(kAdamMagic), std::end(kAdamMagic), in.begin())) {
    throw ParseError(ParseError::Kind::BadMagic, path.string() + " is not an optimizer state file");
  }
  std::size_t pos = 4;
  if (get_u64(in, pos) != kAdamVersion) throw ParseError(ParseError::Kind::BadVersion, "unsupported optimizer state version");
  AdamState s;
  s.step = static_cast<std::int64_t>(get_u64(in, pos));
  const std::uint64_t count = get_u64(in, pos);
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint64_t n = get_u64(in, pos);
    if (n > (in.size() - pos) / 16) throw ParseError(ParseError::Kind::Truncated, "optimizer state truncated");
    Eigen::VectorXd m(static_cast<Eigen::Index>(n)), v(static_cast<Eigen::Index>(n));
    for (auto& x : m) x = std::bit_cast<double>(get_u64(in, pos));
    for (auto& x : v) x = std::bit_cast<double>(get_u64(in, pos));
    s.m.push_back(std::move(m));
    s.v.push_back(std::move(v));
  }
  if (pos != in.size()) throw ParseError(ParseError::Kind::BadHeader, "trailing bytes in optimizer state");
  return s;
}

// ---- config and report ----

void TrainConfig::validate() const {
  if (epochs < 0) throw InvalidArgument("train: epochs must be >= 0");
  if (batch_size < 1) throw InvalidArgument("train: batch_size must be >= 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw InvalidArgument("train: learning_rate must be >= 0");
  if (!(lr_decay_factor > 0.0 && lr_decay_factor <= 1.0)) throw InvalidArgument("train: lr_decay_factor must lie in (0, 1]");
  if (lr_decay_interval < 1) throw InvalidArgument("train: lr_decay_interval must be >= 1");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw InvalidArgument("train: Adam betas must lie in [0, 1)");
  }
  if (!(adam.eps > 0.0)) throw InvalidArgument("train: Adam eps must be positive");
  if (crop < 1) throw InvalidArgument("train: crop must be >= 1");
  if (!(loss_alpha >= 0.0 && loss_alpha <= 1.0)) throw InvalidArgument("train: loss alpha must lie in [0, 1]");
  if (checkpoint_interval < 0) throw InvalidArgument("train: checkpoint_interval must be >= 0");
  if (resume && out_dir.empty()) throw InvalidArgument("train: resume needs an output directory");
}

double TrainConfig::lr_at(int epoch) const {
  return learning_rate * std::pow(lr_decay_factor, epoch / lr_decay_interval);
}

namespace {

double number_or_nan(const nlohmann::json& j) { return j.is_null() ? std::nan("") : j.get<double>(); }

}  // namespace

nlohmann::json TrainReport::to_json(bool include_timing) const {
  nlohmann::ordered_json epochs_json = nlohmann::ordered_json::array();
  for (const auto& e : epochs) {
    nlohmann::ordered_json j;
    j["epoch"] = e.epoch;
    j["learning_rate"] = e.learning_rate;
    j["train_loss"] = e.train_loss;
    j["batch_losses"] = e.batch_losses;
    j["val_psnr"] = std::isnan(e.val_psnr) ? nlohmann::ordered_json() : nlohmann::ordered_json(e.val_psnr);
    j["val_ssim"] = std::isnan(e.val_ssim) ? nlohmann::ordered_json() : nlohmann::ordered_json(e.val_ssim);
    if (include_timing) j["seconds"] = e.seconds;
    epochs_json.push_back(std::move(j));
  }
  nlohmann::ordered_json out;
  out["train_pairs"] = train_pairs;
  out["val_pairs"] = val_pairs;
  out["rejected_pairs"] = rejected_pairs;
  out["bicubic_val_psnr"] = std::isnan(bicubic_val_psnr) ? nlohmann::ordered_json() : nlohmann::ordered_json(bicubic_val_psnr);
  out["bicubic_val_ssim"] = std::isnan(bicubic_val_ssim) ? nlohmann::ordered_json() : nlohmann::ordered_json(bicubic_val_ssim);
  out["best_epoch"] = best_epoch;
  out["best_checkpoint"] = best_checkpoint;
  out["epochs"] = std::move(epochs_json);
  return out;
}

TrainReport TrainReport::from_json(const nlohmann::json& j) {
  TrainReport r;
  r.train_pairs = j.at("train_pairs").get<std::size_t>();
  r.val_pairs = j.at("val_pairs").get<std::size_t>();
  r.rejected_pairs = j.at("rejected_pairs").get<std::size_t>();
  r.bicubic_val_psnr = number_or_nan(j.at("bicubic_val_psnr"));
  r.bicubic_val_ssim = number_or_nan(j.at("bicubic_val_ssim"));
  r.best_epoch = j.at("best_epoch").get<int>();
  r.best_checkpoint = j.at("best_checkpoint").get<std::string>();
  for (const auto& e : j.at("epochs")) {
    EpochRecord rec;
    rec.epoch = e.at("epoch").get<int>();
    rec.learning_rate = e.at("learning_rate").get<double>();
    rec.train_loss = e.at("train_loss").get<double>();
    rec.batch_losses = e.at("batch_losses").get<std::vector<double>>();
    rec.val_psnr = number_or_nan(e.at("val_psnr"));
    rec.val_ssim = number_or_nan(e.at("val_ssim"));
    rec.seconds = e.value("seconds", 0.0);
    r.epochs.push_back(std::move(rec));
  }
  return r;
}

nlohmann::json DivergenceSnapshot::to_json() const {
  auto num = [](double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(std::to_string(x)); };
  return {{"epoch", epoch}, {"batch", batch}, {"pair_ids", pair_ids}, {"l1", num(l1)},
          {"ms_ssim", num(ms_ssim)}, {"loss", num(loss)}, {"learning_rate", learning_rate}};
}

TrainingDiverged::TrainingDiverged(DivergenceSnapshot snapshot)
    : std::runtime_error("training diverged: non-finite loss at epoch " + std::to_string(snapshot.epoch) +
                         ", batch " + std::to_string(snapshot.batch)),
      snapshot_(std::move(snapshot)) {}

// ---- evaluation ----

PatchFn bicubic_patch_fn(int scale) {
  return [scale](const Tensorf& x) { return bicubic_resize(x, x.h() * scale, x.w() * scale); };
}

namespace {

void score_pair(MetricReport& report, std::span<const EnsembleMember> members, const ImagePair& pair,
                const EnsembleOptions& options) {
  try {
    const Tensorf sr = model_ensemble(members, pair.lr, options);
    if (sr.shape() != pair.hr.shape()) {
      throw InvalidArgument("output " + to_string(sr.shape()) + " does not match HR " + to_string(pair.hr.shape()));
    }
    report.add(pair.id, psnr(sr, pair.hr), ssim(sr, pair.hr));
  } catch (const std::exception& e) {
    report.fail(pair.id, e.what());
  }
}

}  // namespace

MetricReport evaluate(std::span<const EnsembleMember> members, const std::vector<ImagePair>& pairs,
                      const EnsembleOptions& options) {
  if (pairs.empty()) throw InvalidArgument("evaluate: no pairs");
  MetricReport report;
  for (const auto& pair : pairs) score_pair(report, members, pair, options);
  return report;
}

MetricReport evaluate(std::span<const EnsembleMember> members, const DatasetManifest& manifest,
                      const std::string& split, const EnsembleOptions& options) {
  if (manifest.count(split) == 0) throw InvalidArgument("evaluate: split '" + split + "' is empty");
  MetricReport report;
  for (const auto& e : manifest.entries) {
    if (!split.empty() && e.split != split) continue;
    ImagePair pair;
    try {
      pair = {e.id, load_ppm(manifest.root / e.lr_path), load_ppm(manifest.root / e.hr_path), e.ncc};
    } catch (const std::exception& ex) {
      report.fail(e.id, ex.what());
      continue;
    }
    score_pair(report, members, pair, options);
  }
  return report;
}

MetricReport evaluate_bicubic(const std::vector<ImagePair>& pairs) {
  if (pairs.empty()) throw InvalidArgument("evaluate: no pairs");
  MetricReport report;
  for (const auto& pair : pairs) {
    const EnsembleMember member{bicubic_patch_fn(pair.scale()), pair.scale(), 1.0};
    score_pair(report, std::span(&member, 1), pair, {false, 0, 1});
  }
  return report;
}

// ---- training ----

namespace {

Tensorf stack(const std::vector<const Tensorf*>& items) {
  const Shape s = items.front()->shape();
  Tensorf out({static_cast<int>(items.size()), s.c, s.h, s.w});
  const Eigen::Index n = s.size();
  for (std::size_t i = 0; i < items.size(); ++i) out.values().segment(static_cast<Eigen::Index>(i) * n, n) = items[i]->values();
  return out;
}

struct CheckpointFiles {
  fs::path weights, adam, report;
};

CheckpointFiles checkpoint_files(const fs::path& dir) {
  return {dir / "checkpoint.srfw", dir / "checkpoint.adam", dir / "checkpoint.json"};
}

void write_checkpoint(const Modelf& model, const AdamState& state, const TrainReport& report, const fs::path& dir) {
  const CheckpointFiles f = checkpoint_files(dir);
  save_weights(model, f.weights);
  save_adam_state(state, f.adam);
  write_file_atomic(f.report, report.to_json().dump(2) + "\n");
}

}  // namespace

TrainReport train(Modelf& model, const std::vector<ImagePair>& train_pairs, const std::vector<ImagePair>& val_pairs,
                  const TrainConfig& config) {
  config.validate();
  if (train_pairs.empty()) throw InvalidArgument("train: no training pairs");
  int min_lr = std::numeric_limits<int>::max();
  for (const auto& p : train_pairs) {
    if (p.scale() != model.scale()) {
      throw InvalidArgument("train: pair " + p.id + " has scale " + std::to_string(p.scale()) + " but the model is x" +
                            std::to_string(model.scale()));
    }
    min_lr = std::min({min_lr, p.lr.h(), p.lr.w()});
  }
  if (config.crop > min_lr) {
    throw InvalidArgument("train: crop " + std::to_string(config.crop) + " exceeds the smallest LR image (" +
                          std::to_string(min_lr) + " px)");
  }
  if (!config.out_dir.empty()) fs::create_directories(config.out_dir);

  TrainReport report;
  AdamState state;
  if (config.resume && fs::exists(checkpoint_files(config.out_dir).report)) {
    const CheckpointFiles f = checkpoint_files(config.out_dir);
    Modelf loaded = load_weights(f.weights);
    if (!(loaded.config() == model.config())) throw InvalidArgument("train: checkpoint architecture differs from the model");
    model = std::move(loaded);
    state = load_adam_state(f.adam);
    const std::vector<std::uint8_t> bytes = read_file(f.report);
    report = TrainReport::from_json(nlohmann::json::parse(bytes.begin(), bytes.end()));
  } else {
    report.train_pairs = train_pairs.size();
    report.val_pairs = val_pairs.size();
    report.bicubic_val_psnr = report.bicubic_val_ssim = std::nan("");
    if (!val_pairs.empty()) {
      const MetricReport b = evaluate_bicubic(val_pairs);
      report.bicubic_val_psnr = b.mean_psnr();
      report.bicubic_val_ssim = b.mean_ssim();
    }
  }

  double best_psnr = -std::numeric_limits<double>::infinity();
  for (const auto& e : report.epochs)
    if (e.val_psnr > best_psnr) best_psnr = e.val_psnr;

  const auto params = model.parameters();
  const std::uint64_t epoch_root = derive_seed(config.seed, hash_string("epoch"));
  for (int epoch = static_cast<int>(report.epochs.size()); epoch < config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    EpochRecord rec;
    rec.epoch = epoch;
    rec.learning_rate = config.lr_at(epoch);

    Rng rng(derive_seed(epoch_root, static_cast<std::uint64_t>(epoch)));
    std::vector<std::size_t> order(train_pairs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
    std::vector<PatchPair> crops;
    crops.reserve(order.size());
    for (std::size_t i : order) crops.push_back(random_crop_aug(train_pairs[i], config.crop, rng));

    double loss_sum = 0.0;
    const auto batch = static_cast<std::size_t>(config.batch_size);
    for (std::size_t start = 0, b = 0; start < crops.size(); start += batch, ++b) {
      const std::size_t end = std::min(crops.size(), start + batch);
      std::vector<const Tensorf*> lr_items, hr_items;
      for (std::size_t i = start; i < end; ++i) {
        lr_items.push_back(&crops[i].lr);
        hr_items.push_back(&crops[i].hr);
      }
      const Tensorf lr = stack(lr_items);
      const Tensorf hr = stack(hr_items);
      model.zero_grads();
      const Tensorf pred = model.forward_train(lr);
      Tensorf grad;
      const double loss = mixed_loss(pred, hr, config.loss_alpha, &grad);
      if (!std::isfinite(loss) || !all_finite(grad)) {
        DivergenceSnapshot snap;
        snap.epoch = epoch;
        snap.batch = static_cast<int>(b);
        for (std::size_t i = start; i < end; ++i) snap.pair_ids.push_back(train_pairs[order[i]].id);
        snap.loss = loss;
        snap.learning_rate = rec.learning_rate;
        try {
          snap.l1 = l1_loss(pred, hr);
          snap.ms_ssim = ms_ssim(pred, hr);
        } catch (const std::exception&) {
          snap.l1 = snap.ms_ssim = std::nan("");
        }
        if (!config.out_dir.empty()) write_file_atomic(config.out_dir / "divergence.json", snap.to_json().dump(2) + "\n");
        throw TrainingDiverged(std::move(snap));
      }
      model.backward(grad);
      adam_step(params, state, rec.learning_rate, config.adam);
      rec.batch_losses.push_back(loss);
      loss_sum += loss * static_cast<double>(end - start);
    }
    rec.train_loss = loss_sum / static_cast<double>(crops.size());

    rec.val_psnr = rec.val_ssim = std::nan("");
    if (!val_pairs.empty()) {
      const EnsembleMember member{as_patch_fn(model), model.scale(), 1.0};
      const MetricReport m = evaluate(std::span(&member, 1), val_pairs, config.validation);
      if (!m.failures.empty()) throw InvariantViolation("train: validation failed on " + m.failures.front().id + ": " + m.failures.front().error);
      rec.val_psnr = m.mean_psnr();
      rec.val_ssim = m.mean_ssim();
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const bool last = epoch + 1 == config.epochs;
    if (!val_pairs.empty() ? rec.val_psnr > best_psnr : last) {
      best_psnr = rec.val_psnr;
      report.best_epoch = epoch;
      if (!config.out_dir.empty()) {
        save_weights(model, config.out_dir / "best.srfw");
        report.best_checkpoint = (config.out_dir / "best.srfw").string();
      }
    }
    report.epochs.push_back(std::move(rec));
    if (!config.out_dir.empty() &&
        (last || (config.checkpoint_interval > 0 && (epoch + 1) % config.checkpoint_interval == 0))) {
      write_checkpoint(model, state, report, config.out_dir);
    }
  }
  if (!config.out_dir.empty()) {
    save_weights(model, config.out_dir / "final.srfw");
    write_file_atomic(config.out_dir / "report.json", report.to_json().dump(2) + "\n");
  }
  return report;
}

TrainReport train(Modelf& model, const DatasetManifest& manifest, const TrainConfig& config) {
  NccFilterResult gate = ncc_filter(manifest.load_pairs("train"), config.ncc_threshold);
  if (gate.kept.empty()) throw InvalidArgument("train: no training pairs pass the NCC gate");
  const std::size_t rejected = gate.rejected.size();
  TrainReport report = train(model, gate.kept, manifest.load_pairs("val"), config);
  report.rejected_pairs = rejected;
  return report;
}

Evaluator mini_train_evaluator(const SearchSpace& space, std::vector<ImagePair> train_pairs,
                               std::vector<ImagePair> val_pairs, MiniTrainOptions options) {
  if (val_pairs.empty()) throw InvalidArgument("mini_train_evaluator: validation pairs required");
  options.train.out_dir.clear();
  options.train.resume = false;
  return [&space, train_pairs = std::move(train_pairs), val_pairs = std::move(val_pairs),
          options](const SearchPoint& p) {
    Modelf model(space.config_at(p), derive_seed(options.init_seed, space.index(p)));
    const TrainReport r = train(model, train_pairs, val_pairs, options.train);
    if (r.epochs.empty()) throw InvalidArgument("mini_train_evaluator: zero epochs");
    return r.epochs.back().val_psnr;
  };
}

}  // namespace srforge
