#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "srforge/data.hpp"
#include "srforge/ensemble.hpp"
#include "srforge/metrics.hpp"
#include "srforge/models.hpp"
#include "srforge/nas.hpp"

namespace srforge {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First and second moments per parameter, kept in double.
struct AdamState {
  std::int64_t step = 0;
  std::vector<Eigen::VectorXd> m;
  std::vector<Eigen::VectorXd> v;
};

/// One bias-corrected Adam update using each parameter's accumulated grad.
/// An empty state is initialised to zeros on first use.
void adam_step(const std::vector<Parameter<float>*>& params, AdamState& state, double lr, const AdamConfig& config);

void save_adam_state(const AdamState& state, const std::filesystem::path& path);
AdamState load_adam_state(const std::filesystem::path& path);

struct TrainConfig {
  int epochs = 30;
  int batch_size = 16;
  double learning_rate = 1e-4;
  double lr_decay_factor = 0.5;
  int lr_decay_interval = 30;  // epochs between decays
  AdamConfig adam;
  int crop = 120;  // LR pixels; HR crops are crop * scale
  double loss_alpha = kDefaultLossAlpha;
  std::uint64_t seed = 0;
  int checkpoint_interval = 1;  // epochs; 0 writes only the final and best weights
  double ncc_threshold = kDefaultNccThreshold;
  EnsembleOptions validation{false, 120, 60};  // validation inference path
  std::filesystem::path out_dir;  // empty: nothing is written
  bool resume = false;            // continue from out_dir/checkpoint.*

  void validate() const;
  /// Learning rate for a zero-based epoch.
  double lr_at(int epoch) const;
};

struct EpochRecord {
  int epoch = 0;
  double learning_rate = 0.0;
  double train_loss = 0.0;
  std::vector<double> batch_losses;
  double val_psnr = 0.0;  // NaN without validation pairs
  double val_ssim = 0.0;
  double seconds = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;  // max validation PSNR (last epoch without validation)
  std::string best_checkpoint;
  std::size_t train_pairs = 0;
  std::size_t val_pairs = 0;
  std::size_t rejected_pairs = 0;
  double bicubic_val_psnr = 0.0;
  double bicubic_val_ssim = 0.0;

  /// Wall-clock fields are omitted when include_timing is false, which makes
  /// two runs with one seed compare equal.
  nlohmann::json to_json(bool include_timing = true) const;
  static TrainReport from_json(const nlohmann::json& j);
};

/// Details of a non-finite loss, carried by TrainingDiverged.
struct DivergenceSnapshot {
  int epoch = 0;
  int batch = 0;
  std::vector<std::string> pair_ids;
  double l1 = 0.0;
  double ms_ssim = 0.0;
  double loss = 0.0;
  double learning_rate = 0.0;

  nlohmann::json to_json() const;
};

class TrainingDiverged : public std::runtime_error {
 public:
  explicit TrainingDiverged(DivergenceSnapshot snapshot);
  const DivergenceSnapshot& snapshot() const noexcept { return snapshot_; }

 private:
  DivergenceSnapshot snapshot_;
};

/// Mixed-loss training with one augmented random crop per training pair per
/// epoch, shuffled into batches, and validation of full images after every
/// epoch. The epoch's shuffle and crops come from derive_seed(seed, epoch),
/// so a resumed run repeats the uninterrupted trajectory exactly.
TrainReport train(Modelf& model, const std::vector<ImagePair>& train_pairs, const std::vector<ImagePair>& val_pairs,
                  const TrainConfig& config);

/// Loads the manifest's train/val splits and drops train pairs failing the
/// NCC gate before training.
TrainReport train(Modelf& model, const DatasetManifest& manifest, const TrainConfig& config);

/// Per-pair PSNR/SSIM of the ensemble output against HR, in input order.
MetricReport evaluate(std::span<const EnsembleMember> members, const std::vector<ImagePair>& pairs,
                      const EnsembleOptions& options);

/// Same over a manifest split; unreadable pairs become failure entries.
MetricReport evaluate(std::span<const EnsembleMember> members, const DatasetManifest& manifest,
                      const std::string& split, const EnsembleOptions& options);

/// Whole-image bicubic upscaling, as a reference restorer.
PatchFn bicubic_patch_fn(int scale);
MetricReport evaluate_bicubic(const std::vector<ImagePair>& pairs);

/// Scores a search point by training it briefly and returning validation PSNR.
struct MiniTrainOptions {
  TrainConfig train;
  std::uint64_t init_seed = 0;
};
Evaluator mini_train_evaluator(const SearchSpace& space, std::vector<ImagePair> train_pairs,
                               std::vector<ImagePair> val_pairs, MiniTrainOptions options);

}  // namespace srforge
