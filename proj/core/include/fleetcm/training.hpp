#pragma once

// Chronological splitting, minibatch Adam training with early stopping,
// pooled fleet pre-training and per-unit fine-tuning.

#include <cstdint>
#include <iosfwd>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "fleetcm/data.hpp"
#include "fleetcm/model.hpp"

namespace fleetcm::training {

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 100;
  std::size_t early_stop_patience = 10;
  std::uint64_t seed = 0;
  // From-scratch runs start the heads at the training target's mean and
  // stddev (mean-head bias, softplus-inverse of the stddev-head bias).
  bool warm_start_heads = true;
  // From-scratch runs set the architecture's fixed output offset/scale to the
  // training target's mean and stddev. Fine-tuning keeps the pretrained ones.
  bool scale_targets = true;

  void validate(std::size_t train_rows) const;

  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
  static TrainConfig from_json(const nlohmann::json& j, TrainConfig defaults);
};

// Learning rates for fine-tuning: 1e-3 for A1, 1e-4 for A2; 50 epochs.
TrainConfig finetune_defaults(const std::string& preset_name);
// 100 epochs for single-unit training, 500 for pooled pre-training.
TrainConfig pmlp_defaults();
TrainConfig pretrain_defaults();

struct SplitSpec {
  double test_fraction = 0.2;
  double validation_fraction_of_train = 0.1;

  void validate() const;
};

struct Splits {
  data::TurbineDataset train;
  data::TurbineDataset validation;
  data::TurbineDataset test;
};

// Holds out the chronologically last `test_fraction` of rows. Returns
// (earlier rows, test rows). Throws ConfigError if either part is empty.
std::pair<data::TurbineDataset, data::TurbineDataset> split_test(const data::TurbineDataset& ds,
                                                                 double test_fraction);

// Test = latest rows; the rest is shuffled with `seed` and a validation
// fraction carved out. Train and validation rows keep chronological order.
Splits split_chronological(const data::TurbineDataset& ds, const SplitSpec& spec,
                           std::uint64_t seed);

struct TrainHistory {
  // Index 0 holds the losses of the initial parameters; index e of epoch e.
  // Values are mean negative log-likelihood per row.
  std::vector<double> train_loss;
  std::vector<double> validation_loss;
  std::size_t best_epoch = 0;
  bool stopped_early = false;

  void write_csv(std::ostream& out) const;
  nlohmann::json to_json() const;
};

struct TrainResult {
  model::ArchitectureSpec arch;  // as trained, including the output affine
  nn::ParameterSet params;
  TrainHistory history;
};

// Mean negative log-likelihood per row of a normalized dataset.
double mean_nll(const nn::ParameterSet& params, const model::ArchitectureSpec& arch,
                const data::TurbineDataset& ds);

// Core loop shared by every entry point: minibatch Adam from `initial`,
// per-epoch reshuffle, validation after every epoch, best-epoch restore.
TrainResult fit(nn::ParameterSet initial, const model::ArchitectureSpec& arch,
                const data::TurbineDataset& train, const data::TurbineDataset& validation,
                const TrainConfig& config);

TrainResult train_pmlp(const model::ArchitectureSpec& arch, const data::TurbineDataset& train,
                       const data::TurbineDataset& validation, const TrainConfig& config);

struct UnitData {
  data::TurbineDataset train;
  data::TurbineDataset validation;
};

// Trains one network on the row-wise union of every unit's data.
TrainResult pretrain_farm(const model::ArchitectureSpec& arch, const std::vector<UnitData>& fleet,
                          const TrainConfig& config);

// Continues training from `pretrained` on a single unit; all layers update.
TrainResult finetune(const nn::ParameterSet& pretrained, const model::ArchitectureSpec& arch,
                     const data::TurbineDataset& unit_train,
                     const data::TurbineDataset& unit_validation, const TrainConfig& config);

}  // namespace fleetcm::training
