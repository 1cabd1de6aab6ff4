#include "fleetcm/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

#include "fleetcm/csv.hpp"
#include "fleetcm/errors.hpp"

namespace fleetcm::training {

namespace {

using data::TurbineDataset;
using nn::Index;

std::uint64_t epoch_seed(std::uint64_t seed, std::uint64_t epoch) {
  std::uint64_t z = seed ^ (0x9e3779b97f4a7c15ULL * (epoch + 0x51ULL));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void check_width(const TurbineDataset& ds, const model::ArchitectureSpec& arch,
                 const char* which) {
  if (ds.width() != arch.d0) {
    throw ConfigError("training", std::string(which) + " data has " +
                                      std::to_string(ds.width()) + " features but the "
                                      "architecture expects " + std::to_string(arch.d0));
  }
}

std::pair<double, double> target_moments(const TurbineDataset& train) {
  const auto& y = train.target_power;
  const double mean = y.mean();
  return {mean, std::sqrt((y.array() - mean).square().mean())};
}

// Works in the network's own units, i.e. after the output affine is undone.
void warm_start(nn::ParameterSet& params, const model::ArchitectureSpec& arch,
                const TurbineDataset& train) {
  const auto [mean, sd] = target_moments(train);
  const double scale = arch.target_scale;
  params.mu.back().bias[0] = (mean - arch.target_offset) / scale;
  // A (near) constant target starts just above the stddev floor.
  const double start_sd = std::max(sd, 2.0 * arch.delta);
  params.sigma.back().bias[0] = nn::softplus_inverse(start_sd / scale, arch.delta / scale);
}

}  // namespace

void TrainConfig::validate(std::size_t train_rows) const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("training", "learning rate must be positive");
  }
  if (batch_size == 0) throw ConfigError("training", "batch size must be positive");
  if (early_stop_patience == 0) throw ConfigError("training", "patience must be positive");
  if (train_rows == 0) throw ConfigError("training", "training set is empty");
  if (batch_size > train_rows) {
    throw ConfigError("training", "batch size " + std::to_string(batch_size) +
                                      " exceeds training-set size " + std::to_string(train_rows));
  }
}

nlohmann::json TrainConfig::to_json() const {
  return {{"learning_rate", learning_rate},
          {"batch_size", batch_size},
          {"max_epochs", max_epochs},
          {"early_stop_patience", early_stop_patience},
          {"seed", seed},
          {"warm_start_heads", warm_start_heads},
          {"scale_targets", scale_targets}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) { return from_json(j, TrainConfig{}); }

TrainConfig TrainConfig::from_json(const nlohmann::json& j, TrainConfig d) {
  try {
    d.learning_rate = j.value("learning_rate", d.learning_rate);
    d.batch_size = j.value("batch_size", d.batch_size);
    d.max_epochs = j.value("max_epochs", d.max_epochs);
    d.early_stop_patience = j.value("early_stop_patience", d.early_stop_patience);
    d.seed = j.value("seed", d.seed);
    d.warm_start_heads = j.value("warm_start_heads", d.warm_start_heads);
    d.scale_targets = j.value("scale_targets", d.scale_targets);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("training", std::string("bad training config: ") + e.what());
  }
  return d;
}

TrainConfig pmlp_defaults() { return TrainConfig{}; }

TrainConfig pretrain_defaults() {
  TrainConfig c;
  c.max_epochs = 500;
  return c;
}

TrainConfig finetune_defaults(const std::string& preset_name) {
  TrainConfig c;
  c.max_epochs = 50;
  c.learning_rate = (preset_name == "A2" || preset_name == "a2") ? 1e-4 : 1e-3;
  return c;
}

void SplitSpec::validate() const {
  if (!(test_fraction > 0.0 && test_fraction < 1.0) ||
      !(validation_fraction_of_train > 0.0 && validation_fraction_of_train < 1.0)) {
    throw ConfigError("training", "split fractions must lie strictly between 0 and 1");
  }
}

std::pair<TurbineDataset, TurbineDataset> split_test(const TurbineDataset& ds,
                                                     double test_fraction) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ConfigError("training", "test fraction must lie strictly between 0 and 1");
  }
  const std::size_t n = ds.size();
  const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * test_fraction));
  if (n_test == 0 || n_test >= n) {
    throw ConfigError("training", "too few rows (" + std::to_string(n) +
                                      ") for a non-empty chronological test split");
  }
  // Sort by time so "latest" is well defined even for unsorted input.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return ds.timestamps[a] < ds.timestamps[b];
  });
  const std::vector<std::size_t> head(order.begin(), order.end() - static_cast<std::ptrdiff_t>(n_test));
  const std::vector<std::size_t> tail(order.end() - static_cast<std::ptrdiff_t>(n_test), order.end());
  return {ds.select(head), ds.select(tail)};
}

Splits split_chronological(const TurbineDataset& ds, const SplitSpec& spec, std::uint64_t seed) {
  spec.validate();
  auto [rest, test] = split_test(ds, spec.test_fraction);
  const std::size_t m = rest.size();
  const auto n_val = static_cast<std::size_t>(
      std::llround(static_cast<double>(m) * spec.validation_fraction_of_train));
  if (n_val == 0 || n_val >= m) {
    throw ConfigError("training", "too few rows (" + std::to_string(m) +
                                      ") for non-empty train and validation splits");
  }
  std::vector<std::size_t> idx(m);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<std::size_t> val(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train(idx.begin() + static_cast<std::ptrdiff_t>(n_val), idx.end());
  std::sort(val.begin(), val.end());
  std::sort(train.begin(), train.end());
  return {rest.select(train), rest.select(val), std::move(test)};
}

void TrainHistory::write_csv(std::ostream& out) const {
  out << "epoch,train_loss,val_loss\n";
  for (std::size_t e = 0; e < train_loss.size(); ++e) {
    out << e << ',' << csv::format_number(train_loss[e]) << ','
        << csv::format_number(validation_loss[e]) << '\n';
  }
}

nlohmann::json TrainHistory::to_json() const {
  return {{"train_loss", train_loss},
          {"validation_loss", validation_loss},
          {"best_epoch", best_epoch},
          {"stopped_early", stopped_early}};
}

double mean_nll(const nn::ParameterSet& params, const model::ArchitectureSpec& arch,
                const TurbineDataset& ds) {
  if (ds.empty()) throw DataError("training", "cannot evaluate the loss of an empty dataset");
  return model::batch_nll(params, arch, ds.features, ds.target_power) /
         static_cast<double>(ds.size());
}

TrainResult fit(nn::ParameterSet initial, const model::ArchitectureSpec& arch,
                const TurbineDataset& train, const TurbineDataset& validation,
                const TrainConfig& config) {
  model::check_matches(initial, arch);
  check_width(train, arch, "training");
  check_width(validation, arch, "validation");
  if (validation.empty()) throw ConfigError("training", "validation set is empty");
  config.validate(train.size());

  TrainResult result;
  result.arch = arch;
  result.params = std::move(initial);
  nn::ParameterSet current = result.params;
  TrainHistory& h = result.history;
  h.train_loss.push_back(mean_nll(current, arch, train));
  h.validation_loss.push_back(mean_nll(current, arch, validation));
  double best = h.validation_loss.front();
  std::size_t since_best = 0;

  nn::AdamState adam = nn::AdamState::for_size(current.flat_size(), config.learning_rate);
  const std::size_t n = train.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  nn::Matrix xb;
  nn::Vector yb;
  // Gradients are taken on the unit scale; the kW loss differs by log(scale).
  const double offset = arch.target_offset;
  const double scale = arch.target_scale;
  const double inner_delta = arch.delta / scale;
  const double log_scale = std::log(scale);

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::mt19937_64 rng(epoch_seed(config.seed, epoch));
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    std::size_t batch_no = 0;
    for (std::size_t start = 0; start < n; start += config.batch_size, ++batch_no) {
      const std::size_t len = std::min(config.batch_size, n - start);
      xb.resize(arch.d0, static_cast<Index>(len));
      yb.resize(static_cast<Index>(len));
      for (std::size_t i = 0; i < len; ++i) {
        const auto row = static_cast<Index>(order[start + i]);
        xb.col(static_cast<Index>(i)) = train.features.row(row).transpose();
        yb[static_cast<Index>(i)] = (train.target_power[row] - offset) / scale;
      }
      nn::Gradient g;
      try {
        g = nn::backward(current, inner_delta, xb, yb);
        g.flat /= static_cast<double>(len);
        nn::adam_step(current, g.flat, adam);
      } catch (const NumericError& e) {
        throw NumericError("training", "non-finite loss at epoch " + std::to_string(epoch) +
                                           ", batch " + std::to_string(batch_no) + " (" +
                                           e.what() + ")");
      }
      epoch_loss += g.loss + static_cast<double>(len) * log_scale;
    }
    h.train_loss.push_back(epoch_loss / static_cast<double>(n));
    const double val = mean_nll(current, arch, validation);
    if (!std::isfinite(val)) {
      throw NumericError("training", "non-finite validation loss at epoch " +
                                         std::to_string(epoch));
    }
    h.validation_loss.push_back(val);
    if (val < best) {
      best = val;
      h.best_epoch = epoch;
      result.params = current;
      since_best = 0;
    } else if (++since_best >= config.early_stop_patience) {
      h.stopped_early = epoch < config.max_epochs;
      break;
    }
  }
  return result;
}

TrainResult train_pmlp(const model::ArchitectureSpec& spec, const TurbineDataset& train,
                       const TurbineDataset& validation, const TrainConfig& config) {
  model::ArchitectureSpec arch = spec;
  if (config.scale_targets && !train.empty()) {
    const auto [mean, sd] = target_moments(train);
    arch.target_offset = mean;
    arch.target_scale = sd > 0.0 ? sd : 1.0;
  }
  nn::ParameterSet init = model::build(arch, config.seed);
  if (config.warm_start_heads && !train.empty()) warm_start(init, arch, train);
  return fit(std::move(init), arch, train, validation, config);
}

TrainResult pretrain_farm(const model::ArchitectureSpec& arch, const std::vector<UnitData>& fleet,
                          const TrainConfig& config) {
  if (fleet.empty()) throw ConfigError("training", "fleet has no units");
  std::vector<TurbineDataset> trains;
  std::vector<TurbineDataset> vals;
  for (const auto& u : fleet) {
    if (u.train.feature_names != fleet.front().train.feature_names ||
        u.validation.feature_names != fleet.front().train.feature_names) {
      throw ConfigError("training", "feature schema of unit " + u.train.unit_id +
                                        " differs from unit " + fleet.front().train.unit_id);
    }
    trains.push_back(u.train);
    vals.push_back(u.validation);
  }
  return train_pmlp(arch, data::concatenate(trains), data::concatenate(vals), config);
}

TrainResult finetune(const nn::ParameterSet& pretrained, const model::ArchitectureSpec& arch,
                     const TurbineDataset& unit_train, const TurbineDataset& unit_validation,
                     const TrainConfig& config) {
  model::check_matches(pretrained, arch);
  return fit(pretrained, arch, unit_train, unit_validation, config);
}

}  // namespace fleetcm::training
