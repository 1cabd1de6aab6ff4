#include <fstream>

#include "commands.hpp"
#include "common.hpp"
#include "fleetcm/bundle.hpp"
#include "fleetcm/training.hpp"

namespace fleetcm::cli {

namespace {

struct Resolved {
  std::string name;  // preset name or "custom"
  model::ArchitectureSpec arch;
};

Resolved resolve_arch(const std::string& value, model::Index d0) {
  if (auto p = model::preset(value, d0)) {
    return {value == "a2" || value == "A2" ? "A2" : "A1", *p};
  }
  std::ifstream in(value);
  if (!in) throw ConfigError("cli", "--arch must be A1, A2 or an architecture JSON file");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("cli", value + ": " + e.what());
  }
  model::ArchitectureSpec arch = model::arch_from_json(j);
  if (arch.d0 != d0) {
    throw ConfigError("cli", "architecture expects " + std::to_string(arch.d0) +
                                 " inputs but the data has " + std::to_string(d0));
  }
  return {"custom", arch};
}

training::TrainConfig train_settings(Run& run, const TrainFlags& f, training::TrainConfig d) {
  training::TrainConfig c = d;
  c.seed = run.seed(d.seed);
  c.max_epochs = run.setting<std::size_t>("epochs", f.epochs, d.max_epochs);
  c.learning_rate = run.setting<double>("learning_rate", f.lr, d.learning_rate);
  c.batch_size = run.setting<std::size_t>("batch_size", f.batch_size, d.batch_size);
  c.early_stop_patience = run.setting<std::size_t>("patience", f.patience, d.early_stop_patience);
  c.warm_start_heads =
      run.setting<bool>("warm_start_heads", std::nullopt, d.warm_start_heads);
  c.scale_targets = run.setting<bool>("scale_targets", std::nullopt, d.scale_targets);
  return c;
}

training::SplitSpec split_settings(Run& run, const TrainFlags& f) {
  training::SplitSpec s;
  s.test_fraction = run.setting<double>("test_fraction", f.test_fraction, s.test_fraction);
  s.validation_fraction_of_train =
      run.setting<double>("val_fraction", f.val_fraction, s.validation_fraction_of_train);
  s.validate();
  return s;
}

std::vector<std::string> input_list(Run& run, const TrainFlags& f, bool many) {
  std::vector<std::string> inputs = f.inputs;
  if (inputs.empty()) {
    if (many && run.config().contains("inputs")) {
      inputs = run.setting<std::vector<std::string>>("inputs", std::nullopt, {});
    } else if (run.config().contains("input")) {
      inputs = {run.setting<std::string>("input", std::nullopt, "")};
    }
  } else {
    run.setting<std::vector<std::string>>("inputs", inputs, {});
  }
  if (inputs.empty()) throw ConfigError("cli", "missing --input");
  if (!many && inputs.size() != 1) throw ConfigError("cli", "expected exactly one --input");
  return inputs;
}

std::string dataset_text(const data::TurbineDataset& ds) {
  return render([&](std::ostream& o) { data::write_dataset_csv(o, ds); });
}

nlohmann::json history_summary(const training::TrainResult& r) {
  const auto& h = r.history;
  return {{"epochs_run", h.train_loss.size() - 1},
          {"best_epoch", h.best_epoch},
          {"stopped_early", h.stopped_early},
          {"initial_validation_loss", h.validation_loss.front()},
          {"best_validation_loss", h.validation_loss[h.best_epoch]}};
}

void write_training_outputs(Run& run, const ModelBundle& bundle,
                            const training::TrainResult& result) {
  run.write("bundle.json", bundle.to_json().dump(1) + "\n");
  run.write("history.csv", render([&](std::ostream& o) { result.history.write_csv(o); }));
  run.summary("training", history_summary(result));
}

}  // namespace

void cmd_train(Run& run, const TrainFlags& flags) {
  const auto inputs = input_list(run, flags, false);
  const data::ScadaSchema schema = load_schema(run, flags.schema);
  const std::string unit = run.setting<std::string>("unit", flags.unit, "");
  const data::TurbineDataset ds = read_input(run, inputs.front(), schema, unit);

  const training::TrainConfig cfg = train_settings(run, flags, training::pmlp_defaults());
  const training::Splits splits = training::split_chronological(ds, split_settings(run, flags), cfg.seed);
  const data::NormalizationStats norm = data::fit_normalization(splits.train);
  const Resolved arch = resolve_arch(run.setting<std::string>("arch", flags.arch, "A1"),
                                     norm.output_width());

  const training::TrainResult result =
      training::train_pmlp(arch.arch, data::apply_normalization(splits.train, norm),
                           data::apply_normalization(splits.validation, norm), cfg);

  ModelBundle bundle{arch.name, result.arch, result.params, norm, {}};
  bundle.training = {{"kind", "pmlp"},
                     {"unit", ds.unit_id},
                     {"seed", cfg.seed},
                     {"config", cfg.to_json()},
                     {"rows", {{"train", splits.train.size()},
                               {"validation", splits.validation.size()},
                               {"test", splits.test.size()}}},
                     {"history", result.history.to_json()}};
  write_training_outputs(run, bundle, result);
  run.write("test_" + ds.unit_id + ".csv", dataset_text(splits.test));
}

void cmd_pretrain(Run& run, const TrainFlags& flags) {
  const auto inputs = input_list(run, flags, true);
  const data::ScadaSchema schema = load_schema(run, flags.schema);
  const training::TrainConfig cfg = train_settings(run, flags, training::pretrain_defaults());
  const training::SplitSpec spec = split_settings(run, flags);

  std::vector<training::Splits> splits;
  std::vector<data::TurbineDataset> pooled_train;
  for (const auto& path : inputs) {
    splits.push_back(training::split_chronological(read_input(run, path, schema), spec, cfg.seed));
    pooled_train.push_back(splits.back().train);
  }
  for (std::size_t i = 1; i < splits.size(); ++i) {
    if (splits[i].train.unit_id == splits[0].train.unit_id) {
      throw ConfigError("cli", "two inputs share unit id " + splits[i].train.unit_id);
    }
  }
  const data::NormalizationStats norm = data::fit_normalization(data::concatenate(pooled_train));
  const Resolved arch = resolve_arch(run.setting<std::string>("arch", flags.arch, "A1"),
                                     norm.output_width());

  std::vector<training::UnitData> fleet;
  nlohmann::json rows = nlohmann::json::object();
  for (const auto& s : splits) {
    fleet.push_back({data::apply_normalization(s.train, norm),
                     data::apply_normalization(s.validation, norm)});
    rows[s.train.unit_id] = {{"train", s.train.size()},
                             {"validation", s.validation.size()},
                             {"test", s.test.size()}};
  }
  const training::TrainResult result = training::pretrain_farm(arch.arch, fleet, cfg);

  ModelBundle bundle{arch.name, result.arch, result.params, norm, {}};
  bundle.training = {{"kind", "pretrain"},
                     {"units", inputs.size()},
                     {"seed", cfg.seed},
                     {"config", cfg.to_json()},
                     {"rows", rows},
                     {"history", result.history.to_json()}};
  write_training_outputs(run, bundle, result);
  for (const auto& s : splits) run.write("test_" + s.test.unit_id + ".csv", dataset_text(s.test));
}

void cmd_finetune(Run& run, const TrainFlags& flags) {
  const std::string bundle_path = required_path(run, "bundle", flags.bundle);
  run.input(bundle_path);
  const ModelBundle pretrained = load_bundle(bundle_path);
  if (flags.arch || run.config().contains("arch")) {
    const Resolved requested =
        resolve_arch(run.setting<std::string>("arch", flags.arch, ""), pretrained.arch.d0);
    if (!requested.arch.same_structure(pretrained.arch)) {
      throw ConfigError("cli", "arch mismatch: the bundle holds a " + pretrained.preset +
                                   " network but --arch asks for " + requested.name);
    }
  }
  const auto inputs = input_list(run, flags, false);
  const data::ScadaSchema schema = load_schema(run, flags.schema);
  const std::string unit = run.setting<std::string>("unit", flags.unit, "");
  const data::TurbineDataset ds = read_input(run, inputs.front(), schema, unit);

  const training::TrainConfig cfg =
      train_settings(run, flags, training::finetune_defaults(pretrained.preset));
  const training::Splits splits =
      training::split_chronological(ds, split_settings(run, flags), cfg.seed);
  const training::TrainResult result = training::finetune(
      pretrained.params, pretrained.arch,
      data::apply_normalization(splits.train, pretrained.normalization),
      data::apply_normalization(splits.validation, pretrained.normalization), cfg);

  ModelBundle bundle{pretrained.preset, result.arch, result.params, pretrained.normalization, {}};
  bundle.training = {{"kind", "finetune"},
                     {"unit", ds.unit_id},
                     {"pretrained_bundle", bundle_path},
                     {"pretrained_training", pretrained.training},
                     {"seed", cfg.seed},
                     {"config", cfg.to_json()},
                     {"rows", {{"train", splits.train.size()},
                               {"validation", splits.validation.size()},
                               {"test", splits.test.size()}}},
                     {"history", result.history.to_json()}};
  write_training_outputs(run, bundle, result);
  run.write("test_" + ds.unit_id + ".csv", dataset_text(splits.test));
}

}  // namespace fleetcm::cli
