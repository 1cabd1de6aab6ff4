#pragma once

#include <optional>
#include <string>
#include <vector>

#include "artifacts.hpp"

namespace fleetcm::cli {

struct SimulateFlags {
  std::optional<std::size_t> units;
  std::optional<std::size_t> rows;
  std::optional<bool> windows;
  std::optional<std::size_t> healthy;
  std::optional<std::size_t> faulty;
  std::optional<double> shift_sigmas;
};

struct IngestFlags {
  std::optional<std::string> input;
  std::optional<std::string> schema;
  std::optional<std::string> unit;
  std::optional<std::string> output;
};

struct FilterFlags {
  std::optional<std::string> input;
  std::optional<std::string> events;
  std::optional<std::string> schema;
  std::optional<std::string> unit;
  std::optional<double> pre_outage_days;
  std::optional<std::string> output;
};

struct TrainFlags {
  std::vector<std::string> inputs;
  std::optional<std::string> bundle;  // finetune only
  std::optional<std::string> arch;
  std::optional<std::string> schema;
  std::optional<std::string> unit;
  std::optional<std::size_t> epochs;
  std::optional<double> lr;
  std::optional<std::size_t> batch_size;
  std::optional<std::size_t> patience;
  std::optional<double> test_fraction;
  std::optional<double> val_fraction;
};

struct EvaluateFlags {
  std::optional<std::string> bundle;
  std::optional<std::string> input;
  std::optional<std::string> schema;
  std::optional<std::string> levels;
  std::optional<std::string> coverage;
  std::optional<double> rated_power;
};

struct MonitorFlags {
  std::optional<std::string> bundle;
  std::optional<std::string> input;
  std::optional<std::string> schema;
  std::optional<std::string> unit;
  std::optional<double> allowance;
  std::optional<double> decision_interval;
  std::optional<std::size_t> window_length;
  std::optional<std::string> mode;
  std::optional<bool> auto_ack;
  std::optional<bool> traces;
};

struct SweepFlags {
  std::optional<std::string> bundle;
  std::optional<std::string> windows;
  std::optional<std::string> schema;
  std::optional<std::string> grid;
  std::optional<double> allowance;
};

void cmd_simulate(Run& run, const SimulateFlags& flags);
void cmd_ingest(Run& run, const IngestFlags& flags);
void cmd_filter(Run& run, const FilterFlags& flags);
void cmd_train(Run& run, const TrainFlags& flags);
void cmd_pretrain(Run& run, const TrainFlags& flags);
void cmd_finetune(Run& run, const TrainFlags& flags);
void cmd_evaluate(Run& run, const EvaluateFlags& flags);
void cmd_monitor(Run& run, const MonitorFlags& flags);
void cmd_sweep(Run& run, const SweepFlags& flags);

}  // namespace fleetcm::cli
