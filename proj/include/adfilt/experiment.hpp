#pragma once

#include <filesystem>
#include <utility>

#include "adfilt/attacks.hpp"
#include "adfilt/config.hpp"
#include "adfilt/eeg.hpp"
#include "adfilt/report.hpp"
#include "adfilt/victims.hpp"

namespace adfilt::runner {

enum class Scenario { Within, Cross };

std::string to_string(Scenario s);
Scenario scenario_from_string(const std::string& s);

struct ExperimentConfig {
  // data: a dataset file, or the synthetic spec when the path is empty
  std::string dataset_path;
  eeg::SyntheticSpec synth;
  bool zscore_input = true;

  models::ModelSpec model;
  models::TrainConfig train;

  Scenario scenario = Scenario::Within;
  int repeats = 10;
  double train_fraction = 0.8;
  double validation_fraction = 0.25;
  int sweep_max_folds = 1;  // folds evaluated per repeat in sweep runs

  attacks::EvasionConfig evasion;
  attacks::BackdoorConfig backdoor;

  std::vector<double> alpha_grid = {0.1, 1, 10, 50, 100, 200, 500, 1000, 10000};
  std::vector<double> poison_grid = {0.01, 0.02, 0.03, 0.04, 0.05,
                                     0.06, 0.07, 0.08, 0.09, 0.10};
  std::vector<models::ModelSpec> transfer_models;

  std::filesystem::path out_dir = "out";
  std::uint64_t master_seed = 0;
  int workers = 1;
  std::string config_hash;
};

/// Builds an ExperimentConfig from a parsed key=value Config (defaults for
/// everything that is absent) and records the config hash.
ExperimentConfig experiment_from_config(const Config& cfg);

/// Synthetic or ETRC-backed dataset, z-scored when configured.
eeg::EegDataset load_experiment_dataset(const ExperimentConfig& cfg);

// ---- splits ---------------------------------------------------------------

/// Stratified per-class split of one subject's trials. Fractions apply per
/// class with rounding; both sides keep at least one trial per class.
std::pair<eeg::EegDataset, eeg::EegDataset> split_within(const eeg::EegDataset& ds, int subject,
                                                         double train_fraction,
                                                         std::uint64_t seed);

/// Leave-one-subject-out: test = the held-out subject, train = the rest.
std::pair<eeg::EegDataset, eeg::EegDataset> split_cross(const eeg::EegDataset& ds,
                                                        int held_out_subject);

/// Stratified carve of a validation set (used only by the evasion binary
/// search).
std::pair<eeg::EegDataset, eeg::EegDataset> carve_validation(const eeg::EegDataset& train,
                                                             double fraction, std::uint64_t seed);

// ---- experiment runners -----------------------------------------------------
// All runners derive the repeat seed as master_seed + repeat index, evaluate
// every condition of a repeat on the same trained model, and keep going when
// one repeat fails (the error lands in report.errors).

report::AttackReport run_evasion(const ExperimentConfig& cfg);
report::AttackReport run_backdoor(const ExperimentConfig& cfg);
report::AttackReport run_sweep_alpha(const ExperimentConfig& cfg);
report::AttackReport run_sweep_poison(const ExperimentConfig& cfg);
report::AttackReport run_transfer(const ExperimentConfig& cfg);

}  // namespace adfilt::runner
