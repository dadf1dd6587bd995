#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "adfilt/eeg.hpp"
#include "adfilt/victims.hpp"

namespace adfilt::attacks {

enum class Provenance { Adversarial, BackdoorKey, NoisyBaseline, Identity };

std::string to_string(Provenance p);
Provenance provenance_from_string(const std::string& s);

/// A C x C spatial filter mixing channels per time sample.
struct SpatialFilter {
  Tensor W;  // (C,C)
  Provenance provenance = Provenance::Identity;
  std::uint64_t seed = 0;
  double alpha = 0.0;    // evasion trade-off the filter was optimized at
  bool accepted = true;  // false when no binary-search step reached chance
  double validation_bca = -1.0;

  std::size_t channels() const { return W.dim(0); }
  static SpatialFilter identity(std::size_t c);
};

/// data' = W * data; label and metadata unchanged.
eeg::EegTrial apply(const SpatialFilter& filter, const eeg::EegTrial& trial);
eeg::EegDataset apply(const SpatialFilter& filter, const eeg::EegDataset& ds);

struct EvasionConfig {
  int search_steps = 10;  // S
  int epochs = 50;        // M
  double alpha0 = 100.0;
  double alpha_max = 1e5;
  double lr = 1e-3;
  int batch_size = 32;
  double init_std = 0.01;  // W = I + N(0, std)
  std::uint64_t seed = 0;
};

struct AlphaTraceEntry {
  int step = 0;
  double alpha = 0.0;
  double validation_bca = 0.0;
  bool accepted = false;
};

/// Mean over the batch of -CE(W x, y) + alpha * MSE(W x, x), the quantity
/// the filter search minimizes. Differentiable in W through the graph.
double evasion_objective(const Tensor& W, const std::vector<const eeg::EegTrial*>& batch,
                         const models::VictimModel& model, double alpha);

/// Universal adversarial filter search: binary search over alpha; each step
/// re-initializes W = I + N(0, init_std) and minimizes the objective for
/// `epochs` passes over the training set, then accepts iff the validation
/// BCA of the filtered set drops to chance (<= 1/K). Returns the filter of
/// the LARGEST accepted alpha; if nothing is accepted, the last step's
/// filter is returned flagged accepted=false with its BCA attached.
SpatialFilter generate_evasion_filter(const eeg::EegDataset& train,
                                      const eeg::EegDataset& validation,
                                      const models::VictimModel& model, const EvasionConfig& cfg,
                                      std::vector<AlphaTraceEntry>* trace = nullptr);

/// W = I + N(0, std 0.01): the paper's no-optimization control filter.
SpatialFilter make_noisy_baseline(std::size_t channels, std::uint64_t seed);

struct BackdoorConfig {
  int target_class = 0;
  double ratio = 0.05;      // poisoned fraction of the training set
  double noise_std = 0.05;  // key noise scale
  int zeroed_channels = -1;  // -1 -> ceil(C/2)
  std::uint64_t seed = 0;
};

/// Backdoor key: I + noise with `zeroed_channels` noise rows zeroed, so
/// those channels pass through untouched.
SpatialFilter make_backdoor_key(std::size_t channels, const BackdoorConfig& cfg);

struct PoisonResult {
  eeg::EegDataset dataset;
  std::vector<std::size_t> poisoned_indices;  // sorted
};

/// Replaces round(ratio*N) uniformly chosen trials with (key x, target).
PoisonResult poison(const eeg::EegDataset& ds, const SpatialFilter& key,
                    const BackdoorConfig& cfg);

struct BackdoorOutcome {
  double clean_bca = 0.0;          // poisoned model on clean test trials
  double keyed_asr = 0.0;          // poisoned model on keyed non-target trials
  double baseline_bca = 0.0;       // unpoisoned model on clean test trials
  double baseline_asr = 0.0;       // unpoisoned model on keyed trials
  std::size_t poisoned_count = 0;
};

/// Full backdoor experiment on one split: trains a poisoned and an
/// unpoisoned model of the given spec and evaluates both.
BackdoorOutcome run_backdoor_attack(const eeg::EegDataset& train, const eeg::EegDataset& test,
                                    const models::ModelSpec& spec, const SpatialFilter& key,
                                    const BackdoorConfig& cfg,
                                    const models::TrainConfig& train_cfg);

// ---- serialization -------------------------------------------------------
// <stem>.json manifest {C, provenance, seed, alpha, ...} + <stem>.bin
// float32 little-endian C*C blob.

void save_filter(const std::filesystem::path& stem, const SpatialFilter& filter);
SpatialFilter load_filter(const std::filesystem::path& stem);

}  // namespace adfilt::attacks
