#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "adfilt/tensor.hpp"

namespace adfilt::eeg {

/// One EEG trial: a channels x samples matrix with a class label.
struct EegTrial {
  Tensor data;  // (C,T)
  double fs = 0.0;
  int label = 0;
  int subject = 0;

  std::size_t channels() const { return data.dim(0); }
  std::size_t samples() const { return data.dim(1); }
};

/// Ordered trial collection. All trials share C, T and fs; every label is
/// in [0,K) and every class occurs at least once.
struct EegDataset {
  std::vector<EegTrial> trials;
  int num_classes = 0;
  std::string name;

  std::size_t size() const { return trials.size(); }
  bool empty() const { return trials.empty(); }
  std::size_t channels() const { return trials.front().channels(); }
  std::size_t samples() const { return trials.front().samples(); }
  double fs() const { return trials.front().fs; }

  std::vector<int> labels() const;
  std::vector<int> subjects() const;  // distinct, sorted
  /// Throws ShapeError/ContractError if an invariant is violated.
  void validate() const;
};

// ---- preprocessing (order: bandpass -> downsample -> epoch -> zscore) ---

/// Linear-phase windowed-sinc band-pass (Hamming window, order
/// 4*fs/lo rounded up to odd), applied per channel with reflection padding;
/// the output keeps length T.
EegTrial bandpass(const EegTrial& trial, double lo_hz, double hi_hz);

/// Integer-factor decimation preceded by an anti-alias low-pass at
/// 0.45 * target_fs.
EegTrial downsample(const EegTrial& trial, double target_fs);

/// Per-channel z-score with population std; constant channels map to zero.
EegTrial zscore(const EegTrial& trial);

/// Extracts the window [onset+a, onset+b) seconds from a continuous
/// recording; T = round((b-a)*fs) samples.
EegTrial epoch(const EegTrial& recording, double onset_s, double a_s, double b_s);

EegDataset bandpass(const EegDataset& ds, double lo_hz, double hi_hz);
EegDataset downsample(const EegDataset& ds, double target_fs);
EegDataset zscore(const EegDataset& ds);

// ---- synthetic data -----------------------------------------------------

/// Class template: sinusoidal sources mixed into channels. Distinct classes
/// must differ in at least one descriptor.
struct ClassTemplate {
  std::vector<double> freqs_hz;
  std::vector<double> phases;  // base phase per source; trials jitter around it
  Tensor mixing;               // (C, n_sources)
};

struct SyntheticSpec {
  std::size_t channels = 8;
  std::size_t samples = 128;
  double fs = 128.0;
  int classes = 2;
  int trials_per_class = 60;  // per subject
  int subjects = 4;
  double noise_std = 1.0;
  double phase_jitter = 0.3;  // radians, per trial
  double amplitude = 1.0;
  std::uint64_t seed = 0;
  /// Optional explicit templates (size == classes); generated from the seed
  /// when empty.
  std::vector<ClassTemplate> templates;
};

/// Deterministic mixture-of-sinusoids generator. Classes differ in source
/// frequencies and channel mixing, so spatial structure is discriminative.
EegDataset synthesize(const SyntheticSpec& spec);

/// The class templates synthesize() would use (explicit ones, or the ones
/// derived from the seed).
std::vector<ClassTemplate> resolve_templates(const SyntheticSpec& spec);

}  // namespace adfilt::eeg
