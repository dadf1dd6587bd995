#pragma once

#include <vector>

#include "adfilt/attacks.hpp"
#include "adfilt/eeg.hpp"
#include "adfilt/victims.hpp"

namespace adfilt::metrics {

/// Balanced classification accuracy: mean over classes of within-class
/// accuracy. Every class in [0,K) must occur in `labels`.
double bca(const std::vector<int>& predictions, const std::vector<int>& labels, int num_classes);

/// Attack success rate: mean over classes k != target of the fraction of
/// class-k samples predicted as the target. Labels must contain at least
/// one sample of every non-target class.
double asr(const std::vector<int>& keyed_predictions, const std::vector<int>& labels, int target,
           int num_classes);

struct Distortion {
  double global = 0.0;               // pooled over trials, channels, time
  std::vector<double> per_channel;   // pooled over trials and time
};

/// RMSE of the differences between paired trial sets (before vs after
/// filtering), computed in the model-input (post-preprocessing) space.
Distortion rmse_distortion(const eeg::EegDataset& before, const eeg::EegDataset& after);

/// Entry (g, v): BCA of victim v on the test set filtered by filters[g]
/// (the filter generated against model g). Diagonal = matched attack.
Tensor transferability_matrix(const std::vector<const models::VictimModel*>& victims,
                              const std::vector<const attacks::SpatialFilter*>& filters,
                              const eeg::EegDataset& test);

}  // namespace adfilt::metrics
