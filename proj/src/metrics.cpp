#include "adfilt/metrics.hpp"

#include <cmath>

namespace adfilt::metrics {

double bca(const std::vector<int>& predictions, const std::vector<int>& labels,
           int num_classes) {
  if (predictions.size() != labels.size()) {
    throw ContractError("bca: " + std::to_string(predictions.size()) + " predictions vs " +
                        std::to_string(labels.size()) + " labels");
  }
  if (num_classes < 2) throw ContractError("bca needs at least two classes");
  std::vector<std::size_t> total(num_classes, 0), correct(num_classes, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i];
    if (y < 0 || y >= num_classes) {
      throw ContractError("bca: label " + std::to_string(y) + " out of range");
    }
    ++total[y];
    if (predictions[i] == y) ++correct[y];
  }
  double acc = 0.0;
  for (int k = 0; k < num_classes; ++k) {
    if (total[k] == 0) {
      throw ContractError("bca: class " + std::to_string(k) + " absent from labels");
    }
    acc += static_cast<double>(correct[k]) / static_cast<double>(total[k]);
  }
  return acc / static_cast<double>(num_classes);
}

double asr(const std::vector<int>& keyed_predictions, const std::vector<int>& labels, int target,
           int num_classes) {
  if (keyed_predictions.size() != labels.size()) {
    throw ContractError("asr: prediction/label count mismatch");
  }
  if (num_classes < 2) throw ContractError("asr needs at least two classes");
  if (target < 0 || target >= num_classes) {
    throw ContractError("asr: target class " + std::to_string(target) + " out of range");
  }
  std::vector<std::size_t> total(num_classes, 0), hits(num_classes, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i];
    if (y < 0 || y >= num_classes) {
      throw ContractError("asr: label " + std::to_string(y) + " out of range");
    }
    if (y == target) continue;  // computed on samples outside the target class
    ++total[y];
    if (keyed_predictions[i] == target) ++hits[y];
  }
  double rate = 0.0;
  for (int k = 0; k < num_classes; ++k) {
    if (k == target) continue;
    if (total[k] == 0) {
      throw ContractError("asr: non-target class " + std::to_string(k) + " absent from labels");
    }
    rate += static_cast<double>(hits[k]) / static_cast<double>(total[k]);
  }
  return rate / static_cast<double>(num_classes - 1);
}

Distortion rmse_distortion(const eeg::EegDataset& before, const eeg::EegDataset& after) {
  if (before.size() != after.size() || before.empty()) {
    throw ShapeError("rmse_distortion: trial counts differ (" + std::to_string(before.size()) +
                     " vs " + std::to_string(after.size()) + ")");
  }
  const std::size_t c = before.channels();
  const std::size_t t = before.samples();
  if (after.channels() != c || after.samples() != t) {
    throw ShapeError("rmse_distortion: trial shapes differ");
  }
  Distortion d;
  d.per_channel.assign(c, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < before.size(); ++i) {
    const double* b = before.trials[i].data.data();
    const double* a = after.trials[i].data.data();
    for (std::size_t ch = 0; ch < c; ++ch) {
      double acc = 0.0;
      for (std::size_t s = 0; s < t; ++s) {
        const double diff = a[ch * t + s] - b[ch * t + s];
        acc += diff * diff;
      }
      d.per_channel[ch] += acc;
      total += acc;
    }
  }
  const double n_trials = static_cast<double>(before.size());
  for (std::size_t ch = 0; ch < c; ++ch) {
    d.per_channel[ch] = std::sqrt(d.per_channel[ch] / (n_trials * static_cast<double>(t)));
  }
  d.global = std::sqrt(total / (n_trials * static_cast<double>(c * t)));
  return d;
}

Tensor transferability_matrix(const std::vector<const models::VictimModel*>& victims,
                              const std::vector<const attacks::SpatialFilter*>& filters,
                              const eeg::EegDataset& test) {
  if (victims.empty() || filters.empty()) {
    throw ContractError("transferability matrix needs at least one model and one filter");
  }
  test.validate();
  const std::size_t c = test.channels();
  const std::size_t t = test.samples();
  for (const auto* m : victims) {
    if (m->channels() != c || m->samples() != t || m->classes() != test.num_classes) {
      throw ShapeError("transferability: model/test shape mismatch");
    }
  }
  Tensor out({filters.size(), victims.size()});
  const auto labels = test.labels();
  for (std::size_t g = 0; g < filters.size(); ++g) {
    const eeg::EegDataset filtered = attacks::apply(*filters[g], test);
    for (std::size_t v = 0; v < victims.size(); ++v) {
      out.at(g, v) = bca(victims[v]->predict(filtered), labels, test.num_classes);
    }
  }
  return out;
}

}  // namespace adfilt::metrics
