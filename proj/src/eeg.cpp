#include "adfilt/eeg.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

namespace adfilt::eeg {

std::vector<int> EegDataset::labels() const {
  std::vector<int> out;
  out.reserve(trials.size());
  for (const auto& t : trials) out.push_back(t.label);
  return out;
}

std::vector<int> EegDataset::subjects() const {
  std::set<int> s;
  for (const auto& t : trials) s.insert(t.subject);
  return {s.begin(), s.end()};
}

void EegDataset::validate() const {
  if (trials.empty()) throw ContractError("dataset '" + name + "' has no trials");
  if (num_classes < 1) throw ContractError("dataset '" + name + "' has invalid class count");
  const std::size_t c = trials.front().channels();
  const std::size_t t = trials.front().samples();
  const double f = trials.front().fs;
  std::vector<int> per_class(num_classes, 0);
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const EegTrial& tr = trials[i];
    if (tr.channels() != c || tr.samples() != t) {
      throw ShapeError("trial " + std::to_string(i) + " shape " + tr.data.shape_str() +
                       " differs from dataset shape (" + std::to_string(c) + "," +
                       std::to_string(t) + ")");
    }
    if (tr.fs != f) throw ContractError("trial " + std::to_string(i) + " sampling rate differs");
    if (tr.label < 0 || tr.label >= num_classes) {
      throw ContractError("trial " + std::to_string(i) + " label " + std::to_string(tr.label) +
                          " out of range for K=" + std::to_string(num_classes));
    }
    ++per_class[tr.label];
  }
  for (int k = 0; k < num_classes; ++k) {
    if (per_class[k] == 0) {
      throw ContractError("dataset '" + name + "' has no trials of class " + std::to_string(k));
    }
  }
}

// ---- FIR band-pass -------------------------------------------------------

namespace {

// Windowed-sinc band-pass taps: Hamming window, odd length.
std::vector<double> bandpass_taps(double lo, double hi, double fs, std::size_t ntaps) {
  const double nyq = fs / 2.0;
  const double f1 = lo / nyq;  // normalized [0,1]
  const double f2 = hi / nyq;
  const std::size_t m = ntaps - 1;  // even
  std::vector<double> h(ntaps);
  const double pi = std::numbers::pi;
  for (std::size_t i = 0; i < ntaps; ++i) {
    const double k = static_cast<double>(i) - static_cast<double>(m) / 2.0;
    double v;
    if (k == 0.0) {
      v = f2 - f1;
    } else {
      v = (std::sin(pi * f2 * k) - std::sin(pi * f1 * k)) / (pi * k);
    }
    const double w = 0.54 - 0.46 * std::cos(2.0 * pi * static_cast<double>(i) /
                                            static_cast<double>(m));
    h[i] = v * w;
  }
  return h;
}

// Low-pass taps for the decimation anti-alias stage.
std::vector<double> lowpass_taps(double cutoff, double fs, std::size_t ntaps) {
  const double nyq = fs / 2.0;
  const double fc = cutoff / nyq;
  const std::size_t m = ntaps - 1;
  std::vector<double> h(ntaps);
  const double pi = std::numbers::pi;
  for (std::size_t i = 0; i < ntaps; ++i) {
    const double k = static_cast<double>(i) - static_cast<double>(m) / 2.0;
    double v = (k == 0.0) ? fc : std::sin(pi * fc * k) / (pi * k);
    const double w = 0.54 - 0.46 * std::cos(2.0 * pi * static_cast<double>(i) /
                                            static_cast<double>(m));
    h[i] = v * w;
  }
  // normalize DC gain to 1
  double s = 0.0;
  for (double x : h) s += x;
  for (double& x : h) x /= s;
  return h;
}

// Zero-phase length-preserving convolution with reflection padding. The
// filter is linear phase with group delay m/2, so the output is shifted
// back by m/2 to keep features aligned.
Tensor filter_channels(const Tensor& data, const std::vector<double>& taps) {
  const std::size_t c = data.dim(0);
  const std::size_t t = data.dim(1);
  const std::size_t n = taps.size();
  const std::size_t half = (n - 1) / 2;
  Tensor out({c, t});
  std::vector<double> padded(t + n - 1);
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double* x = data.data() + ch * t;
    // reflect around the edges: x[-i] = x[i], x[T-1+i] = x[T-1-i]
    for (std::size_t i = 0; i < t + n - 1; ++i) {
      const long idx = static_cast<long>(i) - static_cast<long>(half);
      long j = idx;
      const long tmax = static_cast<long>(t) - 1;
      while (j < 0 || j > tmax) {
        if (j < 0) j = -j;
        if (j > tmax) j = 2 * tmax - j;
      }
      padded[i] = x[j];
    }
    double* y = out.data() + ch * t;
    for (std::size_t i = 0; i < t; ++i) {
      double acc = 0.0;
      const double* win = padded.data() + i;
      for (std::size_t k = 0; k < n; ++k) acc += taps[n - 1 - k] * win[k];
      y[i] = acc;
    }
  }
  return out;
}

std::size_t bandpass_order(double lo, double fs) {
  std::size_t n = static_cast<std::size_t>(std::ceil(4.0 * fs / lo));
  if (n % 2 == 0) ++n;
  return n;
}

}  // namespace

EegTrial bandpass(const EegTrial& trial, double lo_hz, double hi_hz) {
  if (!(lo_hz > 0.0) || !(hi_hz > lo_hz)) {
    throw DomainError("bandpass requires 0 < lo < hi, got [" + std::to_string(lo_hz) + ", " +
                      std::to_string(hi_hz) + "]");
  }
  if (hi_hz >= trial.fs / 2.0) {
    throw DomainError("bandpass upper edge " + std::to_string(hi_hz) +
                      " Hz reaches the Nyquist frequency " + std::to_string(trial.fs / 2.0) +
                      " Hz");
  }
  const auto taps = bandpass_taps(lo_hz, hi_hz, trial.fs, bandpass_order(lo_hz, trial.fs));
  EegTrial out = trial;
  out.data = filter_channels(trial.data, taps);
  return out;
}

EegTrial downsample(const EegTrial& trial, double target_fs) {
  if (!(target_fs > 0.0)) throw DomainError("downsample target rate must be positive");
  const double ratio = trial.fs / target_fs;
  const long factor = std::lround(ratio);
  if (factor < 1 || std::abs(ratio - static_cast<double>(factor)) > 1e-9) {
    throw DomainError("downsample from " + std::to_string(trial.fs) + " Hz to " +
                      std::to_string(target_fs) + " Hz is not an integer factor");
  }
  EegTrial out = trial;
  if (factor == 1) return out;
  // anti-alias low-pass at 0.45 * target
  const auto taps = lowpass_taps(0.45 * target_fs, trial.fs,
                                 bandpass_order(0.45 * target_fs, trial.fs));
  Tensor filtered = filter_channels(trial.data, taps);
  const std::size_t c = trial.channels();
  const std::size_t t2 = trial.samples() / static_cast<std::size_t>(factor);
  Tensor dec({c, t2});
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t i = 0; i < t2; ++i) {
      dec.at(ch, i) = filtered.at(ch, i * static_cast<std::size_t>(factor));
    }
  }
  out.data = std::move(dec);
  out.fs = target_fs;
  return out;
}

EegTrial zscore(const EegTrial& trial) {
  const std::size_t c = trial.channels();
  const std::size_t t = trial.samples();
  EegTrial out = trial;
  for (std::size_t ch = 0; ch < c; ++ch) {
    double* row = out.data.data() + ch * t;
    double mean = 0.0;
    for (std::size_t i = 0; i < t; ++i) mean += row[i];
    mean /= static_cast<double>(t);
    double var = 0.0;
    for (std::size_t i = 0; i < t; ++i) {
      const double d = row[i] - mean;
      var += d * d;
    }
    var /= static_cast<double>(t);  // population variance
    const double std = std::sqrt(var);
    if (std == 0.0) {
      for (std::size_t i = 0; i < t; ++i) row[i] = 0.0;
    } else {
      for (std::size_t i = 0; i < t; ++i) row[i] = (row[i] - mean) / std;
    }
  }
  return out;
}

EegTrial epoch(const EegTrial& recording, double onset_s, double a_s, double b_s) {
  if (!(a_s < b_s)) throw ContractError("epoch window requires a < b");
  const double fs = recording.fs;
  const long start = std::lround((onset_s + a_s) * fs);
  const std::size_t t_out = static_cast<std::size_t>(std::lround((b_s - a_s) * fs));
  if (start < 0 || static_cast<std::size_t>(start) + t_out > recording.samples()) {
    throw ContractError("epoch window [" + std::to_string(onset_s + a_s) + ", " +
                        std::to_string(onset_s + b_s) + "]s is outside the recording");
  }
  const std::size_t c = recording.channels();
  EegTrial out = recording;
  Tensor data({c, t_out});
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double* src = recording.data.data() + ch * recording.samples() + start;
    std::copy(src, src + t_out, data.data() + ch * t_out);
  }
  out.data = std::move(data);
  return out;
}

namespace {
template <typename F>
EegDataset map_trials(const EegDataset& ds, F&& f) {
  EegDataset out;
  out.num_classes = ds.num_classes;
  out.name = ds.name;
  out.trials.reserve(ds.trials.size());
  for (const auto& t : ds.trials) out.trials.push_back(f(t));
  return out;
}
}  // namespace

EegDataset bandpass(const EegDataset& ds, double lo_hz, double hi_hz) {
  return map_trials(ds, [&](const EegTrial& t) { return bandpass(t, lo_hz, hi_hz); });
}

EegDataset downsample(const EegDataset& ds, double target_fs) {
  return map_trials(ds, [&](const EegTrial& t) { return downsample(t, target_fs); });
}

EegDataset zscore(const EegDataset& ds) {
  return map_trials(ds, [](const EegTrial& t) { return zscore(t); });
}

}  // namespace adfilt::eeg
