#include <algorithm>
#include <cmath>

#include "adfilt/linalg.hpp"
#include "adfilt/victims.hpp"

namespace adfilt::models {

namespace {

constexpr double kCovRidge = 1e-6;
constexpr double kLogVarEps = 1e-10;

// Per-trial covariance X X^T, trace-normalized.
Tensor trial_cov(const Tensor& x) {
  const std::size_t c = x.dim(0);
  const std::size_t t = x.dim(1);
  Tensor cov({c, c});
  for (std::size_t i = 0; i < c; ++i) {
    const double* xi = x.data() + i * t;
    for (std::size_t j = i; j < c; ++j) {
      const double* xj = x.data() + j * t;
      double acc = 0.0;
      for (std::size_t k = 0; k < t; ++k) acc += xi[k] * xj[k];
      cov.at(i, j) = acc;
      cov.at(j, i) = acc;
    }
  }
  double trace = 0.0;
  for (std::size_t i = 0; i < c; ++i) trace += cov.at(i, i);
  if (trace > 0.0) {
    for (std::size_t i = 0; i < cov.size(); ++i) cov[i] /= trace;
  }
  return cov;
}

// Class-averaged trace-normalized covariance, ridge-regularized.
Tensor class_cov(const eeg::EegDataset& ds, const std::vector<char>& member) {
  const std::size_t c = ds.channels();
  Tensor acc({c, c});
  std::size_t n = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (!member[i]) continue;
    const Tensor cov = trial_cov(ds.trials[i].data);
    for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += cov[j];
    ++n;
  }
  if (n == 0) throw ContractError("class covariance over an empty class");
  for (std::size_t j = 0; j < acc.size(); ++j) acc[j] /= static_cast<double>(n);
  for (std::size_t i = 0; i < c; ++i) acc.at(i, i) += kCovRidge;
  return acc;
}

// Picks n_top high + n_bottom low generalized eigenvectors (values are
// ascending) and lays them out as projection rows, high ones first.
void append_filters(const linalg::EigResult& eig, int n_top, int n_bottom,
                    std::vector<std::vector<double>>& rows, std::vector<double>& values) {
  const std::size_t c = eig.vectors.dim(0);
  const std::size_t n = eig.values.size();
  for (int i = 0; i < n_top; ++i) {
    const std::size_t col = n - 1 - static_cast<std::size_t>(i);
    std::vector<double> row(c);
    for (std::size_t r = 0; r < c; ++r) row[r] = eig.vectors.at(r, col);
    rows.push_back(std::move(row));
    values.push_back(eig.values[col]);
  }
  for (int i = 0; i < n_bottom; ++i) {
    const std::size_t col = static_cast<std::size_t>(i);
    std::vector<double> row(c);
    for (std::size_t r = 0; r < c; ++r) row[r] = eig.vectors.at(r, col);
    rows.push_back(std::move(row));
    values.push_back(eig.values[col]);
  }
}

Tensor rows_to_tensor(const std::vector<std::vector<double>>& rows) {
  Tensor out({rows.size(), rows.front().size()});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy(rows[i].begin(), rows[i].end(), out.data() + i * rows[i].size());
  }
  return out;
}

std::vector<char> class_mask(const eeg::EegDataset& ds, int cls, bool invert = false) {
  std::vector<char> m(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    m[i] = invert ? (ds.trials[i].label != cls) : (ds.trials[i].label == cls);
  }
  return m;
}

}  // namespace

CspResult fit_csp(const eeg::EegDataset& ds, int n_filters) {
  ds.validate();
  if (ds.num_classes != 2) {
    throw ContractError("classical CSP expects a binary dataset (use fit_csp_ovr for K > 2)");
  }
  const int c = static_cast<int>(ds.channels());
  if (n_filters < 2 || n_filters % 2 != 0 || n_filters > c) {
    throw ContractError("CSP filter count must be even and in [2, C], got " +
                        std::to_string(n_filters));
  }
  const Tensor s1 = class_cov(ds, class_mask(ds, 0));
  const Tensor s2 = class_cov(ds, class_mask(ds, 1));
  Tensor composite = s1;
  for (std::size_t i = 0; i < composite.size(); ++i) composite[i] += s2[i];

  const auto eig = linalg::eig_sym_generalized(s1, composite, 0.0);
  std::vector<std::vector<double>> rows;
  std::vector<double> values;
  append_filters(eig, n_filters / 2, n_filters / 2, rows, values);

  CspResult r;
  r.projection = rows_to_tensor(rows);
  r.eigenvalues = std::move(values);
  r.sigma_target = s1;
  r.sigma_sum = std::move(composite);
  return r;
}

Tensor fit_csp_ovr(const eeg::EegDataset& ds, int n_filters) {
  ds.validate();
  const int k = ds.num_classes;
  if (k == 2) return fit_csp(ds, n_filters).projection;
  const int per_class = std::max(1, n_filters / k);
  std::vector<std::vector<double>> rows;
  std::vector<double> values;
  for (int cls = 0; cls < k; ++cls) {
    const Tensor st = class_cov(ds, class_mask(ds, cls));
    const Tensor sr = class_cov(ds, class_mask(ds, cls, true));
    Tensor composite = st;
    for (std::size_t i = 0; i < composite.size(); ++i) composite[i] += sr[i];
    const auto eig = linalg::eig_sym_generalized(st, composite, 0.0);
    const int n_top = (per_class + 1) / 2;
    const int n_bottom = per_class / 2;
    append_filters(eig, n_top, n_bottom, rows, values);
  }
  return rows_to_tensor(rows);
}

XdawnResult fit_xdawn(const eeg::EegDataset& ds, int n_filters, int target_class) {
  ds.validate();
  const std::size_t c = ds.channels();
  const std::size_t t = ds.samples();
  if (n_filters < 1 || static_cast<std::size_t>(n_filters) > c) {
    throw ContractError("xDAWN filter count must be in [1, C]");
  }
  if (target_class < 0 || target_class >= ds.num_classes) {
    throw ContractError("xDAWN target class " + std::to_string(target_class) + " out of range");
  }

  // evoked response: mean trial of the target class
  Tensor evoked({c, t});
  std::size_t n_target = 0;
  for (const auto& trial : ds.trials) {
    if (trial.label != target_class) continue;
    for (std::size_t i = 0; i < evoked.size(); ++i) evoked[i] += trial.data[i];
    ++n_target;
  }
  for (std::size_t i = 0; i < evoked.size(); ++i) evoked[i] /= static_cast<double>(n_target);

  Tensor sig = trial_cov(evoked);
  double sig_mass = 0.0;
  for (std::size_t i = 0; i < c; ++i) sig_mass += sig.at(i, i);
  if (sig_mass <= 0.0) throw NumericError("xDAWN evoked response is identically zero");

  Tensor noise({c, c});
  for (const auto& trial : ds.trials) {
    const Tensor cov = trial_cov(trial.data);
    for (std::size_t i = 0; i < noise.size(); ++i) noise[i] += cov[i];
  }
  for (std::size_t i = 0; i < noise.size(); ++i) noise[i] /= static_cast<double>(ds.size());

  const auto eig = linalg::eig_sym_generalized(sig, noise, kCovRidge);
  std::vector<std::vector<double>> rows;
  std::vector<double> values;
  append_filters(eig, n_filters, 0, rows, values);

  XdawnResult r;
  r.projection = rows_to_tensor(rows);
  r.eigenvalues = std::move(values);
  r.evoked_cov = std::move(sig);
  r.noise_cov = std::move(noise);
  return r;
}

// ---- SpatialFeatureModel ---------------------------------------------------

namespace {
std::size_t effective_filter_count(const ModelSpec& spec, int k) {
  if (spec.kind == ModelKind::XdawnLr) return static_cast<std::size_t>(spec.spatial_filters);
  if (k == 2) return static_cast<std::size_t>(spec.spatial_filters);
  return static_cast<std::size_t>(std::max(1, spec.spatial_filters / k)) *
         static_cast<std::size_t>(k);
}
}  // namespace

SpatialFeatureModel::SpatialFeatureModel(const ModelSpec& spec, std::size_t C, std::size_t T,
                                         int K)
    : VictimModel(C, T, K), spec_(spec), effective_filters_(effective_filter_count(spec, K)) {
  if (spec.kind != ModelKind::CspLr && spec.kind != ModelKind::XdawnLr) {
    throw ContractError("SpatialFeatureModel expects a spatial model kind");
  }
  projection_ = Tensor({effective_filters_, C_});
  head_w_ = Tensor({feature_dim(), static_cast<std::size_t>(K_)});
  head_b_ = Tensor({static_cast<std::size_t>(K_)});
}

std::size_t SpatialFeatureModel::feature_dim() const {
  return spec_.kind == ModelKind::CspLr ? effective_filters_ : effective_filters_ * T_;
}

ad::Var SpatialFeatureModel::logits(ad::Graph& g, ad::Var input,
                                    std::vector<ad::Var>* bound) const {
  const auto& shape = input.shape();
  if (shape.size() != 3 || shape[1] != C_ || shape[2] != T_) {
    throw ShapeError("model expects input (B," + std::to_string(C_) + "," + std::to_string(T_) +
                     "), got " + input.value().shape_str());
  }
  ad::Var proj = g.constant(projection_);
  ad::Var w = bound ? g.param(head_w_) : g.constant(head_w_);
  ad::Var b = bound ? g.param(head_b_) : g.constant(head_b_);
  if (bound) {
    bound->push_back(w);
    bound->push_back(b);
  }
  ad::Var projected = ad::matmul(proj, input);  // (B,F,T)
  ad::Var feats;
  if (spec_.kind == ModelKind::CspLr) {
    feats = ad::logarithm(ad::shift(ad::mean(ad::square(projected), 2), kLogVarEps));
  } else {
    feats = ad::flatten_batch(projected);
  }
  return ad::add(ad::matmul(feats, w), b);
}

void SpatialFeatureModel::fit(const eeg::EegDataset& train, const TrainConfig& cfg,
                              const eeg::EegDataset* validation) {
  if (spec_.kind == ModelKind::CspLr) {
    projection_ = train.num_classes == 2 ? fit_csp(train, spec_.spatial_filters).projection
                                         : fit_csp_ovr(train, spec_.spatial_filters);
  } else {
    projection_ = fit_xdawn(train, spec_.spatial_filters, spec_.xdawn_target).projection;
  }
  if (projection_.dim(0) != effective_filters_) {
    throw ContractError("spatial fit produced an unexpected filter count");
  }
  head_w_.fill(0.0);
  head_b_.fill(0.0);
  train_seed_ = cfg.seed;
  train_params(*this, train, cfg, validation);
}

std::vector<Tensor*> SpatialFeatureModel::trainable() { return {&head_w_, &head_b_}; }

std::vector<std::pair<std::string, const Tensor*>> SpatialFeatureModel::state() const {
  return {{"projection", &projection_}, {"head_w", &head_w_}, {"head_b", &head_b_}};
}

std::vector<std::pair<std::string, Tensor*>> SpatialFeatureModel::state() {
  return {{"projection", &projection_}, {"head_w", &head_w_}, {"head_b", &head_b_}};
}

Tensor SpatialFeatureModel::features(const eeg::EegTrial& trial) const {
  ad::Graph g;
  ad::Var input = g.constant(trial.data.reshaped({1, C_, T_}));
  ad::Var projected = ad::matmul(g.constant(projection_), input);
  ad::Var feats = spec_.kind == ModelKind::CspLr
                      ? ad::logarithm(ad::shift(ad::mean(ad::square(projected), 2), kLogVarEps))
                      : ad::flatten_batch(projected);
  return feats.value().reshaped({feats.value().size()});
}

}  // namespace adfilt::models
