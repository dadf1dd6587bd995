#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "adfilt/autodiff.hpp"
#include "adfilt/eeg.hpp"

namespace adfilt::models {

enum class ModelKind { CspLr, XdawnLr, CompactCnn };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& s);

/// Compact CNN family; the depth variant swaps blocks in and out.
struct CnnSpec {
  enum class Depth { Shallow, Standard, Deep };
  enum class Activation { Elu, Relu };
  int temporal_filters = 4;   // F1
  int temporal_kernel = 17;   // odd; temporal convs keep length
  int depth_multiplier = 2;   // D, depthwise spatial stage
  int separable_filters = 8;  // F2, pointwise stage
  int separable_kernel = 9;   // odd
  int pool1 = 4;
  int pool2 = 8;
  Depth depth = Depth::Standard;
  Activation activation = Activation::Elu;
};

struct ModelSpec {
  ModelKind kind = ModelKind::CspLr;
  int spatial_filters = 4;  // F for the spatial-feature models
  int xdawn_target = 1;     // evoked class for xDAWN
  CnnSpec cnn;
};

struct TrainConfig {
  int epochs = 100;
  int batch_size = 32;
  double lr = 1e-3;
  double weight_decay = 1e-4;
  std::uint64_t seed = 0;
  int patience = 10;  // early stop on validation loss; 0 disables
};

/// A parameterized classifier with a differentiable forward pass.
class VictimModel {
public:
  virtual ~VictimModel() = default;

  /// Differentiable forward: input (B,C,T) -> logits (B,K). When `bound`
  /// is non-null the model parameters enter the graph as trainable vars
  /// (in trainable() order) and are appended to *bound.
  virtual ad::Var logits(ad::Graph& g, ad::Var input,
                         std::vector<ad::Var>* bound = nullptr) const = 0;

  virtual void fit(const eeg::EegDataset& train, const TrainConfig& cfg,
                   const eeg::EegDataset* validation = nullptr) = 0;

  virtual std::string kind() const = 0;
  virtual const ModelSpec& spec() const = 0;

  /// Parameters updated by the optimizer.
  virtual std::vector<Tensor*> trainable() = 0;
  /// Everything serialized to the parameter blob, in manifest order.
  virtual std::vector<std::pair<std::string, const Tensor*>> state() const = 0;
  virtual std::vector<std::pair<std::string, Tensor*>> state() = 0;

  std::vector<double> predict_proba(const eeg::EegTrial& trial) const;
  /// Argmax of predict_proba; ties break toward the lower class index.
  int predict(const eeg::EegTrial& trial) const;
  std::vector<int> predict(const eeg::EegDataset& ds) const;
  /// Forward a batch of trials without gradients; returns (B,K) logits.
  Tensor batch_logits(const std::vector<const eeg::EegTrial*>& trials) const;

  std::size_t channels() const { return C_; }
  std::size_t samples() const { return T_; }
  int classes() const { return K_; }
  const std::vector<double>& loss_trace() const { return loss_trace_; }
  std::uint64_t param_hash() const;
  std::uint64_t train_seed() const { return train_seed_; }
  void set_train_seed(std::uint64_t seed) { train_seed_ = seed; }

protected:
  VictimModel(std::size_t C, std::size_t T, int K) : C_(C), T_(T), K_(K) {}
  std::size_t C_ = 0, T_ = 0;
  int K_ = 0;
  std::vector<double> loss_trace_;
  std::uint64_t train_seed_ = 0;
  friend void train_params(VictimModel&, const eeg::EegDataset&, const TrainConfig&,
                           const eeg::EegDataset*);
};

std::unique_ptr<VictimModel> make_model(const ModelSpec& spec, std::size_t C, std::size_t T,
                                        int K);

/// Shared minibatch cross-entropy loop (adaptive-moment steps, optional
/// early stopping on validation loss with best-weights restore).
void train_params(VictimModel& model, const eeg::EegDataset& train, const TrainConfig& cfg,
                  const eeg::EegDataset* validation);

// ---- closed-form spatial fits (also used directly by tests) -------------

struct CspResult {
  Tensor projection;  // (F,C), rows are spatial filters
  std::vector<double> eigenvalues;
  Tensor sigma_target;  // learned (ridged) class covariance
  Tensor sigma_sum;     // learned composite covariance
};

/// Binary CSP: generalized eigenvectors of (sigma_1, sigma_1 + sigma_2)
/// from per-trial trace-normalized covariances, class-averaged and
/// ridge-regularized by 1e-6 I. Returns F/2 top + F/2 bottom filters.
CspResult fit_csp(const eeg::EegDataset& ds, int n_filters);

/// Multi-class one-vs-rest CSP; F/K filters per class, stacked.
Tensor fit_csp_ovr(const eeg::EegDataset& ds, int n_filters);

struct XdawnResult {
  Tensor projection;  // (F,C)
  std::vector<double> eigenvalues;
  Tensor evoked_cov;
  Tensor noise_cov;
};

/// xDAWN-style fit: top-F generalized eigenvectors of (evoked-response
/// covariance from the target class mean, pooled noise covariance).
XdawnResult fit_xdawn(const eeg::EegDataset& ds, int n_filters, int target_class);

// ---- concrete models -----------------------------------------------------

/// CSP or xDAWN projection with a logistic-regression head.
/// CSP features: log-variance of projected channels; xDAWN features: the
/// flattened projected trial.
class SpatialFeatureModel : public VictimModel {
public:
  SpatialFeatureModel(const ModelSpec& spec, std::size_t C, std::size_t T, int K);

  ad::Var logits(ad::Graph& g, ad::Var input, std::vector<ad::Var>* bound) const override;
  void fit(const eeg::EegDataset& train, const TrainConfig& cfg,
           const eeg::EegDataset* validation) override;
  std::string kind() const override { return to_string(spec_.kind); }
  const ModelSpec& spec() const override { return spec_; }
  std::vector<Tensor*> trainable() override;
  std::vector<std::pair<std::string, const Tensor*>> state() const override;
  std::vector<std::pair<std::string, Tensor*>> state() override;

  const Tensor& projection() const { return projection_; }
  std::size_t feature_dim() const;
  /// Non-graph feature map (used by tests and by nothing else).
  Tensor features(const eeg::EegTrial& trial) const;

private:
  ModelSpec spec_;
  std::size_t effective_filters_;
  Tensor projection_;  // (F,C)
  Tensor head_w_;      // (feature_dim, K)
  Tensor head_b_;      // (K)
};

/// EEGNet-style compact CNN: temporal conv, depthwise spatial conv, and
/// (standard/deep) a separable temporal block, with average pooling and a
/// dense classifier.
class CompactCnnModel : public VictimModel {
public:
  CompactCnnModel(const ModelSpec& spec, std::size_t C, std::size_t T, int K);

  ad::Var logits(ad::Graph& g, ad::Var input, std::vector<ad::Var>* bound) const override;
  void fit(const eeg::EegDataset& train, const TrainConfig& cfg,
           const eeg::EegDataset* validation) override;
  std::string kind() const override { return to_string(ModelKind::CompactCnn); }
  const ModelSpec& spec() const override { return spec_; }
  std::vector<Tensor*> trainable() override;
  std::vector<std::pair<std::string, const Tensor*>> state() const override;
  std::vector<std::pair<std::string, Tensor*>> state() override;

  void init_params(std::uint64_t seed);
  std::size_t parameter_count() const;

private:
  ModelSpec spec_;
  std::vector<std::string> names_;
  std::vector<Tensor> params_;
  std::size_t feature_len_ = 0;
};

// ---- serialization -------------------------------------------------------
// <stem>.json manifest + <stem>.bin float32 parameter blob.

void save_model(const std::filesystem::path& stem, const VictimModel& model);
std::unique_ptr<VictimModel> load_model(const std::filesystem::path& stem);

}  // namespace adfilt::models
