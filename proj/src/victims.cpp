#include "adfilt/victims.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "adfilt/optim.hpp"
#include "adfilt/rng.hpp"

namespace adfilt::models {

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::CspLr:
      return "csp_lr";
    case ModelKind::XdawnLr:
      return "xdawn_lr";
    case ModelKind::CompactCnn:
      return "compact_cnn";
  }
  throw ContractError("unknown model kind");
}

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "csp_lr") return ModelKind::CspLr;
  if (s == "xdawn_lr") return ModelKind::XdawnLr;
  if (s == "compact_cnn") return ModelKind::CompactCnn;
  throw ConfigError("unknown model kind '" + s + "'");
}

namespace {
Tensor stack_trials(const eeg::EegDataset& ds, const std::vector<std::size_t>& idx) {
  const std::size_t c = ds.channels();
  const std::size_t t = ds.samples();
  Tensor out({idx.size(), c, t});
  for (std::size_t i = 0; i < idx.size(); ++i) {
    std::memcpy(out.data() + i * c * t, ds.trials[idx[i]].data.data(), c * t * sizeof(double));
  }
  return out;
}

double dataset_ce(const VictimModel& model, const eeg::EegDataset& ds) {
  double total = 0.0;
  const std::size_t chunk = 64;
  std::vector<const eeg::EegTrial*> batch;
  std::vector<int> labels;
  std::size_t done = 0;
  while (done < ds.size()) {
    batch.clear();
    labels.clear();
    for (std::size_t i = done; i < std::min(done + chunk, ds.size()); ++i) {
      batch.push_back(&ds.trials[i]);
      labels.push_back(ds.trials[i].label);
    }
    Tensor lg = model.batch_logits(batch);
    Tensor probs = ad::softmax(lg);
    for (std::size_t b = 0; b < batch.size(); ++b) {
      total -= std::log(std::max(probs.at(b, static_cast<std::size_t>(labels[b])), 1e-300));
    }
    done += batch.size();
  }
  return total / static_cast<double>(ds.size());
}
}  // namespace

void train_params(VictimModel& model, const eeg::EegDataset& train, const TrainConfig& cfg,
                  const eeg::EegDataset* validation) {
  train.validate();
  if (train.channels() != model.channels() || train.samples() != model.samples() ||
      train.num_classes != model.classes()) {
    throw ShapeError("training data (" + std::to_string(train.channels()) + "," +
                     std::to_string(train.samples()) + ",K=" +
                     std::to_string(train.num_classes) + ") does not match model (" +
                     std::to_string(model.channels()) + "," + std::to_string(model.samples()) +
                     ",K=" + std::to_string(model.classes()) + ")");
  }
  if (cfg.epochs < 0 || cfg.batch_size < 1) throw ConfigError("bad epochs/batch size");
  if (cfg.lr <= 0.0) throw ConfigError("learning rate must be positive");

  Rng rng = make_rng(derive_seed(cfg.seed, 0xBA7C4));
  ad::Adam adam({cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay});
  model.loss_trace_.clear();

  double best_val = std::numeric_limits<double>::infinity();
  std::vector<Tensor> best_state;
  int patience_left = cfg.patience;
  const bool early_stop = validation != nullptr && cfg.patience > 0;

  const std::size_t n = train.size();
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = shuffled_indices(n, rng);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t stop = std::min(n, start + cfg.batch_size);
      std::vector<std::size_t> idx(order.begin() + start, order.begin() + stop);
      std::vector<int> labels;
      labels.reserve(idx.size());
      for (std::size_t i : idx) labels.push_back(train.trials[i].label);

      ad::Graph g;
      ad::Var input = g.constant(stack_trials(train, idx));
      std::vector<ad::Var> bound;
      ad::Var lg = model.logits(g, input, &bound);
      ad::Var loss = ad::softmax_cross_entropy(lg, labels);
      if (!std::isfinite(loss.value()[0])) {
        throw TrainError("training loss diverged", epoch);
      }
      g.backward(loss);
      std::vector<const Tensor*> grads;
      grads.reserve(bound.size());
      for (const ad::Var& v : bound) grads.push_back(&v.grad());
      try {
        adam.step(model.trainable(), grads);
      } catch (const NumericError& e) {
        throw TrainError(e.what(), epoch);
      }
      epoch_loss += loss.value()[0];
      ++batches;
    }
    model.loss_trace_.push_back(epoch_loss / static_cast<double>(batches));

    if (early_stop) {
      const double val_loss = dataset_ce(model, *validation);
      if (val_loss < best_val - 1e-12) {
        best_val = val_loss;
        best_state.clear();
        for (Tensor* p : model.trainable()) best_state.push_back(*p);
        patience_left = cfg.patience;
      } else if (--patience_left <= 0) {
        break;
      }
    }
  }
  if (early_stop && !best_state.empty()) {
    auto params = model.trainable();
    for (std::size_t i = 0; i < params.size(); ++i) *params[i] = best_state[i];
  }
}

Tensor VictimModel::batch_logits(const std::vector<const eeg::EegTrial*>& trials) const {
  if (trials.empty()) throw ContractError("batch_logits needs at least one trial");
  Tensor xb({trials.size(), C_, T_});
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const eeg::EegTrial& t = *trials[i];
    if (t.channels() != C_ || t.samples() != T_) {
      throw ShapeError("trial shape " + t.data.shape_str() + " does not match model (" +
                       std::to_string(C_) + "," + std::to_string(T_) + ")");
    }
    std::memcpy(xb.data() + i * C_ * T_, t.data.data(), C_ * T_ * sizeof(double));
  }
  ad::Graph g;
  ad::Var lg = logits(g, g.constant(std::move(xb)), nullptr);
  return lg.value();
}

std::vector<double> VictimModel::predict_proba(const eeg::EegTrial& trial) const {
  Tensor lg = batch_logits({&trial});
  Tensor probs = ad::softmax(lg);
  return {probs.data(), probs.data() + K_};
}

int VictimModel::predict(const eeg::EegTrial& trial) const {
  const auto p = predict_proba(trial);
  return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

std::vector<int> VictimModel::predict(const eeg::EegDataset& ds) const {
  std::vector<int> out;
  out.reserve(ds.size());
  const std::size_t chunk = 64;
  std::vector<const eeg::EegTrial*> batch;
  std::size_t done = 0;
  while (done < ds.size()) {
    batch.clear();
    for (std::size_t i = done; i < std::min(done + chunk, ds.size()); ++i) {
      batch.push_back(&ds.trials[i]);
    }
    Tensor lg = batch_logits(batch);
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const double* row = lg.data() + b * K_;
      out.push_back(static_cast<int>(std::max_element(row, row + K_) - row));
    }
    done += batch.size();
  }
  return out;
}

std::uint64_t VictimModel::param_hash() const {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (const auto& [name, tensor] : state()) {
    for (char ch : name) {
      h ^= static_cast<unsigned char>(ch);
      h *= 1099511628211ULL;
    }
    const auto* bytes = reinterpret_cast<const unsigned char*>(tensor->data());
    for (std::size_t i = 0; i < tensor->size() * sizeof(double); ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  }
  return h;
}

std::unique_ptr<VictimModel> make_model(const ModelSpec& spec, std::size_t C, std::size_t T,
                                        int K) {
  switch (spec.kind) {
    case ModelKind::CspLr:
    case ModelKind::XdawnLr:
      return std::make_unique<SpatialFeatureModel>(spec, C, T, K);
    case ModelKind::CompactCnn:
      return std::make_unique<CompactCnnModel>(spec, C, T, K);
  }
  throw ContractError("unknown model kind");
}

}  // namespace adfilt::models
