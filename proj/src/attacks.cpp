#include "adfilt/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <optional>

#include <json.hpp>

#include "adfilt/linalg.hpp"
#include "adfilt/metrics.hpp"
#include "adfilt/optim.hpp"
#include "adfilt/rng.hpp"

namespace adfilt::attacks {

using nlohmann::json;

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::Adversarial:
      return "adversarial";
    case Provenance::BackdoorKey:
      return "backdoor-key";
    case Provenance::NoisyBaseline:
      return "noisy-baseline";
    case Provenance::Identity:
      return "identity";
  }
  throw ContractError("unknown provenance");
}

Provenance provenance_from_string(const std::string& s) {
  if (s == "adversarial") return Provenance::Adversarial;
  if (s == "backdoor-key") return Provenance::BackdoorKey;
  if (s == "noisy-baseline") return Provenance::NoisyBaseline;
  if (s == "identity") return Provenance::Identity;
  throw ConfigError("unknown filter provenance '" + s + "'");
}

SpatialFilter SpatialFilter::identity(std::size_t c) {
  SpatialFilter f;
  f.W = Tensor::identity(c);
  f.provenance = Provenance::Identity;
  return f;
}

eeg::EegTrial apply(const SpatialFilter& filter, const eeg::EegTrial& trial) {
  if (filter.channels() != trial.channels()) {
    throw ShapeError("filter is " + filter.W.shape_str() + " but the trial has " +
                     std::to_string(trial.channels()) + " channels");
  }
  eeg::EegTrial out = trial;
  out.data = linalg::matmul(filter.W, trial.data);
  return out;
}

eeg::EegDataset apply(const SpatialFilter& filter, const eeg::EegDataset& ds) {
  eeg::EegDataset out;
  out.num_classes = ds.num_classes;
  out.name = ds.name;
  out.trials.reserve(ds.size());
  for (const auto& t : ds.trials) out.trials.push_back(apply(filter, t));
  return out;
}

// ---- evasion ---------------------------------------------------------------

namespace {

Tensor stack_batch(const eeg::EegDataset& ds, const std::vector<std::size_t>& idx,
                   std::vector<int>& labels) {
  const std::size_t c = ds.channels();
  const std::size_t t = ds.samples();
  Tensor out({idx.size(), c, t});
  labels.clear();
  labels.reserve(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    std::memcpy(out.data() + i * c * t, ds.trials[idx[i]].data.data(), c * t * sizeof(double));
    labels.push_back(ds.trials[idx[i]].label);
  }
  return out;
}

// -E[CE(Wx, y)] + alpha * E[MSE(Wx, x)] over one stacked batch.
ad::Var objective_var(ad::Graph& g, ad::Var w, Tensor batch, const std::vector<int>& labels,
                      const models::VictimModel& model, double alpha) {
  ad::Var x = g.constant(std::move(batch));
  ad::Var wx = ad::matmul(w, x);  // (C,C) x (B,C,T)
  ad::Var ce = ad::softmax_cross_entropy(model.logits(g, wx, nullptr), labels);
  ad::Var distortion = ad::mse(wx, x);
  return ad::add(ad::scale(ce, -1.0), ad::scale(distortion, alpha));
}

Tensor identity_plus_noise(std::size_t c, double std, Rng& rng) {
  Tensor w = Tensor::identity(c);
  for (std::size_t i = 0; i < w.size(); ++i) w[i] += gauss(rng, 0.0, std);
  return w;
}

double filtered_bca(const Tensor& w, const eeg::EegDataset& ds,
                    const models::VictimModel& model) {
  SpatialFilter f;
  f.W = w;
  f.provenance = Provenance::Adversarial;
  const eeg::EegDataset filtered = apply(f, ds);
  return metrics::bca(model.predict(filtered), filtered.labels(), model.classes());
}

}  // namespace

double evasion_objective(const Tensor& W, const std::vector<const eeg::EegTrial*>& batch,
                         const models::VictimModel& model, double alpha) {
  if (batch.empty()) throw ContractError("evasion objective needs a non-empty batch");
  if (alpha < 0.0) throw ContractError("alpha must be non-negative");
  const std::size_t c = model.channels();
  const std::size_t t = model.samples();
  Tensor xb({batch.size(), c, t});
  std::vector<int> labels;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    std::memcpy(xb.data() + i * c * t, batch[i]->data.data(), c * t * sizeof(double));
    labels.push_back(batch[i]->label);
  }
  ad::Graph g;
  ad::Var obj = objective_var(g, g.constant(W), std::move(xb), labels, model, alpha);
  return obj.value()[0];
}

SpatialFilter generate_evasion_filter(const eeg::EegDataset& train,
                                      const eeg::EegDataset& validation,
                                      const models::VictimModel& model, const EvasionConfig& cfg,
                                      std::vector<AlphaTraceEntry>* trace) {
  train.validate();
  validation.validate();
  if (cfg.search_steps < 1 || cfg.epochs < 1) {
    throw ConfigError("evasion search needs S >= 1 and M >= 1");
  }
  if (!(cfg.alpha0 > 0.0)) throw ConfigError("alpha0 must be positive");
  if (cfg.batch_size < 1 || cfg.lr <= 0.0) throw ConfigError("bad evasion batch size or lr");
  const std::size_t c = model.channels();
  if (train.channels() != c || validation.channels() != c) {
    throw ShapeError("evasion data does not match the model channel count");
  }
  const int k = model.classes();
  const double chance = 1.0 / static_cast<double>(k);

  double alpha = cfg.alpha0;
  double alpha_hi = cfg.alpha_max;
  double alpha_lo = 0.0;

  struct Candidate {
    Tensor w;
    double alpha;
    double bca;
  };
  std::optional<Candidate> best;
  Candidate last;

  const std::size_t n = train.size();
  for (int step = 0; step < cfg.search_steps; ++step) {
    Rng init_rng = make_rng(derive_seed(cfg.seed, 0xF117 + static_cast<std::uint64_t>(step)));
    Tensor w = identity_plus_noise(c, cfg.init_std, init_rng);
    Rng batch_rng = make_rng(derive_seed(cfg.seed, 0xBA7C + static_cast<std::uint64_t>(step)));
    ad::Adam adam({cfg.lr});

    for (int m = 0; m < cfg.epochs; ++m) {
      const auto order = shuffled_indices(n, batch_rng);
      for (std::size_t start = 0; start < n; start += cfg.batch_size) {
        const std::size_t stop = std::min(n, start + cfg.batch_size);
        std::vector<std::size_t> idx(order.begin() + start, order.begin() + stop);
        std::vector<int> labels;
        Tensor xb = stack_batch(train, idx, labels);
        ad::Graph g;
        ad::Var wv = g.param(w);
        ad::Var obj = objective_var(g, wv, std::move(xb), labels, model, alpha);
        g.backward(obj);
        adam.step({&w}, {&wv.grad()});
      }
    }

    const double bca = filtered_bca(w, validation, model);
    const bool accepted = bca <= chance + 1e-12;
    if (trace) trace->push_back({step, alpha, bca, accepted});
    last = {w, alpha, bca};
    if (accepted) {
      if (!best || alpha > best->alpha) best = Candidate{std::move(w), alpha, bca};
      alpha_lo = std::max(alpha_lo, alpha);
    } else {
      alpha_hi = std::min(alpha_hi, alpha);
    }
    alpha = (alpha_hi + alpha_lo) / 2.0;
  }

  SpatialFilter out;
  out.provenance = Provenance::Adversarial;
  out.seed = cfg.seed;
  if (best) {
    out.W = std::move(best->w);
    out.alpha = best->alpha;
    out.accepted = true;
    out.validation_bca = best->bca;
  } else {
    out.W = std::move(last.w);
    out.alpha = last.alpha;
    out.accepted = false;
    out.validation_bca = last.bca;
  }
  return out;
}

SpatialFilter make_noisy_baseline(std::size_t channels, std::uint64_t seed) {
  if (channels < 1) throw ContractError("noisy baseline needs at least one channel");
  Rng rng = make_rng(derive_seed(seed, 0x11015E));
  SpatialFilter f;
  f.W = identity_plus_noise(channels, 0.01, rng);
  f.provenance = Provenance::NoisyBaseline;
  f.seed = seed;
  return f;
}

// ---- backdoor ----------------------------------------------------------------

SpatialFilter make_backdoor_key(std::size_t channels, const BackdoorConfig& cfg) {
  if (channels < 2) throw ContractError("backdoor key needs at least two channels");
  std::size_t zeroed = cfg.zeroed_channels < 0 ? (channels + 1) / 2
                                               : static_cast<std::size_t>(cfg.zeroed_channels);
  if (zeroed > channels) {
    throw ConfigError("cannot zero " + std::to_string(zeroed) + " of " +
                      std::to_string(channels) + " channels");
  }
  Rng rng = make_rng(derive_seed(cfg.seed, 0xBDC0));
  Tensor noise = gauss_tensor(rng, {channels, channels}, 0.0, cfg.noise_std);
  const auto rows = shuffled_indices(channels, rng);
  for (std::size_t i = 0; i < zeroed; ++i) {
    double* row = noise.data() + rows[i] * channels;
    std::fill(row, row + channels, 0.0);
  }
  SpatialFilter f;
  f.W = Tensor::identity(channels);
  for (std::size_t i = 0; i < f.W.size(); ++i) f.W[i] += noise[i];
  f.provenance = Provenance::BackdoorKey;
  f.seed = cfg.seed;
  return f;
}

PoisonResult poison(const eeg::EegDataset& ds, const SpatialFilter& key,
                    const BackdoorConfig& cfg) {
  ds.validate();
  if (!(cfg.ratio > 0.0) || !(cfg.ratio < 1.0)) {
    throw ConfigError("poisoning ratio must be in (0,1), got " + std::to_string(cfg.ratio));
  }
  if (cfg.target_class < 0 || cfg.target_class >= ds.num_classes) {
    throw ConfigError("target class " + std::to_string(cfg.target_class) + " out of range");
  }
  const std::size_t n = ds.size();
  const std::size_t n_poison =
      static_cast<std::size_t>(std::lround(cfg.ratio * static_cast<double>(n)));
  if (n_poison == 0) {
    throw ConfigError("poisoning ratio " + std::to_string(cfg.ratio) + " of " +
                      std::to_string(n) + " trials rounds to zero");
  }

  Rng rng = make_rng(derive_seed(cfg.seed, 0x9015));
  auto order = shuffled_indices(n, rng);
  std::vector<std::size_t> chosen(order.begin(), order.begin() + n_poison);
  std::sort(chosen.begin(), chosen.end());

  PoisonResult out;
  out.dataset = ds;
  out.dataset.name = ds.name + "-poisoned";
  for (std::size_t i : chosen) {
    eeg::EegTrial& trial = out.dataset.trials[i];
    trial = apply(key, trial);
    trial.label = cfg.target_class;
  }
  out.poisoned_indices = std::move(chosen);
  return out;
}

namespace {
eeg::EegDataset nontarget_subset(const eeg::EegDataset& ds, int target) {
  eeg::EegDataset out;
  out.num_classes = ds.num_classes;
  out.name = ds.name;
  for (const auto& t : ds.trials) {
    if (t.label != target) out.trials.push_back(t);
  }
  return out;
}
}  // namespace

BackdoorOutcome run_backdoor_attack(const eeg::EegDataset& train, const eeg::EegDataset& test,
                                    const models::ModelSpec& spec, const SpatialFilter& key,
                                    const BackdoorConfig& cfg,
                                    const models::TrainConfig& train_cfg) {
  train.validate();
  test.validate();
  const auto poisoned = poison(train, key, cfg);

  auto poisoned_model = models::make_model(spec, train.channels(), train.samples(),
                                           train.num_classes);
  poisoned_model->fit(poisoned.dataset, train_cfg, nullptr);
  auto clean_model = models::make_model(spec, train.channels(), train.samples(),
                                        train.num_classes);
  clean_model->fit(train, train_cfg, nullptr);

  const eeg::EegDataset keyed = apply(key, nontarget_subset(test, cfg.target_class));

  BackdoorOutcome out;
  out.poisoned_count = poisoned.poisoned_indices.size();
  out.clean_bca = metrics::bca(poisoned_model->predict(test), test.labels(), test.num_classes);
  out.keyed_asr = metrics::asr(poisoned_model->predict(keyed), keyed.labels(), cfg.target_class,
                               test.num_classes);
  out.baseline_bca = metrics::bca(clean_model->predict(test), test.labels(), test.num_classes);
  out.baseline_asr = metrics::asr(clean_model->predict(keyed), keyed.labels(), cfg.target_class,
                                  test.num_classes);
  return out;
}

// ---- serialization -----------------------------------------------------------

namespace {
void write_file(const std::filesystem::path& path, const std::string& bytes) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write '" + tmp.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.close();
  if (!out) throw FormatError("write failed for '" + tmp.string() + "'");
  std::filesystem::rename(tmp, path);
}

std::vector<char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}
}  // namespace

void save_filter(const std::filesystem::path& stem, const SpatialFilter& filter) {
  if (filter.W.rank() != 2 || filter.W.dim(0) != filter.W.dim(1)) {
    throw ContractError("spatial filter must be square, got " + filter.W.shape_str());
  }
  std::string blob;
  blob.reserve(filter.W.size() * sizeof(float));
  for (std::size_t i = 0; i < filter.W.size(); ++i) {
    const float v = static_cast<float>(filter.W[i]);
    blob.append(reinterpret_cast<const char*>(&v), sizeof(float));
  }
  json manifest;
  manifest["format"] = "adfilt-filter";
  manifest["version"] = 1;
  manifest["C"] = filter.channels();
  manifest["provenance"] = to_string(filter.provenance);
  manifest["seed"] = filter.seed;
  manifest["alpha"] = filter.alpha;
  manifest["accepted"] = filter.accepted;
  manifest["validation_bca"] = filter.validation_bca;
  manifest["blob"] = stem.filename().string() + ".bin";
  manifest["blob_bytes"] = blob.size();
  write_file(stem.string() + ".json", manifest.dump(2) + "\n");
  write_file(stem.string() + ".bin", blob);
}

SpatialFilter load_filter(const std::filesystem::path& stem) {
  const auto manifest_path = std::filesystem::path(stem.string() + ".json");
  json manifest;
  try {
    manifest = json::parse(read_file(manifest_path));
  } catch (const json::parse_error& e) {
    throw FormatError(manifest_path.string() + ": " + e.what(), e.byte);
  }
  try {
    if (manifest.at("format").get<std::string>() != "adfilt-filter") {
      throw FormatError(manifest_path.string() + ": not a filter manifest");
    }
    const std::size_t c = manifest.at("C").get<std::size_t>();
    const auto blob_path = stem.parent_path() / manifest.at("blob").get<std::string>();
    const auto blob = read_file(blob_path);
    if (blob.size() != manifest.at("blob_bytes").get<std::size_t>() ||
        blob.size() != c * c * sizeof(float)) {
      throw FormatError(blob_path.string() + ": blob is " + std::to_string(blob.size()) +
                        " bytes, expected " + std::to_string(c * c * sizeof(float)));
    }
    SpatialFilter f;
    f.W = Tensor({c, c});
    for (std::size_t i = 0; i < c * c; ++i) {
      float v;
      std::memcpy(&v, blob.data() + i * sizeof(float), sizeof(float));
      f.W[i] = static_cast<double>(v);
    }
    f.provenance = provenance_from_string(manifest.at("provenance").get<std::string>());
    f.seed = manifest.at("seed").get<std::uint64_t>();
    f.alpha = manifest.at("alpha").get<double>();
    f.accepted = manifest.at("accepted").get<bool>();
    f.validation_bca = manifest.at("validation_bca").get<double>();
    if (f.provenance == Provenance::Identity) {
      if (max_abs_diff(f.W, Tensor::identity(c)) != 0.0) {
        throw FormatError(manifest_path.string() +
                          ": identity provenance but the blob is not the identity matrix");
      }
    }
    return f;
  } catch (const json::exception& e) {
    throw FormatError(manifest_path.string() + ": " + e.what());
  }
}

}  // namespace adfilt::attacks
