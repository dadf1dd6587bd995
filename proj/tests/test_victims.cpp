#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "adfilt/linalg.hpp"
#include "adfilt/metrics.hpp"
#include "adfilt/victims.hpp"
#include "testutil.hpp"

using namespace adfilt;
using namespace adfilt::eeg;
using namespace adfilt::models;
namespace fs = std::filesystem;

namespace {

EegDataset gaussian_dataset(std::size_t c, std::size_t t, int k, int per_class,
                            std::uint64_t seed, double ch0_boost = 1.0, double ch1_boost = 1.0) {
  auto gen = testutil::rng(seed);
  std::normal_distribution<double> d(0.0, 1.0);
  EegDataset ds;
  ds.num_classes = k;
  ds.name = "gaussian";
  for (int cls = 0; cls < k; ++cls) {
    for (int i = 0; i < per_class; ++i) {
      EegTrial trial;
      trial.fs = 128.0;
      trial.label = cls;
      trial.subject = 0;
      trial.data = Tensor({c, t});
      for (std::size_t ch = 0; ch < c; ++ch) {
        double scale = 0.2;
        if (cls == 0 && ch == 0) scale = ch0_boost;
        if (cls == 1 && ch == 1) scale = ch1_boost;
        for (std::size_t s = 0; s < t; ++s) trial.data.at(ch, s) = scale * d(gen);
      }
      ds.trials.push_back(std::move(trial));
    }
  }
  return ds;
}

SyntheticSpec small_synth(int classes = 2, double noise = 0.0, std::uint64_t seed = 3) {
  SyntheticSpec spec;
  spec.channels = 6;
  spec.samples = 64;
  spec.fs = 128.0;
  spec.classes = classes;
  spec.trials_per_class = 20;
  spec.subjects = 1;
  spec.noise_std = noise;
  spec.seed = seed;
  return spec;
}

ModelSpec tiny_cnn_spec() {
  ModelSpec spec;
  spec.kind = ModelKind::CompactCnn;
  spec.cnn.temporal_filters = 2;
  spec.cnn.temporal_kernel = 9;
  spec.cnn.depth_multiplier = 1;
  spec.cnn.separable_filters = 4;
  spec.cnn.separable_kernel = 5;
  spec.cnn.pool1 = 4;
  spec.cnn.pool2 = 4;
  return spec;
}

fs::path temp_dir() {
  const fs::path dir = fs::temp_directory_path() / "adfilt_victims_test";
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("CSP filters align with the discriminative axes") {
  // class 0: variance only on channel 0; class 1: only on channel 1
  const EegDataset ds = gaussian_dataset(2, 256, 2, 30, 7, 3.0, 3.0);
  const CspResult r = fit_csp(ds, 2);
  REQUIRE(r.projection.dim(0) == 2);
  for (std::size_t f = 0; f < 2; ++f) {
    const double w0 = r.projection.at(f, 0);
    const double w1 = r.projection.at(f, 1);
    const double norm = std::sqrt(w0 * w0 + w1 * w1);
    const double cos0 = std::abs(w0) / norm;
    const double cos1 = std::abs(w1) / norm;
    CHECK(std::max(cos0, cos1) > 0.99);
  }
}

TEST_CASE("identical class distributions give eigenvalues near one half") {
  EegDataset ds = gaussian_dataset(4, 256, 2, 40, 11);
  // same generator parameters for both classes: relabel half of class 0
  for (auto& t : ds.trials) t.label = 0;
  for (std::size_t i = 0; i < ds.size(); i += 2) ds.trials[i].label = 1;
  const CspResult r = fit_csp(ds, 4);
  for (double v : r.eigenvalues) CHECK(v == doctest::Approx(0.5).epsilon(0.15));
}

TEST_CASE("CSP rows satisfy the generalized eigen-equation") {
  const EegDataset ds = gaussian_dataset(5, 128, 2, 25, 13, 2.0, 1.5);
  const CspResult r = fit_csp(ds, 4);
  for (std::size_t f = 0; f < r.projection.dim(0); ++f) {
    std::vector<double> w(5);
    for (std::size_t c = 0; c < 5; ++c) w[c] = r.projection.at(f, c);
    const Tensor lhs = linalg::matvec(r.sigma_target, w);
    const Tensor rhs = linalg::matvec(r.sigma_sum, w);
    for (std::size_t c = 0; c < 5; ++c) {
      CHECK(std::abs(lhs[c] - r.eigenvalues[f] * rhs[c]) < 1e-6);
    }
  }
}

TEST_CASE("CSP preconditions") {
  const EegDataset ds = gaussian_dataset(4, 64, 2, 10, 17);
  CHECK_THROWS_AS(fit_csp(ds, 3), ContractError);   // odd
  CHECK_THROWS_AS(fit_csp(ds, 6), ContractError);   // > C
  const EegDataset ds4 = gaussian_dataset(4, 64, 4, 6, 19);
  CHECK_THROWS_AS(fit_csp(ds4, 4), ContractError);  // K != 2
  const Tensor ovr = fit_csp_ovr(ds4, 4);
  CHECK(ovr.dim(0) == 4);  // one filter per class
  CHECK(ovr.dim(1) == 4);
}

TEST_CASE("xDAWN recovers a distributed evoked pattern") {
  // evoked template lives on an even spread across 12 channels, so no
  // single channel sees more than 1/12 of its power
  const std::size_t c = 12, t = 64;
  auto gen = testutil::rng(23);
  std::normal_distribution<double> noise(0.0, 0.05);
  std::vector<double> v(c);
  for (std::size_t i = 0; i < c; ++i) v[i] = (i % 2 == 0 ? 1.0 : -1.0) / std::sqrt(12.0);

  EegDataset ds;
  ds.num_classes = 2;
  ds.name = "evoked";
  for (int cls = 0; cls < 2; ++cls) {
    for (int i = 0; i < 30; ++i) {
      EegTrial trial;
      trial.fs = 128.0;
      trial.label = cls;
      trial.data = Tensor({c, t});
      for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t s = 0; s < t; ++s) {
          double val = noise(gen);
          if (cls == 1) {
            val += v[ch] * std::sin(2.0 * std::numbers::pi * 6.0 * static_cast<double>(s) / 128.0);
          }
          trial.data.at(ch, s) = val;
        }
      }
      ds.trials.push_back(std::move(trial));
    }
  }
  const XdawnResult r = fit_xdawn(ds, 2, 1);

  // evoked response and SNR oracle
  Tensor evoked({c, t});
  int n_target = 0;
  for (const auto& trial : ds.trials) {
    if (trial.label != 1) continue;
    for (std::size_t i = 0; i < evoked.size(); ++i) evoked[i] += trial.data[i];
    ++n_target;
  }
  for (std::size_t i = 0; i < evoked.size(); ++i) evoked[i] /= n_target;

  auto snr_of = [&](const std::vector<double>& w) {
    double sig = 0.0;
    for (std::size_t s = 0; s < t; ++s) {
      double acc = 0.0;
      for (std::size_t ch = 0; ch < c; ++ch) acc += w[ch] * evoked.at(ch, s);
      sig += acc * acc;
    }
    double noise_pow = 0.0;
    int n = 0;
    for (const auto& trial : ds.trials) {
      if (trial.label != 1) continue;
      for (std::size_t s = 0; s < t; ++s) {
        double acc = 0.0;
        for (std::size_t ch = 0; ch < c; ++ch) {
          acc += w[ch] * (trial.data.at(ch, s) - evoked.at(ch, s));
        }
        noise_pow += acc * acc;
      }
      ++n;
    }
    return sig / (noise_pow / n);
  };

  double best_single = 0.0;
  for (std::size_t ch = 0; ch < c; ++ch) {
    std::vector<double> e(c, 0.0);
    e[ch] = 1.0;
    best_single = std::max(best_single, snr_of(e));
  }
  std::vector<double> top(c);
  for (std::size_t ch = 0; ch < c; ++ch) top[ch] = r.projection.at(0, ch);
  CHECK(snr_of(top) >= 10.0 * best_single);
}

TEST_CASE("full xDAWN projection is square and full-rank") {
  const EegDataset ds = gaussian_dataset(4, 64, 2, 20, 29, 2.0, 1.3);
  const XdawnResult r = fit_xdawn(ds, 4, 1);
  CHECK(r.projection.dim(0) == 4);
  CHECK(r.projection.dim(1) == 4);
  const Tensor gram = linalg::matmul(r.projection, linalg::transpose(r.projection));
  const auto eig = linalg::eig_sym(gram);
  CHECK(eig.values.front() > 1e-12);
}

TEST_CASE("swapping the xDAWN target changes the projection") {
  const EegDataset ds = gaussian_dataset(4, 64, 2, 20, 31, 2.5, 1.2);
  const XdawnResult a = fit_xdawn(ds, 2, 1);
  const XdawnResult b = fit_xdawn(ds, 2, 0);
  CHECK(max_abs_diff(a.projection, b.projection) > 1e-3);
}

TEST_CASE("separable synthetic data trains to near-perfect training BCA") {
  const EegDataset ds = eeg::zscore(synthesize(small_synth(2, 0.0)));
  ModelSpec spec;
  spec.kind = ModelKind::CspLr;
  spec.spatial_filters = 4;
  auto model = make_model(spec, ds.channels(), ds.samples(), ds.num_classes);
  TrainConfig cfg;
  cfg.seed = 1;
  model->fit(ds, cfg, nullptr);
  const double train_bca = metrics::bca(model->predict(ds), ds.labels(), ds.num_classes);
  CHECK(train_bca >= 0.99);
  CHECK(model->loss_trace().back() < model->loss_trace().front());
}

TEST_CASE("shuffled labels land near chance on held-out data") {
  SyntheticSpec spec = small_synth(2, 0.3, 5);
  spec.trials_per_class = 60;
  EegDataset ds = eeg::zscore(synthesize(spec));
  auto gen = testutil::rng(99);
  std::vector<int> labels = ds.labels();
  std::shuffle(labels.begin(), labels.end(), gen);
  for (std::size_t i = 0; i < ds.size(); ++i) ds.trials[i].label = labels[i];

  EegDataset train = ds, test = ds;
  train.trials.assign(ds.trials.begin(), ds.trials.begin() + 80);
  test.trials.assign(ds.trials.begin() + 80, ds.trials.end());
  ModelSpec mspec;
  mspec.kind = ModelKind::CspLr;
  auto model = make_model(mspec, ds.channels(), ds.samples(), 2);
  TrainConfig cfg;
  cfg.seed = 2;
  model->fit(train, cfg, nullptr);
  const double test_bca = metrics::bca(model->predict(test), test.labels(), 2);
  CHECK(test_bca > 0.5 - 0.07);
  CHECK(test_bca < 0.5 + 0.07);
}

TEST_CASE("zero epochs leaves the model at its initialization") {
  const EegDataset ds = eeg::zscore(synthesize(small_synth()));
  auto model = make_model(tiny_cnn_spec(), ds.channels(), ds.samples(), 2);
  TrainConfig cfg;
  cfg.epochs = 0;
  cfg.seed = 77;
  model->fit(ds, cfg, nullptr);
  CompactCnnModel reference(tiny_cnn_spec(), ds.channels(), ds.samples(), 2);
  reference.init_params(77);
  CHECK(model->param_hash() == reference.param_hash());
}

TEST_CASE("prediction ties break toward the lower class index") {
  // an unfitted spatial model has a zero head: logits are all equal
  const EegDataset ds = eeg::zscore(synthesize(small_synth()));
  ModelSpec spec;
  spec.kind = ModelKind::CspLr;
  SpatialFeatureModel model(spec, ds.channels(), ds.samples(), 4);
  const auto proba = model.predict_proba(ds.trials[0]);
  for (double p : proba) CHECK(p == doctest::Approx(0.25));
  CHECK(model.predict(ds.trials[0]) == 0);
}

TEST_CASE("probabilities sum to one") {
  const EegDataset ds = eeg::zscore(synthesize(small_synth(2, 0.4, 9)));
  auto model = make_model(tiny_cnn_spec(), ds.channels(), ds.samples(), 2);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.seed = 5;
  model->fit(ds, cfg, nullptr);
  for (int i = 0; i < 10; ++i) {
    const auto p = model->predict_proba(ds.trials[i]);
    double sum = 0.0;
    for (double v : p) sum += v;
    CHECK(std::abs(sum - 1.0) < 1e-9);
  }
}

TEST_CASE("a separable model memorizes its tiny training set") {
  SyntheticSpec sspec = small_synth(2, 0.05, 21);
  sspec.trials_per_class = 6;
  const EegDataset ds = eeg::zscore(synthesize(sspec));
  ModelSpec spec;
  spec.kind = ModelKind::CspLr;
  auto model = make_model(spec, ds.channels(), ds.samples(), 2);
  TrainConfig cfg;
  cfg.seed = 3;
  model->fit(ds, cfg, nullptr);
  for (const auto& trial : ds.trials) CHECK(model->predict(trial) == trial.label);
}

TEST_CASE("CNN inference is batch-order independent") {
  const EegDataset ds = eeg::zscore(synthesize(small_synth(2, 0.4, 33)));
  auto model = make_model(tiny_cnn_spec(), ds.channels(), ds.samples(), 2);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.seed = 8;
  model->fit(ds, cfg, nullptr);

  const Tensor solo = model->batch_logits({&ds.trials[4]});
  const Tensor batch = model->batch_logits({&ds.trials[9], &ds.trials[4], &ds.trials[0]});
  CHECK(solo.at(0, 0) == batch.at(1, 0));
  CHECK(solo.at(0, 1) == batch.at(1, 1));
}

TEST_CASE("CSP log-variance features shift by 2 ln c under scaling") {
  const EegDataset ds = eeg::zscore(synthesize(small_synth(2, 0.2, 41)));
  ModelSpec spec;
  spec.kind = ModelKind::CspLr;
  SpatialFeatureModel model(spec, ds.channels(), ds.samples(), 2);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.seed = 4;
  model.fit(ds, cfg, nullptr);

  const double c = 3.7;
  EegTrial scaled = ds.trials[0];
  for (std::size_t i = 0; i < scaled.data.size(); ++i) scaled.data[i] *= c;
  const Tensor f0 = model.features(ds.trials[0]);
  const Tensor f1 = model.features(scaled);
  for (std::size_t i = 0; i < f0.size(); ++i) {
    CHECK(f1[i] - f0[i] == doctest::Approx(2.0 * std::log(c)).epsilon(1e-6));
  }
}

TEST_CASE("training-loss gradients match finite differences for every parameter") {
  SyntheticSpec sspec = small_synth(2, 0.3, 55);
  sspec.channels = 4;
  sspec.samples = 32;
  sspec.trials_per_class = 3;
  const EegDataset ds = eeg::zscore(synthesize(sspec));

  ModelSpec cnn = tiny_cnn_spec();
  cnn.cnn.temporal_kernel = 5;
  cnn.cnn.pool1 = 2;
  cnn.cnn.pool2 = 4;
  auto check_model = [&](std::unique_ptr<VictimModel> model) {
    std::vector<int> labels;
    Tensor xb({ds.size(), ds.channels(), ds.samples()});
    for (std::size_t i = 0; i < ds.size(); ++i) {
      labels.push_back(ds.trials[i].label);
      std::copy(ds.trials[i].data.data(), ds.trials[i].data.data() + ds.channels() * ds.samples(),
                xb.data() + i * ds.channels() * ds.samples());
    }
    const auto params = model->trainable();
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
      auto loss_with = [&](const Tensor& replaced) {
        const Tensor saved = *params[pi];
        *params[pi] = replaced;
        ad::Graph g;
        const double out =
            ad::softmax_cross_entropy(model->logits(g, g.constant(xb), nullptr), labels)
                .value()[0];
        *params[pi] = saved;
        return out;
      };
      ad::Graph g;
      std::vector<ad::Var> bound;
      ad::Var loss =
          ad::softmax_cross_entropy(model->logits(g, g.constant(xb), &bound), labels);
      g.backward(loss);
      const Tensor numeric = testutil::finite_diff(loss_with, *params[pi]);
      INFO("param " << pi << " err " << testutil::max_grad_err(bound[pi].grad(), numeric));
      CHECK(testutil::grads_close(bound[pi].grad(), numeric, 1e-4));
    }
  };

  auto cnn_model = make_model(cnn, ds.channels(), ds.samples(), 2);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.seed = 6;
  cnn_model->fit(ds, cfg, nullptr);
  check_model(std::move(cnn_model));

  ModelSpec csp;
  csp.kind = ModelKind::CspLr;
  csp.spatial_filters = 2;
  auto csp_model = make_model(csp, ds.channels(), ds.samples(), 2);
  csp_model->fit(ds, cfg, nullptr);
  check_model(std::move(csp_model));
}

TEST_CASE("early stopping restores the best weights") {
  SyntheticSpec sspec = small_synth(2, 0.4, 61);
  sspec.trials_per_class = 30;
  const EegDataset full = eeg::zscore(synthesize(sspec));
  EegDataset train = full, val = full;
  train.trials.assign(full.trials.begin(), full.trials.begin() + 40);
  val.trials.assign(full.trials.begin() + 40, full.trials.end());
  ModelSpec spec;
  spec.kind = ModelKind::CspLr;
  auto model = make_model(spec, full.channels(), full.samples(), 2);
  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.patience = 5;
  cfg.seed = 7;
  model->fit(train, cfg, &val);
  CHECK(model->loss_trace().size() <= 200);
}

TEST_CASE("model round-trip is stable at 32-bit precision") {
  const fs::path dir = temp_dir();
  const EegDataset ds = eeg::zscore(synthesize(small_synth(2, 0.3, 71)));
  auto model = make_model(tiny_cnn_spec(), ds.channels(), ds.samples(), 2);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.seed = 9;
  model->fit(ds, cfg, nullptr);
  save_model(dir / "m1", *model);
  const auto loaded = load_model(dir / "m1");
  CHECK(loaded->kind() == model->kind());

  // class predictions survive the f32 round trip
  for (int i = 0; i < 20; ++i) {
    CHECK(loaded->predict(ds.trials[i]) == model->predict(ds.trials[i]));
  }
  // the second generation is bit-exact
  save_model(dir / "m2", *loaded);
  const auto loaded2 = load_model(dir / "m2");
  for (int i = 0; i < 20; ++i) {
    const Tensor a = loaded->batch_logits({&ds.trials[i]});
    const Tensor b = loaded2->batch_logits({&ds.trials[i]});
    CHECK(max_abs_diff(a, b) == 0.0);
  }
  CHECK(loaded->param_hash() == loaded2->param_hash());

  // identical BCA after reload
  const double bca1 = metrics::bca(loaded->predict(ds), ds.labels(), 2);
  const double bca2 = metrics::bca(loaded2->predict(ds), ds.labels(), 2);
  CHECK(bca1 == bca2);
}

TEST_CASE("truncated parameter blob is a format error") {
  const fs::path dir = temp_dir();
  const EegDataset ds = eeg::zscore(synthesize(small_synth(2, 0.3, 73)));
  ModelSpec spec;
  spec.kind = ModelKind::CspLr;
  auto model = make_model(spec, ds.channels(), ds.samples(), 2);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.seed = 10;
  model->fit(ds, cfg, nullptr);
  save_model(dir / "trunc", *model);
  // chop the blob
  const fs::path blob = dir / "trunc.bin";
  std::ifstream in(blob, std::ios::binary);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  bytes.resize(bytes.size() - 5);
  std::ofstream out(blob, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.close();
  CHECK_THROWS_AS(load_model(dir / "trunc"), FormatError);
}

TEST_CASE("deep and shallow CNN variants forward correctly") {
  const EegDataset ds = eeg::zscore(synthesize(small_synth(2, 0.3, 79)));
  for (auto depth : {CnnSpec::Depth::Shallow, CnnSpec::Depth::Deep}) {
    ModelSpec spec = tiny_cnn_spec();
    spec.cnn.depth = depth;
    spec.cnn.pool1 = 2;
    spec.cnn.pool2 = 4;
    auto model = make_model(spec, ds.channels(), ds.samples(), 2);
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.seed = 11;
    model->fit(ds, cfg, nullptr);
    const auto p = model->predict_proba(ds.trials[0]);
    CHECK(p.size() == 2);
  }
}
