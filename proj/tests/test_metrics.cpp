#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "adfilt/metrics.hpp"
#include "testutil.hpp"

using namespace adfilt;
using namespace adfilt::metrics;

TEST_CASE("bca: perfect, degenerate and hand-enumerated cases") {
  CHECK(bca({0, 1, 0, 1}, {0, 1, 0, 1}, 2) == 1.0);
  // three samples of class 0, one of class 1, everything predicted 0
  CHECK(bca({0, 0, 0, 0}, {0, 0, 0, 1}, 2) == doctest::Approx(0.5));
  CHECK_THROWS_AS(bca({0, 0}, {0, 0}, 2), ContractError);  // class 1 missing
  CHECK_THROWS_AS(bca({0}, {0, 1}, 2), ContractError);     // length mismatch
}

TEST_CASE("bca of a uniform random predictor is near chance") {
  auto gen = testutil::rng(3);
  std::uniform_int_distribution<int> d(0, 3);
  std::vector<int> labels, preds;
  for (int i = 0; i < 8000; ++i) {
    labels.push_back(d(gen));
    preds.push_back(d(gen));
  }
  CHECK(bca(preds, labels, 4) == doctest::Approx(0.25).epsilon(0.12));
}

TEST_CASE("bca is invariant to sample order and equivariant to renaming") {
  auto gen = testutil::rng(5);
  std::uniform_int_distribution<int> d(0, 2);
  std::vector<int> labels, preds;
  for (int i = 0; i < 300; ++i) {
    labels.push_back(d(gen));
    preds.push_back(d(gen));
  }
  const double before = bca(preds, labels, 3);

  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), gen);
  std::vector<int> labels2, preds2;
  for (std::size_t i : order) {
    labels2.push_back(labels[i]);
    preds2.push_back(preds[i]);
  }
  CHECK(bca(preds2, labels2, 3) == before);

  // consistent class renaming 0->2, 1->0, 2->1
  const int perm[3] = {2, 0, 1};
  std::vector<int> labels3, preds3;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    labels3.push_back(perm[labels[i]]);
    preds3.push_back(perm[preds[i]]);
  }
  CHECK(bca(preds3, labels3, 3) == doctest::Approx(before).epsilon(1e-12));
}

TEST_CASE("asr: hand-enumerated cases") {
  // every keyed prediction hits the target
  CHECK(asr({0, 0, 0}, {1, 1, 1}, 0, 2) == 1.0);
  // labels [1,1,1,0], predictions [0,1,0,0], target 0: 2 of 3 non-target hits
  CHECK(asr({0, 1, 0, 0}, {1, 1, 1, 0}, 0, 2) == doctest::Approx(2.0 / 3.0));
  // all samples belong to the target class: undefined
  CHECK_THROWS_AS(asr({0, 0}, {0, 0}, 0, 2), ContractError);
}

TEST_CASE("asr of a uniform random predictor is near 1/K") {
  auto gen = testutil::rng(7);
  std::uniform_int_distribution<int> d(0, 3);
  std::vector<int> labels, preds;
  for (int i = 0; i < 8000; ++i) {
    labels.push_back(d(gen));
    preds.push_back(d(gen));
  }
  CHECK(asr(preds, labels, 2, 4) == doctest::Approx(0.25).epsilon(0.12));
}

TEST_CASE("for K=2 asr complements the non-target accuracy") {
  auto gen = testutil::rng(9);
  std::uniform_int_distribution<int> d(0, 1);
  std::vector<int> labels, preds;
  for (int i = 0; i < 500; ++i) {
    labels.push_back(d(gen));
    preds.push_back(d(gen));
  }
  const int target = 0;
  // within-class accuracy of class 1
  int n1 = 0, correct1 = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1) {
      ++n1;
      if (preds[i] == 1) ++correct1;
    }
  }
  const double acc1 = static_cast<double>(correct1) / n1;
  CHECK(asr(preds, labels, target, 2) == doctest::Approx(1.0 - acc1));
}

namespace {
eeg::EegDataset random_set(std::size_t n, std::size_t c, std::size_t t, std::uint64_t seed) {
  auto gen = testutil::rng(seed);
  eeg::EegDataset ds;
  ds.num_classes = 2;
  ds.name = "r";
  for (std::size_t i = 0; i < n; ++i) {
    eeg::EegTrial trial;
    trial.fs = 128.0;
    trial.label = static_cast<int>(i % 2);
    trial.data = testutil::random_tensor({c, t}, gen);
    ds.trials.push_back(std::move(trial));
  }
  return ds;
}
}  // namespace

TEST_CASE("rmse distortion: zero, constant shift, and brute force") {
  const eeg::EegDataset before = random_set(6, 3, 10, 11);
  CHECK(rmse_distortion(before, before).global == 0.0);

  eeg::EegDataset shifted = before;
  for (auto& trial : shifted.trials) {
    for (std::size_t i = 0; i < trial.data.size(); ++i) trial.data[i] += -2.5;
  }
  const Distortion d = rmse_distortion(before, shifted);
  CHECK(d.global == doctest::Approx(2.5).epsilon(1e-12));
  for (double pc : d.per_channel) CHECK(pc == doctest::Approx(2.5).epsilon(1e-12));

  const eeg::EegDataset after = random_set(6, 3, 10, 13);
  const Distortion r = rmse_distortion(before, after);
  double acc = 0.0;
  std::vector<double> per_ch(3, 0.0);
  for (std::size_t i = 0; i < before.size(); ++i) {
    for (std::size_t ch = 0; ch < 3; ++ch) {
      for (std::size_t s = 0; s < 10; ++s) {
        const double diff = after.trials[i].data.at(ch, s) - before.trials[i].data.at(ch, s);
        acc += diff * diff;
        per_ch[ch] += diff * diff;
      }
    }
  }
  CHECK(r.global == doctest::Approx(std::sqrt(acc / (6 * 3 * 10))).epsilon(1e-12));
  for (std::size_t ch = 0; ch < 3; ++ch) {
    CHECK(r.per_channel[ch] == doctest::Approx(std::sqrt(per_ch[ch] / 60)).epsilon(1e-12));
  }

  eeg::EegDataset mismatched = before;
  mismatched.trials.pop_back();
  CHECK_THROWS_AS(rmse_distortion(before, mismatched), ShapeError);
}

TEST_CASE("identity filter column of the transfer matrix equals clean BCAs") {
  eeg::SyntheticSpec spec;
  spec.channels = 6;
  spec.samples = 64;
  spec.classes = 2;
  spec.trials_per_class = 20;
  spec.subjects = 1;
  spec.noise_std = 0.2;
  spec.seed = 15;
  const eeg::EegDataset ds = eeg::zscore(eeg::synthesize(spec));

  models::ModelSpec ms;
  ms.kind = models::ModelKind::CspLr;
  auto m1 = models::make_model(ms, ds.channels(), ds.samples(), 2);
  models::TrainConfig tc;
  tc.seed = 16;
  m1->fit(ds, tc, nullptr);
  ms.spatial_filters = 2;
  auto m2 = models::make_model(ms, ds.channels(), ds.samples(), 2);
  m2->fit(ds, tc, nullptr);

  const attacks::SpatialFilter eye = attacks::SpatialFilter::identity(ds.channels());
  const Tensor m = transferability_matrix({m1.get(), m2.get()}, {&eye}, ds);
  CHECK(m.at(0, 0) == bca(m1->predict(ds), ds.labels(), 2));
  CHECK(m.at(0, 1) == bca(m2->predict(ds), ds.labels(), 2));
}
