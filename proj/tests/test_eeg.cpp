#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "adfilt/eeg.hpp"
#include "testutil.hpp"

using namespace adfilt;
using namespace adfilt::eeg;
using testutil::dft_amplitude;
using testutil::signal_power;

namespace {

EegTrial sine_trial(double freq, double fs, std::size_t t, std::size_t c = 1,
                    double amplitude = 1.0) {
  EegTrial trial;
  trial.fs = fs;
  trial.data = Tensor({c, t});
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t i = 0; i < t; ++i) {
      trial.data.at(ch, i) =
          amplitude * std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(i) / fs);
    }
  }
  return trial;
}

}  // namespace

TEST_CASE("band-pass removes DC") {
  EegTrial dc;
  dc.fs = 128.0;
  dc.data = Tensor::full({1, 512}, 3.0);
  const EegTrial out = bandpass(dc, 1.0, 40.0);
  CHECK(out.samples() == 512);
  const double pin = signal_power(dc.data.data(), 512);
  const double pout = signal_power(out.data.data(), 512);
  CHECK(pout < 1e-3 * pin);
}

TEST_CASE("band-pass preserves the passband centre") {
  const EegTrial in = sine_trial(10.0, 128.0, 512);
  const EegTrial out = bandpass(in, 1.0, 40.0);
  const double a_in = dft_amplitude(in.data.data(), 512, 10.0, 128.0);
  const double a_out = dft_amplitude(out.data.data(), 512, 10.0, 128.0);
  CHECK(a_out == doctest::Approx(a_in).epsilon(0.05));
}

TEST_CASE("band-pass attenuates the stopband by 20 dB") {
  const EegTrial in = sine_trial(60.0, 256.0, 1024);
  const EegTrial out = bandpass(in, 1.0, 40.0);
  const double a_in = dft_amplitude(in.data.data(), 1024, 60.0, 256.0);
  const double a_out = dft_amplitude(out.data.data(), 1024, 60.0, 256.0);
  CHECK(20.0 * std::log10(a_in / a_out) >= 20.0);
}

TEST_CASE("band edge at or beyond Nyquist is rejected") {
  const EegTrial in = sine_trial(10.0, 128.0, 256);
  CHECK_THROWS_AS(bandpass(in, 1.0, 64.0), DomainError);
  CHECK_THROWS_AS(bandpass(in, 0.0, 40.0), DomainError);
}

TEST_CASE("downsample halves the sample count") {
  const EegTrial in = sine_trial(5.0, 256.0, 512);
  const EegTrial out = downsample(in, 128.0);
  CHECK(out.samples() == 256);
  CHECK(out.fs == 128.0);
}

TEST_CASE("downsample keeps a constant signal constant") {
  EegTrial in;
  in.fs = 256.0;
  in.data = Tensor::full({2, 512}, 2.5);
  const EegTrial out = downsample(in, 128.0);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    CHECK(out.data[i] == doctest::Approx(2.5).epsilon(1e-6));
  }
}

TEST_CASE("downsample preserves a 5 Hz tone") {
  const EegTrial in = sine_trial(5.0, 256.0, 1024);
  const EegTrial out = downsample(in, 128.0);
  const double a = dft_amplitude(out.data.data(), out.samples(), 5.0, 128.0);
  CHECK(a == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("non-integer decimation factor is rejected") {
  const EegTrial in = sine_trial(5.0, 200.0, 400);
  CHECK_THROWS_AS(downsample(in, 128.0), DomainError);
}

TEST_CASE("zscore matches the hand-computed population result") {
  EegTrial t;
  t.fs = 10;
  t.data = Tensor({1, 3}, {1.0, 2.0, 3.0});
  const EegTrial z = zscore(t);
  CHECK(z.data[0] == doctest::Approx(-1.2247).epsilon(1e-4));
  CHECK(z.data[1] == doctest::Approx(0.0));
  CHECK(z.data[2] == doctest::Approx(1.2247).epsilon(1e-4));
}

TEST_CASE("zscore is idempotent and zeroes constant channels") {
  auto gen = testutil::rng(5);
  EegTrial t;
  t.fs = 128;
  t.data = testutil::random_tensor({3, 64}, gen);
  const EegTrial z1 = zscore(t);
  const EegTrial z2 = zscore(z1);
  CHECK(max_abs_diff(z1.data, z2.data) < 1e-9);
  for (std::size_t ch = 0; ch < 3; ++ch) {
    double mean = 0.0, var = 0.0;
    for (std::size_t i = 0; i < 64; ++i) mean += z1.data.at(ch, i);
    mean /= 64.0;
    for (std::size_t i = 0; i < 64; ++i) {
      var += (z1.data.at(ch, i) - mean) * (z1.data.at(ch, i) - mean);
    }
    var /= 64.0;
    CHECK(std::abs(mean) < 1e-9);
    CHECK(std::abs(std::sqrt(var) - 1.0) < 1e-6);
  }
  EegTrial c;
  c.fs = 10;
  c.data = Tensor::full({1, 3}, 5.0);
  const EegTrial zc = zscore(c);
  CHECK(max_abs_diff(zc.data, Tensor({1, 3})) == 0.0);
}

TEST_CASE("epoch sample counts match the paper's windows") {
  EegTrial rec;
  rec.fs = 128.0;
  rec.data = Tensor({2, 1024});
  CHECK(epoch(rec, 0.0, 0.0, 1.3).samples() == 166);
  CHECK(epoch(rec, 1.0, 0.5, 2.5).samples() == 256);
  CHECK(epoch(rec, 0.0, 0.0, 1.0).samples() == 128);
  CHECK_THROWS_AS(epoch(rec, 7.5, 0.0, 1.0), ContractError);
  CHECK_THROWS_AS(epoch(rec, 0.0, 1.0, 1.0), ContractError);
}

TEST_CASE("preprocessing pipeline is near-idempotent after the first pass") {
  // In-band tones, so the only second-pass deviation is filter passband
  // ripple plus reflection-padding edge effects (~1e-2 on the z scale; the
  // Hamming windowed-sinc design cannot do better than that).
  EegTrial raw;
  raw.fs = 256.0;
  raw.data = Tensor({3, 2048});
  for (std::size_t ch = 0; ch < 3; ++ch) {
    for (std::size_t i = 0; i < 2048; ++i) {
      const double t = static_cast<double>(i) / raw.fs;
      raw.data.at(ch, i) = std::sin(2.0 * std::numbers::pi * (7.0 + 4.0 * ch) * t + 0.3 * ch) +
                           0.5 * std::sin(2.0 * std::numbers::pi * 19.0 * t);
    }
  }
  auto pipeline = [](const EegTrial& t) {
    return zscore(downsample(bandpass(t, 1.0, 40.0), 128.0));
  };
  const EegTrial once = pipeline(raw);
  const EegTrial twice = pipeline(once);  // downsample factor is 1 on the second pass
  // compare away from the edges, where reflection transients live
  const std::size_t t_out = once.samples();
  const std::size_t crop = 256;  // half the 1 Hz filter length at 128 Hz
  double m = 0.0;
  for (std::size_t ch = 0; ch < once.channels(); ++ch) {
    for (std::size_t i = crop; i + crop < t_out; ++i) {
      m = std::max(m, std::abs(once.data.at(ch, i) - twice.data.at(ch, i)));
    }
  }
  CHECK(m < 0.05);
}

TEST_CASE("bandpass and downsample are linear per channel") {
  auto gen = testutil::rng(13);
  EegTrial x, y;
  x.fs = y.fs = 256.0;
  x.data = testutil::random_tensor({2, 512}, gen);
  y.data = testutil::random_tensor({2, 512}, gen);
  const double a = 1.7, b = -2.3;
  EegTrial combo = x;
  for (std::size_t i = 0; i < combo.data.size(); ++i) {
    combo.data[i] = a * x.data[i] + b * y.data[i];
  }
  auto linear_part = [](const EegTrial& t) { return downsample(bandpass(t, 1.0, 40.0), 128.0); };
  const EegTrial px = linear_part(x);
  const EegTrial py = linear_part(y);
  const EegTrial pc = linear_part(combo);
  for (std::size_t i = 0; i < pc.data.size(); ++i) {
    CHECK(pc.data[i] == doctest::Approx(a * px.data[i] + b * py.data[i]).epsilon(1e-9));
  }
}

TEST_CASE("synthesize is deterministic under the seed") {
  SyntheticSpec spec;
  spec.trials_per_class = 4;
  spec.subjects = 2;
  spec.seed = 42;
  const EegDataset a = synthesize(spec);
  const EegDataset b = synthesize(spec);
  REQUIRE(a.size() == b.size());
  CHECK(a.size() == 2 * 4 * 2);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(max_abs_diff(a.trials[i].data, b.trials[i].data) == 0.0);
    CHECK(a.trials[i].label == b.trials[i].label);
    CHECK(a.trials[i].subject == b.trials[i].subject);
  }
}

TEST_CASE("identical class templates are rejected") {
  SyntheticSpec spec;
  spec.trials_per_class = 2;
  spec.subjects = 1;
  const auto tpl = resolve_templates(spec);
  SyntheticSpec bad = spec;
  bad.templates = {tpl[0], tpl[0]};
  CHECK_THROWS_AS(synthesize(bad), ContractError);
}

TEST_CASE("dataset validation catches bad invariants") {
  SyntheticSpec spec;
  spec.trials_per_class = 2;
  spec.subjects = 1;
  EegDataset ds = synthesize(spec);
  EegDataset missing = ds;
  for (auto& t : missing.trials) t.label = 0;  // class 1 disappears
  CHECK_THROWS_AS(missing.validate(), ContractError);
  EegDataset ragged = ds;
  ragged.trials[1].data = Tensor({ds.channels(), ds.samples() + 1});
  CHECK_THROWS_AS(ragged.validate(), ShapeError);
}
