#include <cmath>
#include <numbers>

#include "adfilt/eeg.hpp"
#include "adfilt/rng.hpp"

namespace adfilt::eeg {

namespace {

bool templates_equal(const ClassTemplate& a, const ClassTemplate& b) {
  if (a.freqs_hz != b.freqs_hz || a.phases != b.phases) return false;
  if (!a.mixing.same_shape(b.mixing)) return false;
  return max_abs_diff(a.mixing, b.mixing) == 0.0;
}

}  // namespace

std::vector<ClassTemplate> resolve_templates(const SyntheticSpec& spec) {
  if (!spec.templates.empty()) {
    if (static_cast<int>(spec.templates.size()) != spec.classes) {
      throw ContractError("synthetic spec declares " + std::to_string(spec.templates.size()) +
                          " templates for " + std::to_string(spec.classes) + " classes");
    }
    return spec.templates;
  }
  // Derived templates: three sources per class at shared frequencies; the
  // classes differ in their channel-mixing matrices (and base phases), so
  // the discriminative structure is spatial and spatial filters matter.
  Rng rng = make_rng(derive_seed(spec.seed, 0xC1A55));
  std::vector<ClassTemplate> out;
  const std::size_t n_src = 3;
  for (int k = 0; k < spec.classes; ++k) {
    ClassTemplate t;
    for (std::size_t s = 0; s < n_src; ++s) {
      t.freqs_hz.push_back(7.0 + 4.0 * static_cast<double>(s));
      t.phases.push_back(uniform(rng, 0.0, 2.0 * std::numbers::pi));
    }
    t.mixing = Tensor({spec.channels, n_src});
    for (std::size_t s = 0; s < n_src; ++s) {
      double norm = 0.0;
      for (std::size_t c = 0; c < spec.channels; ++c) {
        const double v = gauss(rng);
        t.mixing.at(c, s) = v;
        norm += v * v;
      }
      norm = std::sqrt(norm);
      for (std::size_t c = 0; c < spec.channels; ++c) t.mixing.at(c, s) /= norm;
    }
    out.push_back(std::move(t));
  }
  return out;
}

EegDataset synthesize(const SyntheticSpec& spec) {
  if (spec.classes < 2) throw ContractError("synthetic spec needs at least 2 classes");
  if (spec.trials_per_class < 1 || spec.subjects < 1) {
    throw ContractError("synthetic spec needs positive trial and subject counts");
  }
  const auto templates = resolve_templates(spec);
  for (std::size_t i = 0; i < templates.size(); ++i) {
    const auto& t = templates[i];
    if (t.freqs_hz.empty() || t.freqs_hz.size() != t.phases.size() ||
        t.mixing.rank() != 2 || t.mixing.dim(0) != spec.channels ||
        t.mixing.dim(1) != t.freqs_hz.size()) {
      throw ContractError("class template " + std::to_string(i) + " is malformed");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (templates_equal(templates[i], templates[j])) {
        throw ContractError("class templates " + std::to_string(j) + " and " + std::to_string(i) +
                            " are identical");
      }
    }
  }

  EegDataset ds;
  ds.num_classes = spec.classes;
  ds.name = "synthetic";

  const double two_pi = 2.0 * std::numbers::pi;
  for (int subj = 0; subj < spec.subjects; ++subj) {
    Rng rng = make_rng(derive_seed(spec.seed, 0x5AB0 + static_cast<std::uint64_t>(subj)));
    // mild per-subject channel gains
    std::vector<double> gain(spec.channels);
    for (auto& g : gain) g = uniform(rng, 0.85, 1.15);
    for (int k = 0; k < spec.classes; ++k) {
      const ClassTemplate& tpl = templates[k];
      const std::size_t n_src = tpl.freqs_hz.size();
      for (int i = 0; i < spec.trials_per_class; ++i) {
        EegTrial trial;
        trial.fs = spec.fs;
        trial.label = k;
        trial.subject = subj;
        trial.data = Tensor({spec.channels, spec.samples});
        std::vector<double> phase(n_src);
        std::vector<double> amp(n_src);
        for (std::size_t s = 0; s < n_src; ++s) {
          phase[s] = tpl.phases[s] + gauss(rng, 0.0, spec.phase_jitter);
          amp[s] = spec.amplitude * (1.0 + gauss(rng, 0.0, 0.1));
        }
        for (std::size_t t = 0; t < spec.samples; ++t) {
          const double time = static_cast<double>(t) / spec.fs;
          for (std::size_t s = 0; s < n_src; ++s) {
            const double v = amp[s] * std::sin(two_pi * tpl.freqs_hz[s] * time + phase[s]);
            for (std::size_t c = 0; c < spec.channels; ++c) {
              trial.data.at(c, t) += tpl.mixing.at(c, s) * v;
            }
          }
        }
        for (std::size_t c = 0; c < spec.channels; ++c) {
          for (std::size_t t = 0; t < spec.samples; ++t) {
            trial.data.at(c, t) = gain[c] * trial.data.at(c, t) + gauss(rng, 0.0, spec.noise_std);
          }
        }
        ds.trials.push_back(std::move(trial));
      }
    }
  }
  ds.validate();
  return ds;
}

}  // namespace adfilt::eeg
