#include "adfilt/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <map>
#include <thread>

#include "adfilt/etrc.hpp"
#include "adfilt/metrics.hpp"
#include "adfilt/rng.hpp"

namespace adfilt::runner {

std::string to_string(Scenario s) { return s == Scenario::Within ? "within" : "cross"; }

Scenario scenario_from_string(const std::string& s) {
  if (s == "within") return Scenario::Within;
  if (s == "cross") return Scenario::Cross;
  throw ConfigError("unknown scenario '" + s + "' (expected within|cross)");
}

// ---- config mapping ---------------------------------------------------------

namespace {
models::ModelSpec model_spec_from_config(const Config& c, const std::string& kind) {
  models::ModelSpec spec;
  spec.kind = models::model_kind_from_string(kind);
  spec.spatial_filters = static_cast<int>(c.get_int("model.spatial_filters", 4));
  spec.xdawn_target = static_cast<int>(c.get_int("model.xdawn_target", 1));
  models::CnnSpec& cnn = spec.cnn;
  cnn.temporal_filters = static_cast<int>(c.get_int("model.cnn.temporal_filters", 4));
  cnn.temporal_kernel = static_cast<int>(c.get_int("model.cnn.temporal_kernel", 17));
  cnn.depth_multiplier = static_cast<int>(c.get_int("model.cnn.depth_multiplier", 2));
  cnn.separable_filters = static_cast<int>(c.get_int("model.cnn.separable_filters", 8));
  cnn.separable_kernel = static_cast<int>(c.get_int("model.cnn.separable_kernel", 9));
  cnn.pool1 = static_cast<int>(c.get_int("model.cnn.pool1", 4));
  cnn.pool2 = static_cast<int>(c.get_int("model.cnn.pool2", 8));
  const std::string depth = c.get_str("model.cnn.depth", "standard");
  if (depth == "shallow") {
    cnn.depth = models::CnnSpec::Depth::Shallow;
  } else if (depth == "deep") {
    cnn.depth = models::CnnSpec::Depth::Deep;
  } else if (depth == "standard") {
    cnn.depth = models::CnnSpec::Depth::Standard;
  } else {
    throw ConfigError("unknown CNN depth '" + depth + "'");
  }
  const std::string act = c.get_str("model.cnn.activation", "elu");
  if (act == "relu") {
    cnn.activation = models::CnnSpec::Activation::Relu;
  } else if (act == "elu") {
    cnn.activation = models::CnnSpec::Activation::Elu;
  } else {
    throw ConfigError("unknown CNN activation '" + act + "'");
  }
  return spec;
}
}  // namespace

ExperimentConfig experiment_from_config(const Config& c) {
  ExperimentConfig e;
  e.master_seed = c.get_u64("seed", 0);
  e.dataset_path = c.get_str("data.path", "");
  e.zscore_input = c.get_bool("data.zscore", true);

  e.synth.channels = static_cast<std::size_t>(c.get_int("synth.channels", 8));
  e.synth.samples = static_cast<std::size_t>(c.get_int("synth.samples", 128));
  e.synth.fs = c.get_double("synth.fs", 128.0);
  e.synth.classes = static_cast<int>(c.get_int("synth.classes", 2));
  e.synth.trials_per_class = static_cast<int>(c.get_int("synth.trials_per_class", 60));
  e.synth.subjects = static_cast<int>(c.get_int("synth.subjects", 4));
  e.synth.noise_std = c.get_double("synth.noise_std", 1.0);
  e.synth.phase_jitter = c.get_double("synth.phase_jitter", 0.3);
  e.synth.amplitude = c.get_double("synth.amplitude", 1.0);
  e.synth.seed = c.get_u64("synth.seed", e.master_seed);

  e.model = model_spec_from_config(c, c.get_str("model.kind", "csp_lr"));

  e.train.epochs = static_cast<int>(c.get_int("train.epochs", 100));
  e.train.batch_size = static_cast<int>(c.get_int("train.batch", 32));
  e.train.lr = c.get_double("train.lr", 1e-3);
  e.train.weight_decay = c.get_double("train.weight_decay", 1e-4);
  e.train.patience = static_cast<int>(c.get_int("train.patience", 10));

  e.scenario = scenario_from_string(c.get_str("scenario", "within"));
  e.repeats = static_cast<int>(c.get_int("repeats", 10));
  if (e.repeats < 1) throw ConfigError("repeats must be >= 1");
  e.train_fraction = c.get_double("split.train_fraction", 0.8);
  e.validation_fraction = c.get_double("split.validation_fraction", 0.25);
  if (!(e.train_fraction > 0.0) || !(e.train_fraction < 1.0)) {
    throw ConfigError("split.train_fraction must be in (0,1)");
  }
  if (!(e.validation_fraction > 0.0) || !(e.validation_fraction < 1.0)) {
    throw ConfigError("split.validation_fraction must be in (0,1)");
  }
  e.sweep_max_folds = static_cast<int>(c.get_int("sweep.max_folds", 1));

  e.evasion.search_steps = static_cast<int>(c.get_int("evasion.steps", 10));
  e.evasion.epochs = static_cast<int>(c.get_int("evasion.epochs", 50));
  e.evasion.alpha0 = c.get_double("evasion.alpha0", 100.0);
  e.evasion.alpha_max = c.get_double("evasion.alpha_max", 1e5);
  e.evasion.lr = c.get_double("evasion.lr", 1e-3);
  e.evasion.batch_size = static_cast<int>(c.get_int("evasion.batch", 32));
  e.evasion.init_std = c.get_double("evasion.init_std", 0.01);

  e.backdoor.target_class = static_cast<int>(c.get_int("backdoor.target", 0));
  e.backdoor.ratio = c.get_double("backdoor.ratio", 0.05);
  e.backdoor.noise_std = c.get_double("backdoor.noise_std", 0.05);
  e.backdoor.zeroed_channels = static_cast<int>(c.get_int("backdoor.zeroed_channels", -1));

  e.alpha_grid = c.get_doubles("sweep.alpha_grid", e.alpha_grid);
  e.poison_grid = c.get_doubles("sweep.poison_grid", e.poison_grid);

  for (const std::string& kind :
       c.get_strs("transfer.models", {"compact_cnn", "csp_lr"})) {
    e.transfer_models.push_back(model_spec_from_config(c, kind));
  }

  e.out_dir = c.get_str("out", "out");
  e.workers = static_cast<int>(c.get_int("workers", 1));
  if (e.workers < 1) throw ConfigError("workers must be >= 1");
  e.config_hash = c.hash();
  return e;
}

eeg::EegDataset load_experiment_dataset(const ExperimentConfig& cfg) {
  eeg::EegDataset ds = cfg.dataset_path.empty() ? eeg::synthesize(cfg.synth)
                                                : eeg::load_dataset(cfg.dataset_path);
  if (cfg.zscore_input) ds = eeg::zscore(ds);
  return ds;
}

// ---- splits -------------------------------------------------------------------

namespace {

eeg::EegDataset subset(const eeg::EegDataset& ds, const std::vector<std::size_t>& idx,
                       const std::string& name) {
  eeg::EegDataset out;
  out.num_classes = ds.num_classes;
  out.name = name;
  out.trials.reserve(idx.size());
  for (std::size_t i : idx) out.trials.push_back(ds.trials[i]);
  return out;
}

// Stratified two-way split: part A receives `fraction` of every class
// (rounded, clamped so both sides keep >= 1 trial per class).
std::pair<eeg::EegDataset, eeg::EegDataset> stratified_split(const eeg::EegDataset& ds,
                                                             double fraction, std::uint64_t seed,
                                                             const char* who) {
  std::vector<std::vector<std::size_t>> by_class(ds.num_classes);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    by_class[ds.trials[i].label].push_back(i);
  }
  Rng rng = make_rng(derive_seed(seed, 0x57A7));
  std::vector<std::size_t> a_idx, b_idx;
  for (int k = 0; k < ds.num_classes; ++k) {
    auto& idx = by_class[k];
    if (idx.size() < 2) {
      throw ContractError(std::string(who) + ": class " + std::to_string(k) + " has " +
                          std::to_string(idx.size()) + " trial(s), cannot stratify");
    }
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n = static_cast<long>(idx.size());
    long n_a = std::lround(fraction * static_cast<double>(n));
    n_a = std::clamp(n_a, 1L, n - 1);
    a_idx.insert(a_idx.end(), idx.begin(), idx.begin() + n_a);
    b_idx.insert(b_idx.end(), idx.begin() + n_a, idx.end());
  }
  std::sort(a_idx.begin(), a_idx.end());
  std::sort(b_idx.begin(), b_idx.end());
  return {subset(ds, a_idx, ds.name + "-a"), subset(ds, b_idx, ds.name + "-b")};
}

}  // namespace

std::pair<eeg::EegDataset, eeg::EegDataset> split_within(const eeg::EegDataset& ds, int subject,
                                                         double train_fraction,
                                                         std::uint64_t seed) {
  ds.validate();
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds.trials[i].subject == subject) idx.push_back(i);
  }
  if (idx.empty()) {
    throw ContractError("split_within: subject " + std::to_string(subject) +
                        " not present in dataset '" + ds.name + "'");
  }
  eeg::EegDataset subj = subset(ds, idx, ds.name + "-s" + std::to_string(subject));
  auto [train, test] = stratified_split(subj, train_fraction, seed, "split_within");
  train.name = subj.name + "-train";
  test.name = subj.name + "-test";
  return {std::move(train), std::move(test)};
}

std::pair<eeg::EegDataset, eeg::EegDataset> split_cross(const eeg::EegDataset& ds,
                                                        int held_out_subject) {
  ds.validate();
  const auto subjects = ds.subjects();
  if (subjects.size() < 2) throw ContractError("split_cross needs at least two subjects");
  if (std::find(subjects.begin(), subjects.end(), held_out_subject) == subjects.end()) {
    throw ContractError("split_cross: unknown subject " + std::to_string(held_out_subject));
  }
  std::vector<std::size_t> train_idx, test_idx;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    (ds.trials[i].subject == held_out_subject ? test_idx : train_idx).push_back(i);
  }
  return {subset(ds, train_idx, ds.name + "-train"),
          subset(ds, test_idx, ds.name + "-test")};
}

std::pair<eeg::EegDataset, eeg::EegDataset> carve_validation(const eeg::EegDataset& train,
                                                             double fraction,
                                                             std::uint64_t seed) {
  if (!(fraction > 0.0) || !(fraction < 1.0)) {
    throw ConfigError("validation fraction must be in (0,1)");
  }
  auto [rest, validation] = stratified_split(train, 1.0 - fraction, seed, "carve_validation");
  rest.name = train.name + "-opt";
  validation.name = train.name + "-val";
  return {std::move(rest), std::move(validation)};
}

// ---- shared runner machinery ---------------------------------------------------

namespace {

struct RepeatOutput {
  std::vector<report::ReportRow> rows;
  std::vector<report::AlphaTraceRow> traces;
  std::string error;
};

template <typename Fn>
std::vector<RepeatOutput> run_repeats(const ExperimentConfig& cfg, Fn&& body) {
  const int n = cfg.repeats;
  std::vector<RepeatOutput> out(n);
  auto worker_body = [&](int r) {
    try {
      body(r, out[r]);
    } catch (const std::exception& e) {
      out[r].rows.clear();
      out[r].traces.clear();
      out[r].error = "repeat " + std::to_string(r) + ": " + e.what();
    }
  };
  const int workers = std::min(cfg.workers, n);
  if (workers <= 1) {
    for (int r = 0; r < n; ++r) worker_body(r);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (int r = next.fetch_add(1); r < n; r = next.fetch_add(1)) worker_body(r);
      });
    }
    for (auto& t : pool) t.join();
  }
  return out;
}

report::AttackReport merge_repeats(const ExperimentConfig& cfg, const std::string& scenario_tag,
                                   const std::string& dataset, const std::string& model,
                                   std::vector<RepeatOutput> outputs) {
  report::AttackReport rep;
  rep.scenario = scenario_tag;
  rep.dataset = dataset;
  rep.model = model;
  rep.config_hash = cfg.config_hash;
  rep.master_seed = cfg.master_seed;
  for (auto& o : outputs) {
    for (auto& row : o.rows) rep.rows.push_back(std::move(row));
    for (auto& t : o.traces) rep.alpha_trace.push_back(t);
    if (!o.error.empty()) rep.errors.push_back(o.error);
  }
  return rep;
}

std::vector<int> fold_subjects(const eeg::EegDataset& ds) { return ds.subjects(); }

// Mean that ignores NaNs produced by skipped folds.
double mean_of(const std::vector<double>& xs) {
  double acc = 0.0;
  for (double x : xs) acc += x;
  return acc / static_cast<double>(xs.size());
}

report::ReportRow base_row(const std::string& scenario, const std::string& dataset,
                           const std::string& model, const std::string& condition, int repeat,
                           std::uint64_t seed) {
  report::ReportRow row;
  row.scenario = scenario;
  row.dataset = dataset;
  row.model = model;
  row.condition = condition;
  row.repeat = repeat;
  row.seed = seed;
  return row;
}

std::string alpha_condition(double alpha) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "alpha=%.10g", alpha);
  return buf;
}

std::string poison_condition(double ratio) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "poison=%.10g", ratio);
  return buf;
}

}  // namespace

// ---- evasion ----------------------------------------------------------------------

report::AttackReport run_evasion(const ExperimentConfig& cfg) {
  const eeg::EegDataset ds = load_experiment_dataset(cfg);
  const auto subjects = fold_subjects(ds);
  const std::string scenario_tag = to_string(cfg.scenario);
  const std::string model_name = models::to_string(cfg.model.kind);

  auto outputs = run_repeats(cfg, [&](int r, RepeatOutput& out) {
    const std::uint64_t seed_r = cfg.master_seed + static_cast<std::uint64_t>(r);
    std::vector<double> clean, noisy, adv, adv_rmse, noisy_rmse, alphas;
    for (std::size_t f = 0; f < subjects.size(); ++f) {
      auto [train, test] = cfg.scenario == Scenario::Within
                               ? split_within(ds, subjects[f], cfg.train_fraction,
                                              derive_seed(seed_r, 100 + f))
                               : split_cross(ds, subjects[f]);
      models::TrainConfig tc = cfg.train;
      tc.seed = derive_seed(seed_r, 200 + f);
      auto model = models::make_model(cfg.model, ds.channels(), ds.samples(), ds.num_classes);
      model->fit(train, tc, nullptr);

      const auto test_labels = test.labels();
      clean.push_back(metrics::bca(model->predict(test), test_labels, ds.num_classes));

      const auto noise_filter =
          attacks::make_noisy_baseline(ds.channels(), derive_seed(seed_r, 300 + f));
      const eeg::EegDataset noisy_test = attacks::apply(noise_filter, test);
      noisy.push_back(metrics::bca(model->predict(noisy_test), test_labels, ds.num_classes));
      noisy_rmse.push_back(metrics::rmse_distortion(test, noisy_test).global);

      auto [opt_set, val_set] =
          carve_validation(train, cfg.validation_fraction, derive_seed(seed_r, 400 + f));
      attacks::EvasionConfig ec = cfg.evasion;
      ec.seed = derive_seed(seed_r, 500 + f);
      std::vector<attacks::AlphaTraceEntry> trace;
      const auto filter = attacks::generate_evasion_filter(opt_set, val_set, *model, ec, &trace);
      for (const auto& t : trace) {
        out.traces.push_back({r, static_cast<int>(f), t.step, t.alpha, t.validation_bca,
                              t.accepted});
      }
      const eeg::EegDataset adv_test = attacks::apply(filter, test);
      adv.push_back(metrics::bca(model->predict(adv_test), test_labels, ds.num_classes));
      adv_rmse.push_back(metrics::rmse_distortion(test, adv_test).global);
      alphas.push_back(filter.alpha);
    }
    auto clean_row = base_row(scenario_tag, ds.name, model_name, "clean", r, seed_r);
    clean_row.bca = mean_of(clean);
    auto noisy_row = base_row(scenario_tag, ds.name, model_name, "noisy", r, seed_r);
    noisy_row.bca = mean_of(noisy);
    noisy_row.rmse = mean_of(noisy_rmse);
    auto adv_row = base_row(scenario_tag, ds.name, model_name, "adversarial", r, seed_r);
    adv_row.bca = mean_of(adv);
    adv_row.rmse = mean_of(adv_rmse);
    adv_row.alpha = mean_of(alphas);
    out.rows = {std::move(clean_row), std::move(noisy_row), std::move(adv_row)};
  });
  return merge_repeats(cfg, scenario_tag, ds.name, model_name, std::move(outputs));
}

// ---- backdoor ---------------------------------------------------------------------

report::AttackReport run_backdoor(const ExperimentConfig& cfg) {
  const eeg::EegDataset ds = load_experiment_dataset(cfg);
  const auto subjects = fold_subjects(ds);
  const std::string scenario_tag = to_string(cfg.scenario);
  const std::string model_name = models::to_string(cfg.model.kind);

  auto outputs = run_repeats(cfg, [&](int r, RepeatOutput& out) {
    const std::uint64_t seed_r = cfg.master_seed + static_cast<std::uint64_t>(r);
    std::vector<double> bd_bca, bd_asr, base_bca, base_asr;
    for (std::size_t f = 0; f < subjects.size(); ++f) {
      auto [train, test] = cfg.scenario == Scenario::Within
                               ? split_within(ds, subjects[f], cfg.train_fraction,
                                              derive_seed(seed_r, 100 + f))
                               : split_cross(ds, subjects[f]);
      attacks::BackdoorConfig bc = cfg.backdoor;
      bc.seed = derive_seed(seed_r, 600 + f);
      const auto key = attacks::make_backdoor_key(ds.channels(), bc);
      models::TrainConfig tc = cfg.train;
      tc.seed = derive_seed(seed_r, 200 + f);
      const auto outcome = attacks::run_backdoor_attack(train, test, cfg.model, key, bc, tc);
      bd_bca.push_back(outcome.clean_bca);
      bd_asr.push_back(outcome.keyed_asr);
      base_bca.push_back(outcome.baseline_bca);
      base_asr.push_back(outcome.baseline_asr);
    }
    auto bd_row = base_row(scenario_tag, ds.name, model_name, "backdoor", r, seed_r);
    bd_row.bca = mean_of(bd_bca);
    bd_row.asr = mean_of(bd_asr);
    auto base = base_row(scenario_tag, ds.name, model_name, "baseline", r, seed_r);
    base.bca = mean_of(base_bca);
    base.asr = mean_of(base_asr);
    out.rows = {std::move(bd_row), std::move(base)};
  });
  return merge_repeats(cfg, scenario_tag, ds.name, model_name, std::move(outputs));
}

// ---- alpha sweep (no binary search) --------------------------------------------------

report::AttackReport run_sweep_alpha(const ExperimentConfig& cfg) {
  const eeg::EegDataset ds = load_experiment_dataset(cfg);
  const auto subjects = fold_subjects(ds);
  const std::size_t folds =
      std::min<std::size_t>(subjects.size(), std::max(1, cfg.sweep_max_folds));
  const std::string scenario_tag = to_string(cfg.scenario);
  const std::string model_name = models::to_string(cfg.model.kind);

  auto outputs = run_repeats(cfg, [&](int r, RepeatOutput& out) {
    const std::uint64_t seed_r = cfg.master_seed + static_cast<std::uint64_t>(r);
    std::map<std::size_t, std::vector<double>> bca_by_alpha, rmse_by_alpha;
    std::vector<double> clean_bcas;
    for (std::size_t f = 0; f < folds; ++f) {
      auto [train, test] = cfg.scenario == Scenario::Within
                               ? split_within(ds, subjects[f], cfg.train_fraction,
                                              derive_seed(seed_r, 100 + f))
                               : split_cross(ds, subjects[f]);
      models::TrainConfig tc = cfg.train;
      tc.seed = derive_seed(seed_r, 200 + f);
      auto model = models::make_model(cfg.model, ds.channels(), ds.samples(), ds.num_classes);
      model->fit(train, tc, nullptr);
      const auto test_labels = test.labels();
      clean_bcas.push_back(metrics::bca(model->predict(test), test_labels, ds.num_classes));

      auto [opt_set, val_set] =
          carve_validation(train, cfg.validation_fraction, derive_seed(seed_r, 400 + f));
      for (std::size_t gi = 0; gi < cfg.alpha_grid.size(); ++gi) {
        attacks::EvasionConfig ec = cfg.evasion;
        ec.search_steps = 1;
        ec.alpha0 = cfg.alpha_grid[gi];
        ec.seed = derive_seed(seed_r, 800 + f * 64 + gi);
        std::vector<attacks::AlphaTraceEntry> trace;
        const auto filter = attacks::generate_evasion_filter(opt_set, val_set, *model, ec,
                                                             &trace);
        for (const auto& t : trace) {
          out.traces.push_back({r, static_cast<int>(f), t.step, t.alpha, t.validation_bca,
                                t.accepted});
        }
        const eeg::EegDataset adv_test = attacks::apply(filter, test);
        bca_by_alpha[gi].push_back(
            metrics::bca(model->predict(adv_test), test_labels, ds.num_classes));
        rmse_by_alpha[gi].push_back(metrics::rmse_distortion(test, adv_test).global);
      }
    }
    auto clean_row = base_row(scenario_tag, ds.name, model_name, "clean", r, seed_r);
    clean_row.bca = mean_of(clean_bcas);
    out.rows.push_back(std::move(clean_row));
    for (std::size_t gi = 0; gi < cfg.alpha_grid.size(); ++gi) {
      auto row = base_row(scenario_tag, ds.name, model_name,
                          alpha_condition(cfg.alpha_grid[gi]), r, seed_r);
      row.alpha = cfg.alpha_grid[gi];
      row.bca = mean_of(bca_by_alpha[gi]);
      row.rmse = mean_of(rmse_by_alpha[gi]);
      out.rows.push_back(std::move(row));
    }
  });
  return merge_repeats(cfg, scenario_tag, ds.name, model_name, std::move(outputs));
}

// ---- poisoning-ratio sweep -------------------------------------------------------------

report::AttackReport run_sweep_poison(const ExperimentConfig& cfg) {
  const eeg::EegDataset ds = load_experiment_dataset(cfg);
  const auto subjects = fold_subjects(ds);
  const std::size_t folds =
      std::min<std::size_t>(subjects.size(), std::max(1, cfg.sweep_max_folds));
  const std::string scenario_tag = to_string(cfg.scenario);
  const std::string model_name = models::to_string(cfg.model.kind);

  auto outputs = run_repeats(cfg, [&](int r, RepeatOutput& out) {
    const std::uint64_t seed_r = cfg.master_seed + static_cast<std::uint64_t>(r);
    std::map<std::size_t, std::vector<double>> bca_by_p, asr_by_p;
    std::vector<double> base_bca, base_asr;
    for (std::size_t f = 0; f < folds; ++f) {
      auto [train, test] = cfg.scenario == Scenario::Within
                               ? split_within(ds, subjects[f], cfg.train_fraction,
                                              derive_seed(seed_r, 100 + f))
                               : split_cross(ds, subjects[f]);
      attacks::BackdoorConfig bc = cfg.backdoor;
      bc.seed = derive_seed(seed_r, 600 + f);
      const auto key = attacks::make_backdoor_key(ds.channels(), bc);
      models::TrainConfig tc = cfg.train;
      tc.seed = derive_seed(seed_r, 200 + f);

      eeg::EegDataset keyed_test;
      {
        eeg::EegDataset nontarget;
        nontarget.num_classes = test.num_classes;
        nontarget.name = test.name;
        for (const auto& t : test.trials) {
          if (t.label != bc.target_class) nontarget.trials.push_back(t);
        }
        keyed_test = attacks::apply(key, nontarget);
      }
      const auto test_labels = test.labels();
      const auto keyed_labels = keyed_test.labels();

      auto clean_model =
          models::make_model(cfg.model, ds.channels(), ds.samples(), ds.num_classes);
      clean_model->fit(train, tc, nullptr);
      base_bca.push_back(metrics::bca(clean_model->predict(test), test_labels, ds.num_classes));
      base_asr.push_back(metrics::asr(clean_model->predict(keyed_test), keyed_labels,
                                      bc.target_class, ds.num_classes));

      for (std::size_t gi = 0; gi < cfg.poison_grid.size(); ++gi) {
        attacks::BackdoorConfig pc = bc;
        pc.ratio = cfg.poison_grid[gi];
        pc.seed = derive_seed(seed_r, 900 + f * 64 + gi);
        const auto poisoned = attacks::poison(train, key, pc);
        auto model = models::make_model(cfg.model, ds.channels(), ds.samples(), ds.num_classes);
        models::TrainConfig ptc = tc;
        ptc.seed = derive_seed(seed_r, 1000 + f * 64 + gi);
        model->fit(poisoned.dataset, ptc, nullptr);
        bca_by_p[gi].push_back(metrics::bca(model->predict(test), test_labels, ds.num_classes));
        asr_by_p[gi].push_back(metrics::asr(model->predict(keyed_test), keyed_labels,
                                            bc.target_class, ds.num_classes));
      }
    }
    auto base = base_row(scenario_tag, ds.name, model_name, "baseline", r, seed_r);
    base.bca = mean_of(base_bca);
    base.asr = mean_of(base_asr);
    out.rows.push_back(std::move(base));
    for (std::size_t gi = 0; gi < cfg.poison_grid.size(); ++gi) {
      auto row = base_row(scenario_tag, ds.name, model_name,
                          poison_condition(cfg.poison_grid[gi]), r, seed_r);
      row.bca = mean_of(bca_by_p[gi]);
      row.asr = mean_of(asr_by_p[gi]);
      out.rows.push_back(std::move(row));
    }
  });
  return merge_repeats(cfg, scenario_tag, ds.name, model_name, std::move(outputs));
}

// ---- transferability ----------------------------------------------------------------------

report::AttackReport run_transfer(const ExperimentConfig& cfg) {
  const eeg::EegDataset ds = load_experiment_dataset(cfg);
  const auto subjects = fold_subjects(ds);
  if (cfg.transfer_models.size() < 2) {
    throw ConfigError("transfer needs at least two models (transfer.models)");
  }
  const std::string scenario_tag = to_string(cfg.scenario);

  auto outputs = run_repeats(cfg, [&](int r, RepeatOutput& out) {
    const std::uint64_t seed_r = cfg.master_seed + static_cast<std::uint64_t>(r);
    const std::size_t f = 0;  // transfer runs on the first fold
    auto [train, test] = cfg.scenario == Scenario::Within
                             ? split_within(ds, subjects[f], cfg.train_fraction,
                                            derive_seed(seed_r, 100 + f))
                             : split_cross(ds, subjects[f]);
    std::vector<std::unique_ptr<models::VictimModel>> victims;
    std::vector<attacks::SpatialFilter> filters;
    auto [opt_set, val_set] =
        carve_validation(train, cfg.validation_fraction, derive_seed(seed_r, 400 + f));
    for (std::size_t mi = 0; mi < cfg.transfer_models.size(); ++mi) {
      models::TrainConfig tc = cfg.train;
      tc.seed = derive_seed(seed_r, 200 + mi);
      auto model = models::make_model(cfg.transfer_models[mi], ds.channels(), ds.samples(),
                                      ds.num_classes);
      model->fit(train, tc, nullptr);
      attacks::EvasionConfig ec = cfg.evasion;
      ec.seed = derive_seed(seed_r, 500 + mi);
      std::vector<attacks::AlphaTraceEntry> trace;
      filters.push_back(attacks::generate_evasion_filter(opt_set, val_set, *model, ec, &trace));
      for (const auto& t : trace) {
        out.traces.push_back({r, static_cast<int>(mi), t.step, t.alpha, t.validation_bca,
                              t.accepted});
      }
      victims.push_back(std::move(model));
    }
    std::vector<const models::VictimModel*> victim_ptrs;
    std::vector<const attacks::SpatialFilter*> filter_ptrs;
    for (const auto& m : victims) victim_ptrs.push_back(m.get());
    for (const auto& fl : filters) filter_ptrs.push_back(&fl);
    const Tensor matrix = metrics::transferability_matrix(victim_ptrs, filter_ptrs, test);

    const auto test_labels = test.labels();
    for (std::size_t v = 0; v < victims.size(); ++v) {
      auto row = base_row(scenario_tag, ds.name, models::to_string(cfg.transfer_models[v].kind),
                          "clean", r, seed_r);
      row.bca = metrics::bca(victims[v]->predict(test), test_labels, ds.num_classes);
      out.rows.push_back(std::move(row));
    }
    for (std::size_t g = 0; g < filters.size(); ++g) {
      for (std::size_t v = 0; v < victims.size(); ++v) {
        auto row =
            base_row(scenario_tag, ds.name, models::to_string(cfg.transfer_models[v].kind),
                     "filter-from=" + models::to_string(cfg.transfer_models[g].kind), r, seed_r);
        row.bca = matrix.at(g, v);
        row.alpha = filters[g].alpha;
        out.rows.push_back(std::move(row));
      }
    }
  });
  return merge_repeats(cfg, scenario_tag, ds.name, "multi", std::move(outputs));
}

}  // namespace adfilt::runner
