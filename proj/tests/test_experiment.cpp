#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "adfilt/experiment.hpp"
#include "testutil.hpp"

using namespace adfilt;
using namespace adfilt::runner;
namespace fs = std::filesystem;

namespace {

eeg::EegDataset make_ds(int subjects, int per_class, std::uint64_t seed = 3) {
  eeg::SyntheticSpec spec;
  spec.channels = 4;
  spec.samples = 32;
  spec.classes = 2;
  spec.trials_per_class = per_class;
  spec.subjects = subjects;
  spec.noise_std = 0.3;
  spec.seed = seed;
  return eeg::synthesize(spec);
}

// fingerprint of a trial for multiset comparison
std::string trial_key(const eeg::EegTrial& t) {
  std::ostringstream ss;
  ss << t.label << ':' << t.subject << ':';
  ss.precision(17);
  for (std::size_t i = 0; i < 4; ++i) ss << t.data[i] << ',';
  return ss.str();
}

std::multiset<std::string> dataset_keys(const eeg::EegDataset& ds) {
  std::multiset<std::string> out;
  for (const auto& t : ds.trials) out.insert(trial_key(t));
  return out;
}

}  // namespace

TEST_CASE("within-subject split: sizes, stratification, determinism, partition") {
  const eeg::EegDataset ds = make_ds(2, 50);  // subject 0 has 100 trials
  auto [train, test] = split_within(ds, 0, 0.8, 7);
  CHECK(train.size() == 80);
  CHECK(test.size() == 20);
  auto count_class = [](const eeg::EegDataset& d, int k) {
    std::size_t n = 0;
    for (const auto& t : d.trials) n += t.label == k;
    return n;
  };
  CHECK(count_class(train, 0) == 40);
  CHECK(count_class(train, 1) == 40);

  auto [train2, test2] = split_within(ds, 0, 0.8, 7);
  CHECK(dataset_keys(train) == dataset_keys(train2));

  // union of the splits restores the subject's trials
  eeg::EegDataset subj;
  subj.num_classes = 2;
  for (const auto& t : ds.trials) {
    if (t.subject == 0) subj.trials.push_back(t);
  }
  std::multiset<std::string> merged = dataset_keys(train);
  for (const auto& k : dataset_keys(test)) merged.insert(k);
  CHECK(merged == dataset_keys(subj));

  CHECK_THROWS_AS(split_within(ds, 99, 0.8, 7), ContractError);
}

TEST_CASE("stratification error for singleton classes") {
  eeg::EegDataset ds = make_ds(1, 5);
  // leave only one trial of class 1
  eeg::EegDataset skewed;
  skewed.num_classes = 2;
  skewed.name = "skewed";
  bool kept_one = false;
  for (const auto& t : ds.trials) {
    if (t.label == 1) {
      if (kept_one) continue;
      kept_one = true;
    }
    skewed.trials.push_back(t);
  }
  CHECK_THROWS_AS(split_within(skewed, 0, 0.8, 1), ContractError);
}

TEST_CASE("cross-subject split: leave one subject out") {
  const eeg::EegDataset ds = make_ds(3, 10);
  const auto subjects = ds.subjects();
  CHECK(subjects.size() == 3);
  std::size_t total = 0;
  for (int s : subjects) {
    auto [train, test] = split_cross(ds, s);
    for (const auto& t : test.trials) CHECK(t.subject == s);
    for (const auto& t : train.trials) CHECK(t.subject != s);
    CHECK(train.size() + test.size() == ds.size());
    total += test.size();
  }
  CHECK(total == ds.size());
  CHECK_THROWS_AS(split_cross(ds, 42), ContractError);
  CHECK_THROWS_AS(split_cross(make_ds(1, 10), 0), ContractError);
}

TEST_CASE("validation carve is stratified and disjoint") {
  const eeg::EegDataset ds = make_ds(1, 40);  // 80 trials
  auto [rest, val] = carve_validation(ds, 0.25, 5);
  CHECK(rest.size() == 60);
  CHECK(val.size() == 20);
  std::multiset<std::string> merged = dataset_keys(rest);
  for (const auto& k : dataset_keys(val)) merged.insert(k);
  CHECK(merged == dataset_keys(ds));
  auto count_class = [](const eeg::EegDataset& d, int k) {
    std::size_t n = 0;
    for (const auto& t : d.trials) n += t.label == k;
    return n;
  };
  CHECK(count_class(val, 0) == 10);
  CHECK(count_class(val, 1) == 10);
  CHECK_THROWS_AS(carve_validation(ds, 0.0, 5), ConfigError);
}

TEST_CASE("config parsing, overrides and hashing") {
  Config cfg = Config::from_string(
      "# comment\n"
      "evasion.alpha0 = 100\n"
      "model.kind=csp_lr\n"
      "\n"
      "repeats=3\n");
  CHECK(cfg.get_double("evasion.alpha0", 0) == 100.0);
  CHECK(cfg.get_str("model.kind", "") == "csp_lr");
  CHECK(cfg.get_int("repeats", 0) == 3);
  CHECK(cfg.get_int("absent", 17) == 17);
  const std::string h1 = cfg.hash();
  cfg.set("repeats", "4");  // flag override
  CHECK(cfg.get_int("repeats", 0) == 4);
  CHECK(cfg.hash() != h1);

  CHECK_THROWS_AS(Config::from_string("not a pair\n"), ConfigError);
}

TEST_CASE("bad typed values raise config errors") {
  Config cfg = Config::from_string("a=notanumber\nb=1.5\n");
  CHECK_THROWS_AS(cfg.get_int("a", 0), ConfigError);
  CHECK_THROWS_AS(cfg.get_int("b", 0), ConfigError);
  CHECK_THROWS_AS(cfg.get_bool("a", false), ConfigError);
  CHECK(cfg.get_double("b", 0) == 1.5);
}

TEST_CASE("experiment config maps keys and validates ranges") {
  Config cfg = Config::from_string(
      "scenario=cross\n"
      "repeats=2\n"
      "synth.classes=4\n"
      "evasion.steps=3\n"
      "sweep.alpha_grid=1,10,100\n"
      "transfer.models=csp_lr,compact_cnn\n");
  const ExperimentConfig e = experiment_from_config(cfg);
  CHECK(e.scenario == Scenario::Cross);
  CHECK(e.repeats == 2);
  CHECK(e.synth.classes == 4);
  CHECK(e.evasion.search_steps == 3);
  CHECK(e.alpha_grid == std::vector<double>{1, 10, 100});
  CHECK(e.transfer_models.size() == 2);
  CHECK(e.config_hash.size() == 16);

  CHECK_THROWS_AS(experiment_from_config(Config::from_string("repeats=0\n")), ConfigError);
  CHECK_THROWS_AS(experiment_from_config(Config::from_string("scenario=sideways\n")),
                  ConfigError);
  CHECK_THROWS_AS(experiment_from_config(Config::from_string("split.train_fraction=1.2\n")),
                  ConfigError);
}

namespace {
Config small_run_config() {
  return Config::from_string(
      "scenario=within\n"
      "repeats=2\n"
      "synth.channels=4\n"
      "synth.samples=32\n"
      "synth.trials_per_class=16\n"
      "synth.subjects=2\n"
      "synth.noise_std=0.3\n"
      "model.kind=csp_lr\n"
      "model.spatial_filters=2\n"
      "train.epochs=30\n"
      "evasion.steps=2\n"
      "evasion.epochs=8\n"
      "evasion.lr=0.05\n"
      "seed=5\n");
}
}  // namespace

TEST_CASE("evasion runner: rows per condition, reuse of the clean model, determinism") {
  const ExperimentConfig e = experiment_from_config(small_run_config());
  const report::AttackReport rep = run_evasion(e);
  REQUIRE(rep.errors.empty());
  std::map<std::string, int> per_condition;
  for (const auto& row : rep.rows) ++per_condition[row.condition];
  CHECK(per_condition["clean"] == 2);
  CHECK(per_condition["noisy"] == 2);
  CHECK(per_condition["adversarial"] == 2);
  CHECK_FALSE(rep.alpha_trace.empty());

  // identical config + seed give a byte-identical CSV
  const report::AttackReport rep2 = run_evasion(e);
  std::ostringstream csv1, csv2;
  report::write_csv(csv1, {rep});
  report::write_csv(csv2, {rep2});
  CHECK(csv1.str() == csv2.str());

  // parallel workers produce the same bytes
  ExperimentConfig par = e;
  par.workers = 2;
  const report::AttackReport rep3 = run_evasion(par);
  std::ostringstream csv3;
  report::write_csv(csv3, {rep3});
  CHECK(csv3.str() == csv1.str());
}

TEST_CASE("failed repeats are recorded, remaining repeats proceed") {
  Config cfg = small_run_config();
  cfg.set("backdoor.ratio", "0.0001");  // rounds to zero poisoned trials
  const ExperimentConfig e = experiment_from_config(cfg);
  const report::AttackReport rep = run_backdoor(e);
  CHECK(rep.rows.empty());
  CHECK(rep.errors.size() == 2);  // one entry per repeat
}

TEST_CASE("report round trip and merge ordering") {
  const ExperimentConfig e = experiment_from_config(small_run_config());
  const report::AttackReport rep = run_evasion(e);
  const fs::path dir = fs::temp_directory_path() / "adfilt_experiment_test";
  fs::create_directories(dir);
  report::save_report(dir / "run.json", rep);
  const report::AttackReport loaded = report::load_report(dir / "run.json");
  CHECK(loaded.rows.size() == rep.rows.size());
  CHECK(loaded.config_hash == rep.config_hash);
  CHECK(loaded.alpha_trace.size() == rep.alpha_trace.size());

  std::ostringstream a, b;
  report::write_csv(a, {rep, loaded, rep});
  report::write_csv(b, {loaded, rep, rep});
  CHECK(a.str() == b.str());  // merge order does not matter

  // no stray temp files from atomic writes
  for (const auto& entry : fs::directory_iterator(dir)) {
    CHECK(entry.path().extension() != ".tmp");
  }
}
