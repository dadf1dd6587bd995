// adfilt command-line experiment runner.
//
// Subcommands: synth, ingest, train, evasion, backdoor, sweep-alpha,
// sweep-poison, transfer, report. Exit codes: 0 success, 2 config error,
// 3 data/format error, 4 numerical failure.

#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "adfilt/etrc.hpp"
#include "adfilt/experiment.hpp"
#include "adfilt/metrics.hpp"

namespace fs = std::filesystem;
using namespace adfilt;

namespace {

struct GlobalOpts {
  std::string config_path;
  std::vector<std::string> overrides;  // KEY=VALUE pairs
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out_dir;
  int workers = 0;
  bool print_config = false;
};

runner::Config resolve_config(const GlobalOpts& g) {
  runner::Config cfg = g.config_path.empty() ? runner::Config()
                                             : runner::Config::from_file(g.config_path);
  for (const auto& kv : g.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("--set expects KEY=VALUE, got '" + kv + "'");
    }
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (g.seed_set) cfg.set("seed", std::to_string(g.seed));
  if (!g.out_dir.empty()) cfg.set("out", g.out_dir);
  if (g.workers > 0) cfg.set("workers", std::to_string(g.workers));
  return cfg;
}

runner::ExperimentConfig make_experiment(const GlobalOpts& g) {
  const runner::Config cfg = resolve_config(g);
  if (g.print_config) {
    std::cout << cfg.resolved();
    std::cout << "# config_hash=" << cfg.hash() << "\n";
  }
  return runner::experiment_from_config(cfg);
}

void write_run_report(const runner::ExperimentConfig& cfg, const std::string& name,
                      const report::AttackReport& rep) {
  fs::create_directories(cfg.out_dir);
  const fs::path json_path = cfg.out_dir / (name + ".report.json");
  report::save_report(json_path, rep);
  report::write_csv(cfg.out_dir / (name + ".report.csv"), {rep});
  std::cout << report::render_table({rep});
  std::cout << "report written to " << json_path.string() << "\n";
  if (!rep.errors.empty()) {
    std::cerr << rep.errors.size() << " repeat(s) failed; see the report for details\n";
  }
}

int dispatch(const std::string& name, const GlobalOpts& g,
             report::AttackReport (*fn)(const runner::ExperimentConfig&)) {
  const auto cfg = make_experiment(g);
  const auto rep = fn(cfg);
  write_run_report(cfg, name, rep);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial spatial-filter attacks on EEG classifiers"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--config", g.config_path, "key=value config file");
  app.add_option("--set", g.overrides, "override a config entry (KEY=VALUE)")
      ->take_all();
  app.add_option("--seed", g.seed, "master seed")->each([&](const std::string&) {
    g.seed_set = true;
  });
  app.add_option("--out", g.out_dir, "output directory");
  app.add_option("--workers", g.workers, "parallel repeat workers");
  app.add_flag("--print-config", g.print_config, "echo the fully resolved config");

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic ETRC dataset");
  std::string synth_out = "synthetic.etrc";
  std::string synth_csv_dir;
  synth->add_option("output", synth_out, "ETRC output path");
  synth->add_option("--export-csv", synth_csv_dir, "also write the CSV layout here");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "convert a CSV trial directory to ETRC");
  std::string ingest_dir, ingest_out = "ingested.etrc";
  ingest->add_option("directory", ingest_dir, "CSV directory with manifest.csv")->required();
  ingest->add_option("output", ingest_out, "ETRC output path");

  // train
  auto* train = app.add_subcommand("train", "train a victim model and save it");
  std::string train_model_out = "model";
  train->add_option("output", train_model_out, "model output stem (.json/.bin)");

  auto* evasion = app.add_subcommand("evasion", "adversarial-filter evasion experiment");
  auto* backdoor = app.add_subcommand("backdoor", "filter-keyed backdoor experiment");
  auto* sweep_alpha = app.add_subcommand("sweep-alpha", "alpha grid without binary search");
  auto* sweep_poison = app.add_subcommand("sweep-poison", "poisoning-ratio grid");
  auto* transfer = app.add_subcommand("transfer", "cross-model filter transferability");

  // report
  auto* report_cmd = app.add_subcommand("report", "merge run reports into CSV and a table");
  std::vector<std::string> report_inputs;
  std::string report_csv = "report.csv";
  report_cmd->add_option("inputs", report_inputs, "report JSON files")->required();
  report_cmd->add_option("--csv", report_csv, "merged CSV output path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      const auto cfg = make_experiment(g);
      const eeg::EegDataset ds = eeg::synthesize(cfg.synth);
      eeg::save_dataset(synth_out, ds);
      std::cout << "wrote " << ds.size() << " trials (C=" << ds.channels()
                << ", T=" << ds.samples() << ", K=" << ds.num_classes << ") to " << synth_out
                << "\n";
      if (!synth_csv_dir.empty()) {
        eeg::export_csv(synth_csv_dir, ds);
        std::cout << "CSV layout written to " << synth_csv_dir << "\n";
      }
      return 0;
    }
    if (ingest->parsed()) {
      const eeg::EegDataset ds = eeg::import_csv(ingest_dir);
      eeg::save_dataset(ingest_out, ds);
      std::cout << "wrote " << ds.size() << " trials to " << ingest_out << "\n";
      return 0;
    }
    if (train->parsed()) {
      const auto cfg = make_experiment(g);
      eeg::EegDataset ds = runner::load_experiment_dataset(cfg);
      models::TrainConfig tc = cfg.train;
      tc.seed = cfg.master_seed;
      auto model = models::make_model(cfg.model, ds.channels(), ds.samples(), ds.num_classes);
      model->fit(ds, tc, nullptr);
      const double train_bca =
          metrics::bca(model->predict(ds), ds.labels(), ds.num_classes);
      models::save_model(train_model_out, *model);
      std::cout << "trained " << model->kind() << " (training BCA " << train_bca << "), saved to "
                << train_model_out << ".json/.bin\n";
      return 0;
    }
    if (evasion->parsed()) return dispatch("evasion", g, runner::run_evasion);
    if (backdoor->parsed()) return dispatch("backdoor", g, runner::run_backdoor);
    if (sweep_alpha->parsed()) return dispatch("sweep-alpha", g, runner::run_sweep_alpha);
    if (sweep_poison->parsed()) return dispatch("sweep-poison", g, runner::run_sweep_poison);
    if (transfer->parsed()) return dispatch("transfer", g, runner::run_transfer);
    if (report_cmd->parsed()) {
      std::vector<report::AttackReport> reports;
      for (const auto& path : report_inputs) {
        reports.push_back(report::load_report(path));
      }
      report::write_csv(fs::path(report_csv), reports);
      std::cout << report::render_table(reports);
      std::cout << "merged CSV written to " << report_csv << "\n";
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return 3;
  } catch (const TrainError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 4;
  } catch (const NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 4;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
