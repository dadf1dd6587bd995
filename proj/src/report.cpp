#include "adfilt/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "adfilt/errors.hpp"

namespace adfilt::report {

using nlohmann::json;

namespace {

std::string fmt_double(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

json row_to_json(const ReportRow& r) {
  json j;
  j["scenario"] = r.scenario;
  j["dataset"] = r.dataset;
  j["model"] = r.model;
  j["condition"] = r.condition;
  j["repeat"] = r.repeat;
  j["bca"] = std::isnan(r.bca) ? json() : json(r.bca);
  j["asr"] = std::isnan(r.asr) ? json() : json(r.asr);
  j["rmse"] = std::isnan(r.rmse) ? json() : json(r.rmse);
  j["alpha"] = std::isnan(r.alpha) ? json() : json(r.alpha);
  j["seed"] = r.seed;
  return j;
}

double json_or_nan(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return NAN;
  return j.at(key).get<double>();
}

struct Stats {
  int count = 0;
  double mean = NAN;
  double std = NAN;
};

Stats stats_of(const std::vector<double>& xs) {
  Stats s;
  std::vector<double> v;
  for (double x : xs) {
    if (!std::isnan(x)) v.push_back(x);
  }
  s.count = static_cast<int>(v.size());
  if (v.empty()) return s;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= static_cast<double>(v.size());
  s.mean = mean;
  s.std = std::sqrt(var);
  return s;
}

void atomic_write(const std::filesystem::path& path, const std::string& bytes) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write '" + tmp.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.close();
  if (!out) throw FormatError("write failed for '" + tmp.string() + "'");
  std::filesystem::rename(tmp, path);
}

}  // namespace

std::vector<ConditionSummary> AttackReport::summarize() const {
  std::map<std::string, std::vector<const ReportRow*>> by_condition;
  std::vector<std::string> order;
  for (const auto& r : rows) {
    if (!by_condition.count(r.condition)) order.push_back(r.condition);
    by_condition[r.condition].push_back(&r);
  }
  std::vector<ConditionSummary> out;
  for (const auto& cond : order) {
    const auto& rs = by_condition[cond];
    ConditionSummary s;
    s.condition = cond;
    s.count = static_cast<int>(rs.size());
    std::vector<double> bcas, asrs, rmses;
    for (const auto* r : rs) {
      bcas.push_back(r->bca);
      asrs.push_back(r->asr);
      rmses.push_back(r->rmse);
    }
    const Stats b = stats_of(bcas), a = stats_of(asrs), m = stats_of(rmses);
    s.bca_mean = b.mean;
    s.bca_std = b.std;
    s.asr_mean = a.mean;
    s.asr_std = a.std;
    s.rmse_mean = m.mean;
    s.rmse_std = m.std;
    out.push_back(std::move(s));
  }
  return out;
}

void save_report(const std::filesystem::path& path, const AttackReport& report) {
  json j;
  j["format"] = "adfilt-report";
  j["version"] = 1;
  j["scenario"] = report.scenario;
  j["dataset"] = report.dataset;
  j["model"] = report.model;
  j["config_hash"] = report.config_hash;
  j["master_seed"] = report.master_seed;
  j["rows"] = json::array();
  for (const auto& r : report.rows) j["rows"].push_back(row_to_json(r));
  j["alpha_trace"] = json::array();
  for (const auto& t : report.alpha_trace) {
    j["alpha_trace"].push_back({{"repeat", t.repeat},
                                {"fold", t.fold},
                                {"step", t.step},
                                {"alpha", t.alpha},
                                {"validation_bca", t.validation_bca},
                                {"accepted", t.accepted}});
  }
  j["errors"] = report.errors;
  atomic_write(path, j.dump(2) + "\n");
}

AttackReport load_report(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what(), e.byte);
  }
  try {
    if (j.at("format").get<std::string>() != "adfilt-report") {
      throw FormatError(path.string() + ": not a report file");
    }
    AttackReport r;
    r.scenario = j.at("scenario").get<std::string>();
    r.dataset = j.at("dataset").get<std::string>();
    r.model = j.at("model").get<std::string>();
    r.config_hash = j.at("config_hash").get<std::string>();
    r.master_seed = j.at("master_seed").get<std::uint64_t>();
    for (const auto& rj : j.at("rows")) {
      ReportRow row;
      row.scenario = rj.at("scenario").get<std::string>();
      row.dataset = rj.at("dataset").get<std::string>();
      row.model = rj.at("model").get<std::string>();
      row.condition = rj.at("condition").get<std::string>();
      row.repeat = rj.at("repeat").get<int>();
      row.bca = json_or_nan(rj, "bca");
      row.asr = json_or_nan(rj, "asr");
      row.rmse = json_or_nan(rj, "rmse");
      row.alpha = json_or_nan(rj, "alpha");
      row.seed = rj.at("seed").get<std::uint64_t>();
      r.rows.push_back(std::move(row));
    }
    for (const auto& tj : j.at("alpha_trace")) {
      AlphaTraceRow t;
      t.repeat = tj.at("repeat").get<int>();
      t.fold = tj.at("fold").get<int>();
      t.step = tj.at("step").get<int>();
      t.alpha = tj.at("alpha").get<double>();
      t.validation_bca = tj.at("validation_bca").get<double>();
      t.accepted = tj.at("accepted").get<bool>();
      r.alpha_trace.push_back(t);
    }
    r.errors = j.at("errors").get<std::vector<std::string>>();
    return r;
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_csv(std::ostream& out, const std::vector<AttackReport>& reports) {
  std::vector<const ReportRow*> rows;
  for (const auto& r : reports) {
    for (const auto& row : r.rows) rows.push_back(&row);
  }
  std::stable_sort(rows.begin(), rows.end(), [](const ReportRow* a, const ReportRow* b) {
    auto key = [](const ReportRow& r) {
      return std::tie(r.scenario, r.dataset, r.model, r.condition, r.repeat);
    };
    return key(*a) < key(*b);
  });
  out << "scenario,dataset,model,condition,repeat,bca,asr,rmse,alpha,seed\n";
  for (const auto* r : rows) {
    out << r->scenario << ',' << r->dataset << ',' << r->model << ',' << r->condition << ','
        << r->repeat << ',' << fmt_double(r->bca) << ',' << fmt_double(r->asr) << ','
        << fmt_double(r->rmse) << ',' << fmt_double(r->alpha) << ',' << r->seed << '\n';
  }
}

void write_csv(const std::filesystem::path& path, const std::vector<AttackReport>& reports) {
  std::ostringstream ss;
  write_csv(ss, reports);
  atomic_write(path, ss.str());
}

std::string render_table(const std::vector<AttackReport>& reports) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-10s %-12s %-12s %-22s %5s %-17s %-17s %-12s\n", "scenario",
                "dataset", "model", "condition", "n", "bca", "asr", "rmse");
  out << line;
  auto cell = [](double mean, double std) -> std::string {
    if (std::isnan(mean)) return "-";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4f±%.4f", mean, std);
    return buf;
  };
  for (const auto& r : reports) {
    for (const auto& s : r.summarize()) {
      std::snprintf(line, sizeof(line), "%-10s %-12s %-12s %-22s %5d %-17s %-17s %-12s\n",
                    r.scenario.c_str(), r.dataset.c_str(), r.model.c_str(), s.condition.c_str(),
                    s.count, cell(s.bca_mean, s.bca_std).c_str(),
                    cell(s.asr_mean, s.asr_std).c_str(), cell(s.rmse_mean, s.rmse_std).c_str());
      out << line;
    }
    if (!r.errors.empty()) {
      out << "  errors:\n";
      for (const auto& e : r.errors) out << "    " << e << "\n";
    }
  }
  return out.str();
}

}  // namespace adfilt::report
