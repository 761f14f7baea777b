#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "unlearn/eval.hpp"

namespace unlearn {

namespace {

using nlohmann::json;

json opt_to_json(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}

std::optional<double> opt_from_json(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

json report_to_json(const EvalReport& r) {
  json j{{"version", 1},
         {"method", r.method},
         {"acc_f", opt_to_json(r.acc_f)},
         {"acc_r", opt_to_json(r.acc_r)},
         {"acc_ft", opt_to_json(r.acc_ft)},
         {"acc_rt", opt_to_json(r.acc_rt)},
         {"hm", opt_to_json(r.hm)},
         {"hm_t", opt_to_json(r.hm_t)},
         {"am", opt_to_json(r.am)},
         {"gm", opt_to_json(r.gm)},
         {"us", opt_to_json(r.us)},
         {"mia", opt_to_json(r.mia)},
         {"zrf", opt_to_json(r.zrf)},
         {"seconds", r.seconds},
         {"dataset", r.dataset}};
  if (r.kr) {
    json kr = report_to_json(*r.kr);
    kr.erase("version");
    j["kr"] = kr;
  } else {
    j["kr"] = nullptr;
  }
  return j;
}

EvalReport report_from_json(const json& j) {
  EvalReport r;
  r.method = j.at("method").get<std::string>();
  r.acc_f = opt_from_json(j, "acc_f");
  r.acc_r = opt_from_json(j, "acc_r");
  r.acc_ft = opt_from_json(j, "acc_ft");
  r.acc_rt = opt_from_json(j, "acc_rt");
  r.hm = opt_from_json(j, "hm");
  r.hm_t = opt_from_json(j, "hm_t");
  r.am = opt_from_json(j, "am");
  r.gm = opt_from_json(j, "gm");
  r.us = opt_from_json(j, "us");
  r.mia = opt_from_json(j, "mia");
  r.zrf = opt_from_json(j, "zrf");
  r.seconds = j.value("seconds", 0.0);
  r.dataset = j.value("dataset", std::string{});
  if (j.contains("kr") && !j.at("kr").is_null()) {
    r.kr = std::make_shared<const EvalReport>(report_from_json(j.at("kr")));
  }
  return r;
}

std::string format_cell(const std::optional<double>& v) {
  if (!v) return "na";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", *v);
  return buf;
}

}  // namespace

std::string report_to_json_string(const EvalReport& report) {
  return report_to_json(report).dump(2);
}

void save_report_json(const std::string& path, const EvalReport& report) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_report_json: cannot open " + path);
  out << report_to_json_string(report) << '\n';
}

EvalReport load_report_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_report_json: cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("load_report_json: " + path + ": " + e.what());
  }
  try {
    const int version = j.at("version").get<int>();
    if (version != 1) {
      throw std::runtime_error("load_report_json: " + path + ": unsupported report version " +
                               std::to_string(version));
    }
    return report_from_json(j);
  } catch (const json::exception& e) {
    throw std::runtime_error("load_report_json: " + path + ": " + e.what());
  }
}

std::string report_csv_row(const EvalReport& r) {
  std::ostringstream row;
  row << r.method << ',' << format_cell(r.acc_f) << ',' << format_cell(r.acc_r) << ','
      << format_cell(r.acc_ft) << ',' << format_cell(r.acc_rt) << ',' << format_cell(r.hm)
      << ',' << format_cell(r.hm_t) << ',' << format_cell(r.mia) << ',' << format_cell(r.zrf);
  const EvalReport* kr = r.kr.get();
  row << ',' << format_cell(kr ? kr->acc_f : std::nullopt)
      << ',' << format_cell(kr ? kr->acc_r : std::nullopt)
      << ',' << format_cell(kr ? kr->acc_ft : std::nullopt)
      << ',' << format_cell(kr ? kr->acc_rt : std::nullopt);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", r.seconds);
  row << ',' << buf;
  return row.str();
}

void save_report_csv(const std::string& path, const std::vector<EvalReport>& reports) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_report_csv: cannot open " + path);
  out << "method,acc_f,acc_r,acc_ft,acc_rt,hm,hm_t,mia,zrf,"
         "kr_acc_f,kr_acc_r,kr_acc_ft,kr_acc_rt,seconds\n";
  for (const EvalReport& r : reports) out << report_csv_row(r) << '\n';
}

namespace {

struct Column {
  const char* name;
  std::optional<double> (*get)(const EvalReport&);
};

const Column kColumns[] = {
    {"acc_f", [](const EvalReport& r) { return r.acc_f; }},
    {"acc_r", [](const EvalReport& r) { return r.acc_r; }},
    {"acc_ft", [](const EvalReport& r) { return r.acc_ft; }},
    {"acc_rt", [](const EvalReport& r) { return r.acc_rt; }},
    {"hm", [](const EvalReport& r) { return r.hm; }},
    {"hm_t", [](const EvalReport& r) { return r.hm_t; }},
    {"mia", [](const EvalReport& r) { return r.mia; }},
    {"zrf", [](const EvalReport& r) { return r.zrf; }},
    {"kr_acc_f", [](const EvalReport& r) { return r.kr ? r.kr->acc_f : std::nullopt; }},
    {"kr_acc_r", [](const EvalReport& r) { return r.kr ? r.kr->acc_r : std::nullopt; }},
    {"seconds", [](const EvalReport& r) -> std::optional<double> { return r.seconds; }},
};

std::string mean_std_cell(const std::vector<double>& values, bool with_std) {
  if (values.empty()) return "na";
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  char buf[64];
  if (!with_std || values.size() < 2) {
    std::snprintf(buf, sizeof buf, "%.2f", mean);
    return buf;
  }
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= (n - 1.0);
  std::snprintf(buf, sizeof buf, "%.2f ± %.2f", mean, std::sqrt(var));
  return buf;
}

}  // namespace

std::string reports_to_markdown(const std::vector<EvalReport>& reports,
                                std::vector<std::string>* warnings) {
  if (reports.empty()) throw std::invalid_argument("reports_to_markdown: no reports");

  std::set<std::string> datasets;
  for (const EvalReport& r : reports) {
    if (!r.dataset.empty()) datasets.insert(r.dataset);
  }
  if (datasets.size() > 1 && warnings) {
    warnings->push_back("reports span " + std::to_string(datasets.size()) +
                        " different datasets; rows are not directly comparable");
  }

  std::map<std::string, std::vector<const EvalReport*>> by_method;
  for (const EvalReport& r : reports) by_method[r.method].push_back(&r);

  bool any_multi = false;
  for (const auto& [method, group] : by_method) any_multi |= group.size() > 1;

  std::ostringstream md;
  md << "| method | n |";
  for (const Column& c : kColumns) md << ' ' << c.name << " |";
  md << "\n|---|---|";
  for (std::size_t i = 0; i < std::size(kColumns); ++i) md << "---|";
  md << '\n';

  for (const auto& [method, group] : by_method) {
    md << "| " << method << " | " << group.size() << " |";
    for (const Column& c : kColumns) {
      std::vector<double> values;
      for (const EvalReport* r : group) {
        if (const auto v = c.get(*r)) values.push_back(*v);
      }
      md << ' ' << mean_std_cell(values, any_multi) << " |";
    }
    md << '\n';
  }
  return md.str();
}

}  // namespace unlearn
