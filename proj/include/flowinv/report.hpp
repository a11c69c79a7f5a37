#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "flowinv/errors.hpp"
#include "flowinv/parallel.hpp"
#include "flowinv/tensor.hpp"

namespace flowinv {

/// One solved instance, serialized as a single JSON line.
struct InstanceRecord {
  std::string experiment;
  std::string method;
  std::size_t instance = 0;
  std::uint64_t seed = 0;
  std::string axis_name;  // empty when not part of a sweep
  double axis_value = 0.0;
  std::string config_hash;
  std::string truth_hash;
  double psnr = std::numeric_limits<double>::quiet_NaN();
  double obs_psnr = std::numeric_limits<double>::quiet_NaN();
  double loss_first = 0.0;
  double loss_final = 0.0;
  bool ood = false;
  std::vector<double> loss_trace;
  std::vector<double> reconstruction;
  std::vector<double> final_z;
};

namespace detail {

/// JSON cannot carry inf/nan as numbers; encode them as strings.
inline nlohmann::json real_to_json(double v) {
  if (std::isnan(v)) return nullptr;
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

inline double real_from_json(const nlohmann::json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (j.is_string()) {
    const std::string& s = j.get_ref<const std::string&>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw FormatError("record: unexpected string real: " + s);
  }
  return j.get<double>();
}

}  // namespace detail

inline std::string serialize_record(const InstanceRecord& r) {
  nlohmann::json j;
  j["experiment"] = r.experiment;
  j["method"] = r.method;
  j["instance"] = r.instance;
  j["seed"] = r.seed;
  if (!r.axis_name.empty()) {
    j["axis_name"] = r.axis_name;
    j["axis_value"] = r.axis_value;
  }
  j["config_hash"] = r.config_hash;
  j["truth_hash"] = r.truth_hash;
  j["psnr"] = detail::real_to_json(r.psnr);
  j["obs_psnr"] = detail::real_to_json(r.obs_psnr);
  j["loss_first"] = r.loss_first;
  j["loss_final"] = r.loss_final;
  j["ood"] = r.ood;
  j["loss_trace"] = r.loss_trace;
  j["reconstruction"] = r.reconstruction;
  j["final_z"] = r.final_z;
  return j.dump();
}

inline InstanceRecord parse_record(const std::string& line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("record: invalid JSON line: ") + e.what());
  }
  InstanceRecord r;
  r.experiment = j.at("experiment").get<std::string>();
  r.method = j.at("method").get<std::string>();
  r.instance = j.at("instance").get<std::size_t>();
  r.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("axis_name")) {
    r.axis_name = j.at("axis_name").get<std::string>();
    r.axis_value = j.at("axis_value").get<double>();
  }
  r.config_hash = j.at("config_hash").get<std::string>();
  r.truth_hash = j.at("truth_hash").get<std::string>();
  r.psnr = detail::real_from_json(j.at("psnr"));
  r.obs_psnr = detail::real_from_json(j.at("obs_psnr"));
  r.loss_first = j.at("loss_first").get<double>();
  r.loss_final = j.at("loss_final").get<double>();
  r.ood = j.at("ood").get<bool>();
  r.loss_trace = j.at("loss_trace").get<std::vector<double>>();
  r.reconstruction = j.at("reconstruction").get<std::vector<double>>();
  r.final_z = j.at("final_z").get<std::vector<double>>();
  return r;
}

inline void write_records(const std::string& path,
                          const std::vector<InstanceRecord>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("write_records: cannot open " + path);
  for (const auto& r : records) out << serialize_record(r) << "\n";
  if (!out) throw IoError("write_records: short write to " + path);
}

inline std::vector<InstanceRecord> read_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("read_records: cannot open " + path);
  std::vector<InstanceRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    records.push_back(parse_record(line));
  }
  return records;
}

/// Aggregate over instances, grouped by (axis_value, method) in record order.
struct SummaryRow {
  std::string method;
  std::string axis_name;
  double axis_value = 0.0;
  bool has_axis = false;
  std::size_t instances = 0;
  double mean_psnr = 0.0;
  double std_psnr = 0.0;
  double mean_obs_psnr = std::numeric_limits<double>::quiet_NaN();
  double mean_final_loss = 0.0;
};

inline std::vector<SummaryRow> aggregate_records(
    const std::vector<InstanceRecord>& records) {
  // Group keys in first-seen order for stable output.
  std::vector<std::pair<std::string, std::pair<double, std::string>>> keys;
  std::map<std::string, std::vector<const InstanceRecord*>> groups;
  for (const auto& r : records) {
    std::ostringstream k;
    k << r.axis_name << "|" << r.axis_value << "|" << r.method;
    if (groups.find(k.str()) == groups.end())
      keys.push_back({k.str(), {r.axis_value, r.method}});
    groups[k.str()].push_back(&r);
  }
  std::vector<SummaryRow> rows;
  for (const auto& [key, meta] : keys) {
    const auto& group = groups[key];
    SummaryRow row;
    row.method = meta.second;
    row.axis_name = group.front()->axis_name;
    row.axis_value = meta.first;
    row.has_axis = !row.axis_name.empty();
    row.instances = group.size();
    std::vector<double> psnrs, obs, losses;
    for (const auto* r : group) {
      psnrs.push_back(r->psnr);
      losses.push_back(r->loss_final);
      if (!std::isnan(r->obs_psnr)) obs.push_back(r->obs_psnr);
    }
    double n = static_cast<double>(psnrs.size());
    row.mean_psnr = pairwise_sum(psnrs) / n;
    double var = 0.0;
    for (double p : psnrs) var += (p - row.mean_psnr) * (p - row.mean_psnr);
    row.std_psnr = n > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
    if (!obs.empty())
      row.mean_obs_psnr = pairwise_sum(obs) / static_cast<double>(obs.size());
    row.mean_final_loss = pairwise_sum(losses) / n;
    rows.push_back(row);
  }
  return rows;
}

inline std::string summary_to_csv(const std::vector<SummaryRow>& rows) {
  std::ostringstream os;
  os.precision(12);
  os << "axis_name,axis_value,method,instances,mean_psnr,std_psnr,mean_obs_psnr,"
        "mean_final_loss\n";
  for (const auto& r : rows) {
    os << r.axis_name << ",";
    if (r.has_axis) os << r.axis_value;
    os << "," << r.method << "," << r.instances << "," << r.mean_psnr << ","
       << r.std_psnr << ",";
    if (!std::isnan(r.mean_obs_psnr)) os << r.mean_obs_psnr;
    os << "," << r.mean_final_loss << "\n";
  }
  return os.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("write_text_file: cannot open " + path);
  out << text;
  if (!out) throw IoError("write_text_file: short write to " + path);
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("read_text_file: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace flowinv
