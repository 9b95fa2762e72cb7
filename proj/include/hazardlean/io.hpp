#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "hazardlean/grid.hpp"

namespace hazardlean {

namespace fs = std::filesystem;

inline std::string fmt_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline double parse_double(std::string_view s, std::size_t line_no) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s == "nan") return std::nan("");
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw UsageError("line " + std::to_string(line_no) + ": cannot parse number '" + std::string(s) + "'");
  return v;
}

inline fs::path sidecar_path(const fs::path& csv) {
  auto p = csv;
  p.replace_extension(".json");
  return p;
}

inline void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw UsageError("cannot write " + path.string());
  f << text;
  if (!f) throw UsageError("write failed for " + path.string());
}

inline std::string read_text(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw UsageError("cannot read " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

/** Long format: one row per (subject, grid index). */
inline std::string sample_to_csv(const SurvivalSample& s) {
  std::string out = "subject_id,time_index,x";
  for (std::size_t k = 0; k < s.d(); ++k) out += ",z_" + std::to_string(k + 1);
  out += ",at_risk,event_increment\n";
  for (std::size_t j = 0; j < s.n(); ++j) {
    const auto& p = s[j];
    for (std::size_t i = 0; i < s.q(); ++i) {
      out += std::to_string(j);
      out += ',';
      out += std::to_string(i);
      out += ',';
      out += fmt_double(p.x(i));
      for (std::size_t k = 0; k < s.d(); ++k) {
        out += ',';
        out += fmt_double(p.z(i, k));
      }
      out += p.at_risk(i) > 0 ? ",1" : ",0";
      out += p.event_increment(i) > 0 ? ",1\n" : ",0\n";
    }
  }
  return out;
}

inline void write_sample(const fs::path& csv, const SurvivalSample& s) {
  write_text(csv, sample_to_csv(s));
  write_json(sidecar_path(csv), {{"q", s.q()}, {"n", s.n()}, {"d", s.d()}, {"metadata", s.metadata()}});
}

/**
 * Parses the long CSV. Subjects must be listed with contiguous time_index
 * 0..q-1; at_risk must be a 1..1 0..0 pattern and an event can only sit on
 * the last at-risk row.
 */
inline SurvivalSample sample_from_csv(const std::string& text, nlohmann::json metadata = nlohmann::json::object()) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw UsageError("dataset is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto head = split_csv_line(line);
  if (head.size() < 5 || head[0] != "subject_id" || head[1] != "time_index" || head[2] != "x")
    throw UsageError("header must start with subject_id,time_index,x");
  const std::size_t d = head.size() - 5;
  for (std::size_t k = 0; k < d; ++k)
    if (head[3 + k] != "z_" + std::to_string(k + 1))
      throw UsageError("expected column z_" + std::to_string(k + 1) + ", got " + std::string(head[3 + k]));
  if (head[3 + d] != "at_risk" || head[4 + d] != "event_increment")
    throw UsageError("header must end with at_risk,event_increment");

  struct Rows {
    std::vector<double> x, y, dn;
    std::vector<std::vector<double>> z;
  };
  std::vector<Rows> subj;
  std::vector<long long> ids;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != head.size()) throw UsageError("line " + std::to_string(line_no) + ": wrong field count");
    const auto id = static_cast<long long>(parse_double(f[0], line_no));
    const auto ti = static_cast<std::size_t>(parse_double(f[1], line_no));
    if (ids.empty() || ids.back() != id) {
      ids.push_back(id);
      subj.emplace_back();
    }
    auto& r = subj.back();
    if (ti != r.x.size())
      throw UsageError("line " + std::to_string(line_no) + ": time_index out of order for subject " +
                       std::to_string(id));
    r.x.push_back(parse_double(f[2], line_no));
    std::vector<double> zr(d);
    for (std::size_t k = 0; k < d; ++k) zr[k] = parse_double(f[3 + k], line_no);
    r.z.push_back(std::move(zr));
    r.y.push_back(parse_double(f[3 + d], line_no));
    r.dn.push_back(parse_double(f[4 + d], line_no));
  }
  if (subj.empty()) throw UsageError("dataset has no rows");
  const std::size_t q = subj.front().x.size();
  std::vector<SubjectPath> paths;
  paths.reserve(subj.size());
  for (std::size_t j = 0; j < subj.size(); ++j) {
    const auto& r = subj[j];
    const std::string who = "subject " + std::to_string(ids[j]);
    if (r.x.size() != q) throw UsageError(who + " has " + std::to_string(r.x.size()) + " rows, expected " + std::to_string(q));
    if (r.y[0] != 1.0) throw UsageError(who + " is not at risk at time 0");
    std::size_t e = 0;
    while (e + 1 < q && r.y[e + 1] == 1.0) ++e;
    for (std::size_t i = e + 1; i < q; ++i)
      if (r.y[i] != 0.0) throw UsageError(who + ": at_risk is not a 1..1 0..0 pattern");
    bool delta = false;
    for (std::size_t i = 0; i < q; ++i) {
      if (r.dn[i] == 0.0) continue;
      if (r.dn[i] != 1.0 || i != e || delta) throw UsageError(who + ": event_increment must be one jump at the last at-risk row");
      delta = true;
    }
    if (!delta && e + 1 != q) throw UsageError(who + ": leaves the risk set before 1 without an event");
    Eigen::MatrixXd z(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < q; ++i)
      for (std::size_t k = 0; k < d; ++k) z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = r.z[i][k];
    paths.emplace_back(std::move(z), r.x, e, delta);
  }
  return SurvivalSample(TimeGrid(q), std::move(paths), std::move(metadata));
}

inline SurvivalSample read_sample(const fs::path& csv) {
  nlohmann::json meta = nlohmann::json::object();
  const auto side = sidecar_path(csv);
  if (fs::exists(side)) {
    try {
      meta = nlohmann::json::parse(read_text(side)).value("metadata", nlohmann::json::object());
    } catch (const nlohmann::json::exception& e) {
      throw UsageError("bad sidecar " + side.string() + ": " + e.what());
    }
  }
  return sample_from_csv(read_text(csv), std::move(meta));
}

/** Simple column table written as CSV. */
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  void add(std::vector<std::string> r) {
    if (r.size() != columns.size()) throw DimensionError("table row width differs from header");
    rows.push_back(std::move(r));
  }
  std::string to_csv() const {
    std::string out;
    for (std::size_t c = 0; c < columns.size(); ++c) out += (c ? "," : "") + columns[c];
    out += '\n';
    for (const auto& r : rows) {
      for (std::size_t c = 0; c < r.size(); ++c) out += (c ? "," : "") + r[c];
      out += '\n';
    }
    return out;
  }
  nlohmann::json to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : rows) {
      nlohmann::json o = nlohmann::json::object();
      for (std::size_t c = 0; c < columns.size(); ++c) o[columns[c]] = r[c];
      arr.push_back(o);
    }
    return arr;
  }
};

inline Table path_table(const TimeGrid& grid, const std::vector<std::pair<std::string, const std::vector<double>*>>& cols) {
  Table t;
  t.columns.push_back("t");
  for (const auto& c : cols) t.columns.push_back(c.first);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    std::vector<std::string> r{fmt_double(grid[i])};
    for (const auto& c : cols) r.push_back(fmt_double((*c.second)[i]));
    t.add(std::move(r));
  }
  return t;
}

// json has no NaN; masked values become null
inline nlohmann::json json_path(const std::vector<double>& v) {
  nlohmann::json a = nlohmann::json::array();
  for (double x : v) {
    if (std::isfinite(x))
      a.push_back(x);
    else
      a.push_back(nullptr);
  }
  return a;
}

}  // namespace hazardlean
