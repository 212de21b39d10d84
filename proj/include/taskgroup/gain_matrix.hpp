#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

namespace taskgroup {

// Cumulative transfer gains. Entry (i, j) is the gain from source task i to
// target task j, so row = source and column = target throughout the project.
struct GainMatrix {
  std::vector<std::string> names;
  Eigen::MatrixXd values;

  int size() const { return static_cast<int>(names.size()); }
};

inline void validate(const GainMatrix& g) {
  const int n = g.size();
  if (n < 1) throw std::invalid_argument("GainMatrix: need at least one task");
  if (g.values.rows() != n || g.values.cols() != n)
    throw std::invalid_argument("GainMatrix: values must be n x n");
  std::unordered_set<std::string> seen;
  for (const std::string& name : g.names) {
    if (name.empty()) throw std::invalid_argument("GainMatrix: empty task name");
    if (name.find(',') != std::string::npos || name.find('\n') != std::string::npos)
      throw std::invalid_argument("GainMatrix: task name contains ',' or newline: " + name);
    if (!seen.insert(name).second)
      throw std::invalid_argument("GainMatrix: duplicate task name: " + name);
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (!std::isfinite(g.values(i, j)))
        throw std::invalid_argument("GainMatrix: non-finite entry at (" +
                                    std::to_string(i) + "," + std::to_string(j) + ")");
}

inline GainMatrix make_gain_matrix(std::vector<std::string> names, Eigen::MatrixXd values) {
  GainMatrix g{std::move(names), std::move(values)};
  validate(g);
  return g;
}

// One measured pair at a collection step.
struct PairGain {
  int source = 0;
  int target = 0;
  double value = 0.0;
};

// Gains observed at a single training step. `skipped` lists pairs whose
// measurement was rejected by the loss floor; they stay visible instead of
// being silently zeroed.
struct StepGainRecord {
  int step = 1;
  std::vector<PairGain> gains;
  std::vector<std::pair<int, int>> skipped;
};

// Running per-pair sums and observation counts; the finalized matrix is the
// per-pair mean over observed steps.
struct PairAccumulator {
  Eigen::MatrixXd sums;
  Eigen::MatrixXi counts;

  explicit PairAccumulator(int n)
      : sums(Eigen::MatrixXd::Zero(n, n)), counts(Eigen::MatrixXi::Zero(n, n)) {
    if (n < 1) throw std::invalid_argument("PairAccumulator: n must be >= 1");
  }

  int size() const { return static_cast<int>(sums.rows()); }
};

inline void accumulate(PairAccumulator& acc, const StepGainRecord& rec) {
  const int n = acc.size();
  for (const PairGain& g : rec.gains) {
    if (g.source < 0 || g.source >= n || g.target < 0 || g.target >= n)
      throw std::out_of_range("accumulate: pair index out of range");
    if (!std::isfinite(g.value))
      throw std::invalid_argument("accumulate: non-finite gain value");
    acc.sums(g.source, g.target) += g.value;
    acc.counts(g.source, g.target) += 1;
  }
}

struct CoverageSummary {
  int total_pairs = 0;
  int observed_pairs = 0;
  std::vector<std::pair<int, int>> uncovered;

  bool full() const { return observed_pairs == total_pairs; }
};

// Per-pair mean over observed steps; unobserved pairs finalize to 0 (the
// no-evidence-of-transfer neutral value) and are listed in the summary.
inline GainMatrix finalize(const PairAccumulator& acc,
                           const std::vector<std::string>& names,
                           CoverageSummary* coverage = nullptr) {
  const int n = acc.size();
  if (static_cast<int>(names.size()) != n)
    throw std::invalid_argument("finalize: name count does not match accumulator");
  CoverageSummary summary;
  summary.total_pairs = n * n;
  Eigen::MatrixXd values = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (acc.counts(i, j) > 0) {
        values(i, j) = acc.sums(i, j) / static_cast<double>(acc.counts(i, j));
        ++summary.observed_pairs;
      } else {
        summary.uncovered.emplace_back(i, j);
      }
    }
  }
  if (coverage != nullptr) *coverage = std::move(summary);
  return make_gain_matrix(names, std::move(values));
}

// S_{A->j}: mean of the column-j entries over source rows in A.
inline double group_gain_to_task(const GainMatrix& s, const std::vector<int>& sources, int target) {
  if (sources.empty()) throw std::domain_error("group_gain_to_task: empty source set");
  const int n = s.size();
  if (target < 0 || target >= n) throw std::out_of_range("group_gain_to_task: target out of range");
  double sum = 0.0;
  for (int i : sources) {
    if (i < 0 || i >= n) throw std::out_of_range("group_gain_to_task: source out of range");
    sum += s.values(i, target);
  }
  return sum / static_cast<double>(sources.size());
}

// S_{A->B}: sum of S_{A->j} over targets j in B.
inline double group_to_group_gain(const GainMatrix& s, const std::vector<int>& sources,
                                  const std::vector<int>& targets) {
  if (targets.empty()) throw std::domain_error("group_to_group_gain: empty target set");
  double sum = 0.0;
  for (int j : targets) sum += group_gain_to_task(s, sources, j);
  return sum;
}

// ---------------------------------------------------------------------------
// Serialization

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& text) {
  double v = 0.0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw std::invalid_argument("could not parse number: '" + text + "'");
  return v;
}

}  // namespace detail

// CSV layout: header `task,<name_1>,...,<name_n>`, then one row per source
// task starting with its name. LF line endings.
inline void save_gain_csv(const GainMatrix& g, const std::string& path) {
  validate(g);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_gain_csv: cannot open " + path);
  out << "task";
  for (const std::string& name : g.names) out << ',' << name;
  out << '\n';
  const int n = g.size();
  for (int i = 0; i < n; ++i) {
    out << g.names[i];
    for (int j = 0; j < n; ++j) out << ',' << detail::format_double(g.values(i, j));
    out << '\n';
  }
  if (!out) throw std::runtime_error("save_gain_csv: write failed for " + path);
}

inline GainMatrix load_gain_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_gain_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("load_gain_csv: empty file " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();

  auto split = [](const std::string& text) {
    std::vector<std::string> fields;
    std::stringstream ss(text);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!text.empty() && text.back() == ',') fields.emplace_back();
    return fields;
  };

  std::vector<std::string> header = split(line);
  if (header.size() < 2 || header[0] != "task")
    throw std::runtime_error("load_gain_csv: malformed header in " + path);
  std::vector<std::string> names(header.begin() + 1, header.end());
  const int n = static_cast<int>(names.size());

  Eigen::MatrixXd values(n, n);
  for (int i = 0; i < n; ++i) {
    if (!std::getline(in, line))
      throw std::runtime_error("load_gain_csv: missing row " + std::to_string(i));
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> fields = split(line);
    if (static_cast<int>(fields.size()) != n + 1 || fields[0] != names[i])
      throw std::runtime_error("load_gain_csv: malformed row for task " + names[i]);
    for (int j = 0; j < n; ++j) values(i, j) = detail::parse_double(fields[j + 1]);
  }
  return make_gain_matrix(std::move(names), std::move(values));
}

// JSON-lines record log, one object per collection step:
//   {"step":t,"gains":[[i,j,value],...]}
// with an extra "skipped":[[i,j],...] field when measurements were rejected.
inline void save_record_log(const std::vector<StepGainRecord>& log, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_record_log: cannot open " + path);
  for (const StepGainRecord& rec : log) {
    out << "{\"step\":" << rec.step << ",\"gains\":[";
    for (std::size_t k = 0; k < rec.gains.size(); ++k) {
      const PairGain& g = rec.gains[k];
      if (k > 0) out << ',';
      out << '[' << g.source << ',' << g.target << ',' << detail::format_double(g.value) << ']';
    }
    out << ']';
    if (!rec.skipped.empty()) {
      out << ",\"skipped\":[";
      for (std::size_t k = 0; k < rec.skipped.size(); ++k) {
        if (k > 0) out << ',';
        out << '[' << rec.skipped[k].first << ',' << rec.skipped[k].second << ']';
      }
      out << ']';
    }
    out << '}' << '\n';
  }
  if (!out) throw std::runtime_error("save_record_log: write failed for " + path);
}

inline std::vector<StepGainRecord> load_record_log(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_record_log: cannot open " + path);
  std::vector<StepGainRecord> log;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    StepGainRecord rec;
    rec.step = j.at("step").get<int>();
    for (const auto& entry : j.at("gains")) {
      rec.gains.push_back(PairGain{entry.at(0).get<int>(), entry.at(1).get<int>(),
                                   entry.at(2).get<double>()});
    }
    if (j.contains("skipped")) {
      for (const auto& entry : j["skipped"])
        rec.skipped.emplace_back(entry.at(0).get<int>(), entry.at(1).get<int>());
    }
    log.push_back(std::move(rec));
  }
  return log;
}

}  // namespace taskgroup
