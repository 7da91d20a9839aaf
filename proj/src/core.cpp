/*
* Copyright 2026 The catrl Authors.
*
* Licensed under the Apache License, Version 2.0 (the "License");
* you may not use this file except in compliance with the License.
* You may obtain a copy of the License at
*
*     https://www.apache.org/licenses/LICENSE-2.0
*
* Unless required by applicable law or agreed to in writing, software
* distributed under the License is distributed on an "AS IS" BASIS,
* WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
* See the License for the specific language governing permissions and
* limitations under the License.
* ============================================================================
*/

#include "catrl/core.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <system_error>

#include "catrl/error.hpp"

namespace catrl {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cell);
      cell.clear();
    } else if (c != '\r') {
      cell.push_back(c);
    }
  }
  cells.push_back(cell);
  return cells;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t");
  return s.substr(first, last - first + 1);
}

double parse_real(const std::string& cell, std::size_t line, const std::string& column) {
  const std::string s = trim(cell);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw ConfigError("line " + std::to_string(line) + ": column " + column + ": not a finite number: '" + cell + "'");
  }
  return v;
}

int parse_indicator(const std::string& cell, std::size_t line, const std::string& column) {
  const std::string s = trim(cell);
  if (s == "0") return 0;
  if (s == "1") return 1;
  throw ConfigError("line " + std::to_string(line) + ": column " + column + ": non-binary indicator '" + cell + "'");
}

int parse_treatment(const std::string& cell, std::size_t line, const std::string& column) {
  const double v = parse_real(cell, line, column);
  if (v < 0 || v != std::floor(v)) {
    throw ConfigError("line " + std::to_string(line) + ": column " + column + ": treatment must be a non-negative integer");
  }
  return static_cast<int>(v);
}

std::vector<std::string> expected_header(const SchemaSpec& schema) {
  std::vector<std::string> cols;
  for (int k = 0; k < schema.stages(); ++k) {
    const std::string s = std::to_string(k + 1);
    for (const auto& name : schema.covariates[static_cast<std::size_t>(k)].names) cols.push_back("X" + s + "_" + name);
    cols.push_back("A" + s);
    cols.push_back("R" + s);
    cols.push_back("delta" + s);
    cols.push_back("eta" + s);
  }
  cols.push_back("T");
  return cols;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;  // (line number, cells)
};

CsvTable read_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  CsvTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty() || line.front() == '#') continue;
    auto cells = split_csv_line(line);
    if (table.header.empty()) {
      for (auto& c : cells) c = trim(c);
      table.header = std::move(cells);
    } else {
      table.rows.emplace_back(line_no, std::move(cells));
    }
  }
  if (table.header.empty()) throw ConfigError(path.string() + ": missing header");
  return table;
}

void check_schema(const SchemaSpec& schema) {
  if (schema.stages() < 1) throw ConfigError("schema has no stages");
  if (schema.arity.size() != schema.covariates.size()) throw ConfigError("schema arity count does not match stage count");
  for (int k = 0; k < schema.stages(); ++k) {
    const auto& names = schema.covariates[static_cast<std::size_t>(k)].names;
    if (names.empty()) throw ConfigError("stage " + std::to_string(k + 1) + " has no covariates");
    auto sorted = names;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw ConfigError("stage " + std::to_string(k + 1) + " has duplicate covariate names");
    }
    if (schema.arity[static_cast<std::size_t>(k)] < 2) throw ConfigError("stage " + std::to_string(k + 1) + " arity must be >= 2");
  }
}

}  // namespace

int Trajectory::stages_entered() const {
  int n = 0;
  for (const auto& s : stages) {
    if (!s.entered) break;
    ++n;
  }
  return n;
}

double Trajectory::elapsed_before(int k) const {
  double t = 0.0;
  for (int j = 0; j < k; ++j) t += stages[static_cast<std::size_t>(j)].duration.value_or(0.0);
  return t;
}

bool Trajectory::final_event() const {
  const int n = stages_entered();
  return n > 0 && stages[static_cast<std::size_t>(n - 1)].event;
}

double Dataset::censoring_rate() const {
  if (trajectories.empty()) return 0.0;
  std::size_t censored = 0;
  for (const auto& t : trajectories) censored += t.final_event() ? 0 : 1;
  return static_cast<double>(censored) / static_cast<double>(trajectories.size());
}

Dataset Dataset::subset(const std::vector<std::size_t>& rows) const {
  Dataset out;
  out.schema = schema;
  out.trajectories.reserve(rows.size());
  for (auto r : rows) out.trajectories.push_back(trajectories.at(r));
  return out;
}

std::vector<std::string> history_names(const SchemaSpec& schema, int k) {
  std::vector<std::string> names;
  for (int j = 0; j <= k; ++j) {
    const std::string s = std::to_string(j + 1);
    for (const auto& n : schema.covariates.at(static_cast<std::size_t>(j)).names) names.push_back("X" + s + "_" + n);
    if (j < k) {
      names.push_back("A" + s);
      names.push_back("R" + s);
    }
  }
  return names;
}

std::size_t history_length(const SchemaSpec& schema, int k) {
  std::size_t n = 0;
  for (int j = 0; j < k; ++j) n += schema.covariates.at(static_cast<std::size_t>(j)).size() + 2;
  return n + schema.covariates.at(static_cast<std::size_t>(k)).size();
}

History build_history(const Trajectory& traj, int k) {
  if (k < 0 || static_cast<std::size_t>(k) >= traj.stages.size()) {
    throw ConfigError("stage index " + std::to_string(k + 1) + " out of range");
  }
  History h;
  for (int j = 0; j <= k; ++j) {
    const auto& s = traj.stages[static_cast<std::size_t>(j)];
    if (!s.entered) throw ConfigError("stage " + std::to_string(j + 1) + " not entered");
    h.insert(h.end(), s.covariates.begin(), s.covariates.end());
    if (j < k) {
      if (!s.treatment || !s.duration) throw ConfigError("stage " + std::to_string(j + 1) + " lacks treatment or duration");
      h.push_back(static_cast<double>(*s.treatment));
      h.push_back(*s.duration);
    }
  }
  return h;
}

std::vector<Violation> validate(const Dataset& dataset) {
  std::vector<Violation> out;
  const int K = dataset.stages();
  for (std::size_t i = 0; i < dataset.trajectories.size(); ++i) {
    const auto& traj = dataset.trajectories[i];
    auto report = [&](std::string msg) { out.push_back({i, std::move(msg)}); };
    if (static_cast<int>(traj.stages.size()) != K) {
      report("stage count mismatch");
      continue;
    }
    if (!traj.stages[0].entered) report("eta_1 must be 1");
    double total = 0.0;
    for (int k = 0; k < K; ++k) {
      const auto& s = traj.stages[static_cast<std::size_t>(k)];
      if (k > 0) {
        const auto& prev = traj.stages[static_cast<std::size_t>(k - 1)];
        if (s.entered && !prev.entered) report("eta not monotone");
        if (s.entered && prev.entered && !prev.event) report("eta after censoring");
      }
      if (!s.entered) continue;
      if (s.covariates.size() != dataset.schema.covariates[static_cast<std::size_t>(k)].size()) {
        report("covariate count mismatch");
      }
      if (!s.treatment || !s.duration) {
        report("missing field");
        continue;
      }
      if (*s.treatment < 0 || *s.treatment >= dataset.arity(k)) report("treatment out of range");
      if (*s.duration < 0) report("negative duration");
      total += *s.duration;
    }
    if (std::abs(total - traj.total_time) > 1e-9 * std::max(1.0, std::abs(traj.total_time))) {
      report("total time mismatch");
    }
  }
  return out;
}

SchemaSpec infer_schema(const std::filesystem::path& path) {
  const CsvTable table = read_table(path);
  std::map<int, std::vector<std::string>> covs;
  int max_stage = 0;
  for (const auto& col : table.header) {
    if (col.size() > 1 && col[0] == 'X') {
      const auto us = col.find('_');
      if (us == std::string::npos) throw ConfigError("bad covariate column '" + col + "'");
      const int k = std::stoi(col.substr(1, us - 1));
      covs[k].push_back(col.substr(us + 1));
      max_stage = std::max(max_stage, k);
    } else if (col.size() > 1 && col[0] == 'A') {
      max_stage = std::max(max_stage, std::stoi(col.substr(1)));
    }
  }
  SchemaSpec schema;
  for (int k = 1; k <= max_stage; ++k) {
    schema.covariates.push_back({covs[k]});
    const std::string a_col = "A" + std::to_string(k);
    const auto it = std::find(table.header.begin(), table.header.end(), a_col);
    if (it == table.header.end()) throw ConfigError("missing column " + a_col);
    const auto idx = static_cast<std::size_t>(it - table.header.begin());
    int max_arm = 1;
    for (const auto& [line, cells] : table.rows) {
      if (idx < cells.size() && !trim(cells[idx]).empty()) max_arm = std::max(max_arm, parse_treatment(cells[idx], line, a_col));
    }
    schema.arity.push_back(max_arm + 1);
  }
  check_schema(schema);
  return schema;
}

std::vector<std::vector<double>> load_csv_columns(const std::filesystem::path& path,
                                                  const std::vector<std::string>& columns) {
  const CsvTable table = read_table(path);
  std::vector<std::size_t> index;
  for (const auto& name : columns) {
    const auto it = std::find(table.header.begin(), table.header.end(), name);
    if (it == table.header.end()) throw ConfigError(path.string() + ": missing column " + name);
    index.push_back(static_cast<std::size_t>(it - table.header.begin()));
  }
  if (table.rows.empty()) throw ConfigError(path.string() + ": no data rows");
  std::vector<std::vector<double>> out;
  out.reserve(table.rows.size());
  for (const auto& [line, cells] : table.rows) {
    if (cells.size() != table.header.size()) {
      throw ConfigError("line " + std::to_string(line) + ": expected " + std::to_string(table.header.size()) +
                        " columns, got " + std::to_string(cells.size()));
    }
    std::vector<double> row;
    row.reserve(index.size());
    for (std::size_t j = 0; j < index.size(); ++j) row.push_back(parse_real(cells[index[j]], line, columns[j]));
    out.push_back(std::move(row));
  }
  return out;
}

Dataset load_csv(const std::filesystem::path& path, const SchemaSpec& schema) {
  check_schema(schema);
  const CsvTable table = read_table(path);
  const auto expected = expected_header(schema);
  if (table.header != expected) {
    for (std::size_t c = 0; c < std::max(expected.size(), table.header.size()); ++c) {
      const std::string want = c < expected.size() ? expected[c] : "<none>";
      const std::string got = c < table.header.size() ? table.header[c] : "<none>";
      if (want != got) {
        throw ConfigError("schema mismatch: column " + std::to_string(c + 1) + " expected '" + want + "', found '" + got + "'");
      }
    }
  }

  Dataset ds;
  ds.schema = schema;
  const int K = schema.stages();
  for (const auto& [line, cells] : table.rows) {
    if (cells.size() != expected.size()) {
      throw ConfigError("line " + std::to_string(line) + ": expected " + std::to_string(expected.size()) + " cells, found " +
                        std::to_string(cells.size()));
    }
    Trajectory traj;
    std::size_t c = 0;
    for (int k = 0; k < K; ++k) {
      const std::size_t p = schema.covariates[static_cast<std::size_t>(k)].size();
      const std::size_t eta_col = c + p + 3;
      const int eta = parse_indicator(cells[eta_col], line, expected[eta_col]);
      if (k == 0 && eta != 1) throw ConfigError("line " + std::to_string(line) + ": eta1 must be 1");
      StageRecord rec;
      rec.entered = eta == 1;
      if (rec.entered) {
        for (std::size_t j = 0; j < p; ++j) rec.covariates.push_back(parse_real(cells[c + j], line, expected[c + j]));
        rec.treatment = parse_treatment(cells[c + p], line, expected[c + p]);
        if (*rec.treatment >= schema.arity[static_cast<std::size_t>(k)]) {
          throw ConfigError("line " + std::to_string(line) + ": " + expected[c + p] + " out of range");
        }
        rec.duration = parse_real(cells[c + p + 1], line, expected[c + p + 1]);
        if (*rec.duration < 0) throw ConfigError("line " + std::to_string(line) + ": negative duration in " + expected[c + p + 1]);
        rec.event = parse_indicator(cells[c + p + 2], line, expected[c + p + 2]) == 1;
      }
      traj.stages.push_back(std::move(rec));
      c += p + 4;
    }
    traj.total_time = parse_real(cells[c], line, "T");
    ds.trajectories.push_back(std::move(traj));
  }

  const auto violations = validate(ds);
  if (!violations.empty()) {
    const auto& v = violations.front();
    throw ConfigError("subject " + std::to_string(v.subject + 1) + ": " + v.message);
  }
  return ds;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string to_csv(const Dataset& dataset, const std::string& comment) {
  std::ostringstream out;
  if (!comment.empty()) {
    std::istringstream lines(comment);
    std::string l;
    while (std::getline(lines, l)) out << "# " << l << '\n';
  }
  const auto header = expected_header(dataset.schema);
  for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
  out << '\n';
  for (const auto& traj : dataset.trajectories) {
    bool first = true;
    auto cell = [&](const std::string& s) {
      if (!first) out << ',';
      out << s;
      first = false;
    };
    for (int k = 0; k < dataset.stages(); ++k) {
      const auto& s = traj.stages[static_cast<std::size_t>(k)];
      const std::size_t p = dataset.schema.covariates[static_cast<std::size_t>(k)].size();
      if (s.entered) {
        for (double x : s.covariates) cell(format_double(x));
        cell(std::to_string(*s.treatment));
        cell(format_double(*s.duration));
        cell(s.event ? "1" : "0");
        cell("1");
      } else {
        for (std::size_t j = 0; j < p + 3; ++j) cell("");
        cell("0");
      }
    }
    cell(format_double(traj.total_time));
    out << '\n';
  }
  return out.str();
}

void save_csv(const Dataset& dataset, const std::filesystem::path& path, const std::string& comment) {
  write_file_atomic(path, to_csv(dataset, comment));
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + tmp.string());
    out << contents;
    if (!out) throw ConfigError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace catrl
