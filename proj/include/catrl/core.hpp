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

#ifndef CATRL_CORE_HPP_
#define CATRL_CORE_HPP_

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace catrl {

// Ordered covariate names for one stage. Values are real-valued in the units
// of the source data (mg/dL, g/dL, years, ...).
struct CovariateSchema {
  std::vector<std::string> names;

  std::size_t size() const { return names.size(); }
  bool operator==(const CovariateSchema&) const = default;
};

// One stage of one subject. When `entered` is false the subject never reached
// this stage and every other field is absent.
struct StageRecord {
  bool entered = false;
  std::vector<double> covariates;
  std::optional<int> treatment;
  std::optional<double> duration;  // R_k
  bool event = false;              // delta_k: stage outcome uncensored

  bool operator==(const StageRecord&) const = default;
};

struct Trajectory {
  std::vector<StageRecord> stages;
  double total_time = 0.0;  // T = sum_k eta_k R_k

  int stages_entered() const;
  // Sum of R_j over stages j < k (0-based k); the time at which stage k starts.
  double elapsed_before(int k) const;
  // Event indicator of the last entered stage: the overall outcome is uncensored.
  bool final_event() const;
  bool operator==(const Trajectory&) const = default;
};

// Declares the stage count, the covariates per stage and the treatment arity
// per stage. K is fixed by the schema.
struct SchemaSpec {
  std::vector<CovariateSchema> covariates;
  std::vector<int> arity;

  int stages() const { return static_cast<int>(covariates.size()); }
  bool operator==(const SchemaSpec&) const = default;
};

struct Dataset {
  SchemaSpec schema;
  std::vector<Trajectory> trajectories;

  int stages() const { return schema.stages(); }
  int arity(int k) const { return schema.arity.at(static_cast<std::size_t>(k)); }
  std::size_t size() const { return trajectories.size(); }
  // Fraction of subjects whose overall outcome is censored.
  double censoring_rate() const;
  // Subset in the given index order.
  Dataset subset(const std::vector<std::size_t>& rows) const;
};

using History = std::vector<double>;

// Names of the history entries at stage k (0-based):
// X1_<names>, A1, R1, ..., X{k+1}_<names>.
std::vector<std::string> history_names(const SchemaSpec& schema, int k);
std::size_t history_length(const SchemaSpec& schema, int k);

// Identity concatenation [X_1, A_1, R_1, ..., X_k]. Stage k is 0-based.
// Throws ConfigError if the subject did not enter stage k or an earlier
// stage lacks its treatment or duration.
History build_history(const Trajectory& traj, int k);

struct Violation {
  std::size_t subject;
  std::string message;
};

// Reports every trajectory invariant that fails; empty iff the dataset is
// consistent. Messages: "eta_1 must be 1", "eta after censoring",
// "eta not monotone", "negative duration", "treatment out of range",
// "covariate count mismatch", "missing field", "total time mismatch".
std::vector<Violation> validate(const Dataset& dataset);

// Wide CSV, one row per subject: for each stage k,
// X{k}_<name>..., A{k}, R{k}, delta{k}, eta{k}; then T. Stage fields of a
// subject that did not enter the stage are empty cells. Lines starting with
// '#' are comments.
Dataset load_csv(const std::filesystem::path& path, const SchemaSpec& schema);
// Infers the schema from the header; arity per stage is max(A_k) + 1 over the
// file, at least 2.
SchemaSpec infer_schema(const std::filesystem::path& path);
std::string to_csv(const Dataset& dataset, const std::string& comment = {});
void save_csv(const Dataset& dataset, const std::filesystem::path& path, const std::string& comment = {});

// Named real-valued columns of a CSV file, one vector per data row in the
// order of `columns`. Other columns are ignored; a missing column or an empty
// file is a ConfigError.
std::vector<std::vector<double>> load_csv_columns(const std::filesystem::path& path,
                                                  const std::vector<std::string>& columns);

// Shortest round-trip decimal representation.
std::string format_double(double v);

// Writes via a temporary file and rename so readers never see partial output.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

}  // namespace catrl

#endif  // CATRL_CORE_HPP_
