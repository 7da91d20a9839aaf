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

// catrl command-line tool: generate, fit, evaluate, gridsearch, benchmark.
// Talks to the library only through the C interface.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "catrl/catrl.h"
#include "json.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Carries a status code to main.
struct Failure {
  catrl_status status;
  std::string message;
};

void check(catrl_status s, const std::string& what) {
  if (s != CATRL_OK) throw Failure{s, what + ": " + catrl_last_error()};
}

struct CString {
  char* p = nullptr;
  ~CString() { catrl_string_free(p); }
  std::string str() const { return p != nullptr ? std::string(p) : std::string(); }
};

template <typename T, void (*Free)(T*)>
struct Handle {
  T* p = nullptr;
  ~Handle() {
    if (p != nullptr) Free(p);
  }
};
using Dataset = Handle<catrl_dataset, catrl_dataset_free>;
using Oracle = Handle<catrl_oracle, catrl_oracle_free>;
using Policy = Handle<catrl_policy, catrl_policy_free>;

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Failure{CATRL_ERR_CONFIG, "cannot open " + path};
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& contents) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw Failure{CATRL_ERR_CONFIG, "cannot create " + path.parent_path().string() + ": " + ec.message()};
  }
  check(catrl_write_file_atomic(path.string().c_str(), contents.c_str()), "write " + path.string());
}

// Provenance stamped on every output: config hash, seed, library version.
struct Provenance {
  std::string command;
  std::string config_hash;
  std::uint64_t seed = 1;

  json to_json() const {
    return json{{"command", command}, {"config_hash", config_hash}, {"seed", seed}, {"library_version", catrl_version()}};
  }
  std::string comment() const {
    return "catrl " + std::string(catrl_version()) + " " + command + " config_hash=" + config_hash +
           " seed=" + std::to_string(seed);
  }
};

Provenance provenance(const std::string& command, const std::string& config_text) {
  Provenance p;
  p.command = command;
  CString hex;
  check(catrl_content_hash(config_text.c_str(), &hex.p), "hash");
  p.config_hash = hex.str();
  try {
    const json j = json::parse(config_text.empty() ? "{}" : config_text);
    if (j.is_object() && j.contains("seed") && j.at("seed").is_number_unsigned()) p.seed = j.at("seed").get<std::uint64_t>();
  } catch (const json::exception&) {
    // The library reports malformed configs with a field-level message.
  }
  return p;
}

std::string stamped_json(const std::string& doc, const Provenance& prov) {
  json j = json::parse(doc);
  j["header"] = prov.to_json();
  return j.dump(1) + "\n";
}

std::string stamped_csv(const std::string& csv, const Provenance& prov) { return "# " + prov.comment() + "\n" + csv; }

struct Globals {
  int threads = 0;
  bool quiet = false;
};

void say(const Globals& g, const std::string& line) {
  if (!g.quiet) std::cout << line << "\n";
}

std::string optional_text(const std::string& path) { return path.empty() ? std::string() : read_text(path); }

int cmd_generate(const Globals& g, const std::string& config_path, const std::string& covariates, const fs::path& out) {
  const std::string config = read_text(config_path);
  const Provenance prov = provenance("generate", config);
  Dataset data;
  Oracle oracle;
  check(catrl_generate(config.c_str(), covariates.empty() ? nullptr : covariates.c_str(), &data.p, &oracle.p),
        "generate");
  CString csv;
  check(catrl_dataset_to_csv(data.p, prov.comment().c_str(), &csv.p), "dataset");
  CString manifest;
  check(catrl_oracle_to_json(oracle.p, &manifest.p), "oracle manifest");
  write_text(out / "dataset.csv", csv.str());
  write_text(out / "oracle.json", stamped_json(manifest.str(), prov));
  CString schema;
  check(catrl_dataset_schema(data.p, &schema.p), "schema");
  json arity = json::array();
  for (const auto& stage : json::parse(schema.str())) arity.push_back(stage.at("arity"));
  std::ostringstream line;
  line << "n=" << catrl_dataset_size(data.p) << " censor_rate=" << catrl_dataset_censoring_rate(data.p)
       << " arity=" << arity.dump() << " tau=" << catrl_oracle_tau(oracle.p);
  say(g, line.str());
  say(g, "wrote " + (out / "dataset.csv").string() + " and " + (out / "oracle.json").string());
  return 0;
}

void load_dataset(Dataset& data, const std::string& path, const std::string& schema_path) {
  const std::string schema = optional_text(schema_path);
  check(catrl_dataset_load_csv(path.c_str(), schema_path.empty() ? nullptr : schema.c_str(), &data.p),
        "load " + path);
}

int cmd_fit(const Globals& g, const std::string& data_path, const std::string& schema_path,
            const std::string& config_path, const fs::path& out) {
  const std::string config = optional_text(config_path);
  const Provenance prov = provenance("fit", config);
  Dataset data;
  load_dataset(data, data_path, schema_path);
  Policy policy;
  check(catrl_fit(data.p, config.empty() ? nullptr : config.c_str(), &policy.p), "fit");
  CString doc;
  check(catrl_policy_to_json(policy.p, &doc.p), "serialize");
  const std::string stamped = stamped_json(doc.str(), prov);
  write_text(out, stamped);

  // Human-readable fit log next to the bundle.
  const json j = json::parse(doc.str());
  std::ostringstream log;
  log << "# " << prov.comment() << "\n";
  log << "tau " << j.at("tau").dump() << "\n";
  for (const auto& t : j.at("fit_log")) {
    log << "stage " << t.at("stage").get<int>() << ": entrants " << t.at("entrants").dump() << ", column means "
        << t.at("caipw_column_means").dump() << ", lambda " << t.at("lambda").dump() << ", depth " << t.at("depth").dump()
        << ", leaves " << t.at("leaves").dump() << "\n";
    log << "  nuisance " << t.at("nuisance").dump() << "\n";
    std::istringstream rules(t.at("rules").get<std::string>());
    for (std::string line; std::getline(rules, line);) log << "  " << line << "\n";
  }
  fs::path log_path = out;
  log_path += ".log";
  write_text(log_path, log.str());
  if (!g.quiet) std::cout << log.str();
  say(g, "wrote " + out.string() + " and " + log_path.string());
  return 0;
}

int cmd_evaluate(const Globals& g, const std::string& policy_path, const std::string& data_path,
                 const std::string& schema_path, const std::string& oracle_path, const std::string& config_path,
                 std::optional<double> tau, bool with_baselines, const fs::path& out) {
  json options = json::object();
  const std::string config = optional_text(config_path);
  if (!config.empty()) {
    try {
      options = json::parse(config);
    } catch (const json::exception& e) {
      throw Failure{CATRL_ERR_CONFIG, std::string("evaluate config: ") + e.what()};
    }
  }
  if (tau) options["tau"] = *tau;
  if (with_baselines) options["with_baselines"] = true;
  const std::string effective = options.dump();
  const Provenance prov = provenance("evaluate", effective);

  if (tau && !(*tau > 0.0)) throw Failure{CATRL_ERR_CONFIG, "--tau must be > 0"};
  if (data_path.empty() && oracle_path.empty()) throw Failure{CATRL_ERR_CONFIG, "evaluate needs --data or --oracle"};
  Policy policy;
  if (!policy_path.empty()) check(catrl_policy_load(policy_path.c_str(), &policy.p), "load " + policy_path);
  Dataset data;
  if (!data_path.empty()) load_dataset(data, data_path, schema_path);
  Oracle oracle;
  if (!oracle_path.empty()) check(catrl_oracle_load(oracle_path.c_str(), &oracle.p), "load " + oracle_path);

  CString report;
  CString csv;
  check(catrl_evaluate(policy.p, data.p, oracle.p, effective.c_str(), &report.p, &csv.p), "evaluate");
  write_text(out / "evaluation.json", stamped_json(report.str(), prov));
  write_text(out / "evaluation.csv", stamped_csv(csv.str(), prov));
  if (!g.quiet) std::cout << csv.str();
  return 0;
}

int cmd_gridsearch(const Globals& g, const std::string& data_path, const std::string& schema_path,
                   const std::string& config_path, const fs::path& out) {
  const std::string config = read_text(config_path);
  const Provenance prov = provenance("gridsearch", config);
  Dataset data;
  load_dataset(data, data_path, schema_path);
  CString report;
  check(catrl_gridsearch(data.p, config.c_str(), &report.p), "gridsearch");
  write_text(out, stamped_json(report.str(), prov));
  const json j = json::parse(report.str());
  say(g, "best config index " + j.at("best").dump() + " (validation RMST over " +
             std::to_string(j.at("entries").size()) + " configs)");
  return 0;
}

int cmd_benchmark(const Globals& g, const std::string& config_path, const std::string& cache, const fs::path& out) {
  const std::string config = optional_text(config_path);
  const Provenance prov = provenance("benchmark", config);
  const fs::path cache_dir = cache.empty() ? out / "cache" : fs::path(cache);
  CString report;
  CString csv;
  CString text;
  std::size_t failed = 0;
  std::size_t total = 0;
  check(catrl_benchmark(config.empty() ? nullptr : config.c_str(), cache_dir.string().c_str(), &report.p, &csv.p,
                        &text.p, &failed, &total),
        "benchmark");
  write_text(out / "benchmark.json", stamped_json(report.str(), prov));
  write_text(out / "benchmark.csv", stamped_csv(csv.str(), prov));
  write_text(out / "benchmark.txt", stamped_csv(text.str(), prov));
  if (!g.quiet) std::cout << text.str();
  if (total > 0 && failed == total) throw Failure{CATRL_ERR_FIT, "benchmark: every cell failed"};
  if (failed > 0) std::cerr << "warning: " << failed << " of " << total << " cells failed\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"catrl: censoring-aware tree-based dynamic treatment regimes"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(catrl_version()));
  Globals g;
  app.add_option("--threads", g.threads, "Worker threads (default: CATRL_THREADS or all cores)")
      ->envname("CATRL_THREADS")
      ->check(CLI::NonNegativeNumber);
  app.add_flag("-q,--quiet", g.quiet, "Only report errors");

  std::string config;
  std::string out;
  std::string data;
  std::string schema;
  std::string covariates;
  std::string policy;
  std::string oracle;
  std::string cache;
  std::optional<double> tau;
  bool with_baselines = false;

  auto* gen = app.add_subcommand("generate", "Simulate a scenario: dataset CSV and oracle manifest");
  gen->add_option("-c,--config", config, "Scenario config (JSON)")->required()->check(CLI::ExistingFile);
  gen->add_option("--covariates", covariates, "CSV of user covariates replacing the sampler")->check(CLI::ExistingFile);
  gen->add_option("-o,--out", out, "Output directory")->required();

  auto* fit = app.add_subcommand("fit", "Learn a regime from a dataset CSV");
  fit->add_option("-d,--data", data, "Dataset CSV")->required();
  fit->add_option("--schema", schema, "Schema JSON (default: inferred from the header)");
  fit->add_option("-c,--config", config, "Fit config (JSON; default settings when omitted)");
  fit->add_option("-o,--out", out, "Policy bundle path (JSON)")->required();

  auto* eval = app.add_subcommand("evaluate", "Score a policy on an oracle and/or a dataset");
  eval->add_option("-p,--policy", policy, "Policy bundle (JSON)");
  eval->add_option("-d,--data", data, "Dataset CSV (observational value)");
  eval->add_option("--schema", schema, "Schema JSON for --data");
  eval->add_option("--oracle", oracle, "Oracle manifest (counterfactual metrics)");
  eval->add_option("-c,--config", config, "Evaluation options (JSON)");
  eval->add_option("--tau", tau, "Truncation time");
  eval->add_flag("--with-baselines", with_baselines, "Add fixed, random and (with an oracle) optimal policies");
  eval->add_option("-o,--out", out, "Output directory")->required();

  auto* grid = app.add_subcommand("gridsearch", "Pick fit settings by validation RMST");
  grid->add_option("-d,--data", data, "Dataset CSV")->required();
  grid->add_option("--schema", schema, "Schema JSON");
  grid->add_option("-c,--config", config, "Grid (JSON)")->required()->check(CLI::ExistingFile);
  grid->add_option("-o,--out", out, "Report path (JSON)")->required();

  auto* bench = app.add_subcommand("benchmark", "Run the scenario grid with the fold protocol");
  bench->add_option("-c,--config", config, "Benchmark config (JSON; defaults when omitted)");
  bench->add_option("--cache", cache, "Per-cell result cache (default: <out>/cache)");
  bench->add_option("-o,--out", out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return CATRL_ERR_CONFIG;
  }

  catrl_set_threads(g.threads);
  try {
    if (*gen) return cmd_generate(g, config, covariates, out);
    if (*fit) return cmd_fit(g, data, schema, config, out);
    if (*eval) return cmd_evaluate(g, policy, data, schema, oracle, config, tau, with_baselines, out);
    if (*grid) return cmd_gridsearch(g, data, schema, config, out);
    if (*bench) return cmd_benchmark(g, config, cache, out);
  } catch (const Failure& f) {
    std::cerr << "error: " << f.message << "\n";
    return f.status;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return CATRL_ERR_INTERNAL;
  }
  return CATRL_ERR_INTERNAL;
}
