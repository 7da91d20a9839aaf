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

#include "catrl/catrl.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <memory>
#include <new>
#include <string>
#include <utility>
#include <vector>

#include "catrl/core.hpp"
#include "catrl/dtr.hpp"
#include "catrl/error.hpp"
#include "catrl/eval.hpp"
#include "catrl/parallel.hpp"
#include "catrl/simgen.hpp"
#include "json_io.hpp"

struct catrl_dataset {
  catrl::Dataset data;
};

struct catrl_oracle {
  catrl::sim::Oracle oracle;
};

struct catrl_policy {
  std::shared_ptr<const catrl::DTRPolicy> policy;
};

namespace {

using catrl::json;

thread_local std::string g_last_error;

template <typename F>
catrl_status guarded(F&& body) {
  try {
    g_last_error.clear();
    body();
    return CATRL_OK;
  } catch (const catrl::CalibrationError& e) {
    g_last_error = e.what();
    return CATRL_ERR_CALIBRATION;
  } catch (const catrl::FitError& e) {
    g_last_error = e.what();
    return CATRL_ERR_FIT;
  } catch (const catrl::ConfigError& e) {
    g_last_error = e.what();
    return CATRL_ERR_CONFIG;
  } catch (const json::exception& e) {
    g_last_error = std::string("invalid JSON: ") + e.what();
    return CATRL_ERR_CONFIG;
  } catch (const std::filesystem::filesystem_error& e) {
    g_last_error = e.what();
    return CATRL_ERR_CONFIG;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return CATRL_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return CATRL_ERR_INTERNAL;
  }
}

void require(const void* p, const char* what) {
  if (p == nullptr) throw catrl::ConfigError(std::string(what) + " must not be NULL");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void put(char** out, const std::string& s) {
  if (out != nullptr) *out = dup_string(s);
}

json parse_or_empty(const char* text, const char* what) {
  if (text == nullptr || *text == '\0') return json::object();
  return catrl::parse_json(text, what);
}

json estimate_pair(double value, double se) {
  return json{{"value", catrl::number_to_json(value)}, {"std_error", catrl::number_to_json(se)}};
}

std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

struct EvalOptions {
  std::optional<double> tau;
  std::size_t n_mc = 10000;
  std::uint64_t seed = 1;
  bool zero_noise = false;
  bool with_baselines = false;
};

EvalOptions eval_options(const json& j) {
  catrl::check_keys(j, {"tau", "n_mc", "seed", "zero_noise", "with_baselines"}, "evaluate");
  EvalOptions o;
  if (j.contains("tau") && !j.at("tau").is_null()) {
    o.tau = catrl::number_from_json(j.at("tau"), "evaluate.tau");
    if (!(*o.tau > 0.0)) throw catrl::ConfigError("evaluate.tau must be > 0");
  }
  if (j.contains("n_mc")) {
    const auto n = j.at("n_mc").get<long long>();
    if (n < 1) throw catrl::ConfigError("evaluate.n_mc must be >= 1");
    o.n_mc = static_cast<std::size_t>(n);
  }
  if (j.contains("seed")) o.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("zero_noise")) o.zero_noise = j.at("zero_noise").get<bool>();
  if (j.contains("with_baselines")) o.with_baselines = j.at("with_baselines").get<bool>();
  return o;
}

}  // namespace

extern "C" {

const char* catrl_version(void) { return CATRL_VERSION; }

const char* catrl_last_error(void) { return g_last_error.c_str(); }

void catrl_string_free(char* s) { std::free(s); }

void catrl_set_threads(int n) { catrl::set_thread_count(n); }

int catrl_threads(void) { return catrl::thread_count(); }

catrl_status catrl_dataset_load_csv(const char* path, const char* schema_json, catrl_dataset** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = nullptr;
    catrl::SchemaSpec schema;
    if (schema_json != nullptr) {
      schema = catrl::parse_json(schema_json, "schema").get<catrl::SchemaSpec>();
    } else {
      schema = catrl::infer_schema(path);
    }
    auto d = std::make_unique<catrl_dataset>();
    d->data = catrl::load_csv(path, schema);
    *out = d.release();
  });
}

catrl_status catrl_dataset_save_csv(const catrl_dataset* data, const char* path, const char* comment) {
  return guarded([&] {
    require(data, "data");
    require(path, "path");
    catrl::save_csv(data->data, path, comment != nullptr ? comment : "");
  });
}

catrl_status catrl_dataset_to_csv(const catrl_dataset* data, const char* comment, char** csv) {
  return guarded([&] {
    require(data, "data");
    require(csv, "csv");
    put(csv, catrl::to_csv(data->data, comment != nullptr ? comment : ""));
  });
}

size_t catrl_dataset_size(const catrl_dataset* data) { return data != nullptr ? data->data.size() : 0; }

int catrl_dataset_stages(const catrl_dataset* data) { return data != nullptr ? data->data.stages() : 0; }

double catrl_dataset_censoring_rate(const catrl_dataset* data) {
  return data != nullptr && data->data.size() > 0 ? data->data.censoring_rate() : 0.0;
}

catrl_status catrl_dataset_schema(const catrl_dataset* data, char** schema_json) {
  return guarded([&] {
    require(data, "data");
    require(schema_json, "schema_json");
    put(schema_json, json(data->data.schema).dump());
  });
}

catrl_status catrl_dataset_validate(const catrl_dataset* data, char** violations_json) {
  return guarded([&] {
    require(data, "data");
    require(violations_json, "violations_json");
    json out = json::array();
    for (const auto& v : catrl::validate(data->data)) {
      out.push_back(json{{"subject", v.subject}, {"message", v.message}});
    }
    put(violations_json, out.dump());
  });
}

void catrl_dataset_free(catrl_dataset* data) { delete data; }

catrl_status catrl_generate(const char* scenario_json, const char* covariates_csv, catrl_dataset** data,
                            catrl_oracle** oracle) {
  return guarded([&] {
    require(data, "data");
    *data = nullptr;
    if (oracle != nullptr) *oracle = nullptr;
    const auto config = parse_or_empty(scenario_json, "scenario").get<catrl::sim::ScenarioConfig>();
    std::vector<catrl::sim::Covariates> population;
    if (covariates_csv != nullptr) population = catrl::sim::load_covariates_csv(covariates_csv);
    auto gen = catrl::sim::generate(config, population);
    auto d = std::make_unique<catrl_dataset>();
    d->data = std::move(gen.dataset);
    if (oracle != nullptr) {
      auto o = std::make_unique<catrl_oracle>();
      o->oracle = std::move(gen.oracle);
      *oracle = o.release();
    }
    *data = d.release();
  });
}

catrl_status catrl_oracle_load(const char* path, catrl_oracle** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = nullptr;
    auto o = std::make_unique<catrl_oracle>();
    o->oracle = catrl::parse_json(catrl::read_file(path), "oracle manifest").get<catrl::sim::Oracle>();
    *out = o.release();
  });
}

catrl_status catrl_oracle_save(const catrl_oracle* oracle, const char* path) {
  return guarded([&] {
    require(oracle, "oracle");
    require(path, "path");
    catrl::write_file_atomic(path, json(oracle->oracle).dump() + "\n");
  });
}

catrl_status catrl_oracle_to_json(const catrl_oracle* oracle, char** out) {
  return guarded([&] {
    require(oracle, "oracle");
    require(out, "json");
    put(out, json(oracle->oracle).dump() + "\n");
  });
}

double catrl_oracle_tau(const catrl_oracle* oracle) { return oracle != nullptr ? oracle->oracle.tau : 0.0; }

void catrl_oracle_free(catrl_oracle* oracle) { delete oracle; }

catrl_status catrl_fit(const catrl_dataset* data, const char* fit_config_json, catrl_policy** out) {
  return guarded([&] {
    require(data, "data");
    require(out, "out");
    *out = nullptr;
    const auto config = parse_or_empty(fit_config_json, "fit config").get<catrl::FitConfig>();
    auto p = std::make_unique<catrl_policy>();
    p->policy = std::make_shared<const catrl::DTRPolicy>(catrl::fit(data->data, config));
    *out = p.release();
  });
}

catrl_status catrl_policy_load(const char* path, catrl_policy** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = nullptr;
    auto p = std::make_unique<catrl_policy>();
    p->policy = std::make_shared<const catrl::DTRPolicy>(catrl::load_policy(path));
    *out = p.release();
  });
}

catrl_status catrl_policy_save(const catrl_policy* policy, const char* path) {
  return guarded([&] {
    require(policy, "policy");
    require(path, "path");
    catrl::save_policy(*policy->policy, path);
  });
}

catrl_status catrl_policy_to_json(const catrl_policy* policy, char** out) {
  return guarded([&] {
    require(policy, "policy");
    require(out, "json");
    put(out, catrl::serialize_policy(*policy->policy));
  });
}

int catrl_policy_stages(const catrl_policy* policy) {
  return policy != nullptr ? static_cast<int>(policy->policy->trees.size()) : 0;
}

catrl_status catrl_policy_recommend(const catrl_policy* policy, int stage, const double* history, size_t length,
                                    int* arm) {
  return guarded([&] {
    require(policy, "policy");
    require(arm, "arm");
    if (length > 0) require(history, "history");
    *arm = policy->policy->recommend_history(std::span<const double>(history, length), stage);
  });
}

catrl_status catrl_policy_rules(const catrl_policy* policy, char** text) {
  return guarded([&] {
    require(policy, "policy");
    require(text, "text");
    const auto& p = *policy->policy;
    std::string out;
    for (std::size_t k = 0; k < p.trees.size(); ++k) {
      out += "stage " + std::to_string(k + 1) + ":\n";
      out += catrl::render_rules(p.trees[k], catrl::history_names(p.schema, static_cast<int>(k)));
    }
    put(text, out);
  });
}

void catrl_policy_free(catrl_policy* policy) { delete policy; }

catrl_status catrl_gridsearch(const catrl_dataset* data, const char* grid_json, char** report_json) {
  return guarded([&] {
    require(data, "data");
    require(grid_json, "grid_json");
    require(report_json, "report_json");
    const json j = catrl::parse_json(grid_json, "grid");
    json configs = j;
    double fraction = 0.5;
    std::uint64_t seed = 1;
    if (j.is_object()) {
      catrl::check_keys(j, {"configs", "validation_fraction", "seed"}, "grid");
      configs = j.at("configs");
      if (j.contains("validation_fraction")) fraction = j.at("validation_fraction").get<double>();
      if (j.contains("seed")) seed = j.at("seed").get<std::uint64_t>();
    }
    if (!configs.is_array()) throw catrl::ConfigError("grid: expected an array of fit configs");
    std::vector<catrl::FitConfig> grid;
    for (const auto& c : configs) grid.push_back(c.get<catrl::FitConfig>());
    const auto result = catrl::grid_search(data->data, grid, fraction, seed);

    json entries = json::array();
    for (const auto& e : result.entries) {
      json row{{"index", e.index}, {"config", grid[e.index]}, {"concordant_fraction", e.concordant_fraction}};
      row["score"] = e.score ? catrl::number_to_json(*e.score) : json(nullptr);
      row["std_error"] = e.std_error ? catrl::number_to_json(*e.std_error) : json(nullptr);
      if (!e.error.empty()) row["error"] = e.error;
      entries.push_back(std::move(row));
    }
    json out{{"best", result.best},
             {"best_config", grid[result.best]},
             {"tau", catrl::number_to_json(result.tau)},
             {"validation_fraction", fraction},
             {"seed", seed},
             {"entries", entries}};
    put(report_json, out.dump(1));
  });
}

catrl_status catrl_evaluate(const catrl_policy* policy, const catrl_dataset* data, const catrl_oracle* oracle,
                            const char* options_json, char** report_json, char** report_csv) {
  return guarded([&] {
    require(report_json, "report_json");
    if (data == nullptr && oracle == nullptr) throw catrl::ConfigError("evaluate needs a dataset or an oracle");
    const EvalOptions opt = eval_options(parse_or_empty(options_json, "evaluate options"));
    if (policy == nullptr && !opt.with_baselines) throw catrl::ConfigError("evaluate: nothing to evaluate");

    double tau = 0.0;
    if (opt.tau) {
      tau = *opt.tau;
    } else if (oracle != nullptr) {
      tau = oracle->oracle.tau;
    } else if (policy != nullptr && policy->policy->tau > 0.0) {
      tau = policy->policy->tau;
    } else {
      std::vector<double> times;
      for (const auto& t : data->data.trajectories) times.push_back(t.total_time);
      tau = catrl::sim::quantile(std::move(times), 0.9);
    }

    int arity = 2;
    if (oracle != nullptr) {
      arity = oracle->oracle.config.arity;
    } else if (policy != nullptr) {
      arity = policy->policy->schema.arity.front();
    } else {
      arity = data->data.arity(0);
    }

    std::vector<catrl::PolicySpec> specs;
    if (policy != nullptr) specs.push_back(catrl::PolicySpec::fitted(policy->policy));
    if (opt.with_baselines) {
      for (int a = 0; a < arity; ++a) specs.push_back(catrl::PolicySpec::fixed(a));
      specs.push_back(catrl::PolicySpec::random());
      if (oracle != nullptr) specs.push_back(catrl::PolicySpec::optimal());
    }

    json out{{"tau", catrl::number_to_json(tau)}};
    std::string csv = "mode,policy,tau,rmst,rmst_se,cdr1,cdr1_se,acdr,acdr_se,expected_survival,expected_survival_se,"
                      "sampled_mean_survival,n,concordant_fraction,small_sample\n";
    auto num = [](double v) { return catrl::format_double(v); };

    if (oracle != nullptr) {
      catrl::CounterfactualOptions co;
      co.n_mc = opt.n_mc;
      co.tau = tau;
      co.seed = opt.seed;
      co.zero_noise = opt.zero_noise;
      json rows = json::array();
      for (const auto& s : specs) {
        const auto r = catrl::counterfactual_eval(s, oracle->oracle, co);
        rows.push_back(r);
        csv += "counterfactual," + csv_cell(r.policy) + "," + num(r.tau) + "," + num(r.rmst.value) + "," +
               num(r.rmst.std_error) + "," + num(r.cdr1.value) + "," + num(r.cdr1.std_error) + "," +
               num(r.acdr.value) + "," + num(r.acdr.std_error) + "," + num(r.expected_survival.value) + "," +
               num(r.expected_survival.std_error) + "," + num(r.sampled_mean_survival.value) + "," +
               std::to_string(r.n_eval) + ",,\n";
      }
      out["counterfactual"] = rows;
    }
    if (data != nullptr) {
      auto obs_specs = specs;
      if (opt.with_baselines) obs_specs.push_back(catrl::PolicySpec::observed());
      json rows = json::array();
      for (const auto& s : obs_specs) {
        if (s.kind == catrl::PolicyKind::kOptimal && data->data.schema != catrl::sim::scenario_schema(arity)) continue;
        const auto v = catrl::observational_value(s, data->data, tau, opt.seed);
        json row{{"policy", s.name},
                 {"concordant", v.concordant},
                 {"concordant_fraction", v.concordant_fraction},
                 {"small_sample", v.small_sample}};
        row["rmst"] = v.rmst ? estimate_pair(v.rmst->value, v.rmst->std_error) : json(nullptr);
        rows.push_back(std::move(row));
        csv += "observational," + csv_cell(s.name) + "," + num(tau) + "," + (v.rmst ? num(v.rmst->value) : "") + "," +
               (v.rmst ? num(v.rmst->std_error) : "") + ",,,,,,,," + std::to_string(v.concordant) + "," +
               num(v.concordant_fraction) + "," + (v.small_sample ? "1" : "0") + "\n";
      }
      out["observational"] = rows;
    }
    put(report_json, out.dump(1));
    put(report_csv, csv);
  });
}

catrl_status catrl_benchmark(const char* config_json, const char* cache_dir, char** report_json, char** report_csv,
                             char** report_text, size_t* failed_cells, size_t* total_cells) {
  return guarded([&] {
    auto config = parse_or_empty(config_json, "benchmark config").get<catrl::BenchmarkConfig>();
    if (cache_dir != nullptr) config.cache_dir = std::filesystem::path(cache_dir);
    const auto report = catrl::benchmark(config);
    put(report_json, report.to_json());
    put(report_csv, report.to_csv());
    put(report_text, report.to_text());
    if (failed_cells != nullptr) *failed_cells = report.failed_cells;
    if (total_cells != nullptr) *total_cells = report.cells.size();
  });
}

catrl_status catrl_write_file_atomic(const char* path, const char* contents) {
  return guarded([&] {
    require(path, "path");
    require(contents, "contents");
    catrl::write_file_atomic(path, contents);
  });
}

catrl_status catrl_content_hash(const char* text, char** hex) {
  return guarded([&] {
    require(text, "text");
    require(hex, "hex");
    put(hex, catrl::content_hash(text));
  });
}

}  // extern "C"
