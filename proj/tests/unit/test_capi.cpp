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

// Exercises the shared library through its C interface only.

#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "catrl/catrl.h"
#include "doctest.h"
#include "json.hpp"
#include "test_util.hpp"

using catrl::testing::TempDir;
using nlohmann::json;

namespace {

// Takes ownership of a library string.
std::string take(char* s) {
  REQUIRE(s != nullptr);
  std::string out(s);
  catrl_string_free(s);
  return out;
}

const char* kScenario = R"({"n_subjects": 600, "seed": 3, "censoring_kind": "exponential"})";
const char* kFit = R"({"nuisance": {"forest": {"n_trees": 30}}})";

struct Generated {
  catrl_dataset* data = nullptr;
  catrl_oracle* oracle = nullptr;
  Generated() { REQUIRE(catrl_generate(kScenario, nullptr, &data, &oracle) == CATRL_OK); }
  ~Generated() {
    catrl_dataset_free(data);
    catrl_oracle_free(oracle);
  }
};

}  // namespace

TEST_SUITE("capi") {
  TEST_CASE("version and errors") {
    CHECK(std::strlen(catrl_version()) > 0);
    catrl_dataset* d = nullptr;
    CHECK(catrl_dataset_load_csv("/nonexistent/file.csv", nullptr, &d) == CATRL_ERR_CONFIG);
    CHECK(d == nullptr);
    CHECK(std::string(catrl_last_error()).find("cannot open") != std::string::npos);
    catrl_oracle* o = nullptr;
    CHECK(catrl_generate(R"({"target_censor_rate": 1.2})", nullptr, &d, &o) == CATRL_ERR_CONFIG);
    CHECK(std::string(catrl_last_error()).find("target_censor_rate") != std::string::npos);
    CHECK(catrl_generate("{not json", nullptr, &d, &o) == CATRL_ERR_CONFIG);
    CHECK(catrl_generate(R"({"no_such_key": 1})", nullptr, &d, &o) == CATRL_ERR_CONFIG);
    CHECK(catrl_fit(nullptr, nullptr, nullptr) != CATRL_OK);
  }

  TEST_CASE("threads") {
    const int before = catrl_threads();
    catrl_set_threads(2);
    CHECK(catrl_threads() == 2);
    catrl_set_threads(0);
    CHECK(catrl_threads() >= 1);
    catrl_set_threads(before);
  }

  TEST_CASE("dataset life cycle") {
    Generated g;
    CHECK(catrl_dataset_size(g.data) == 600);
    CHECK(catrl_dataset_stages(g.data) == 2);
    CHECK(catrl_dataset_censoring_rate(g.data) > 0.5);
    CHECK(catrl_oracle_tau(g.oracle) > 0.0);

    char* v = nullptr;
    REQUIRE(catrl_dataset_validate(g.data, &v) == CATRL_OK);
    CHECK(take(v) == "[]");
    char* schema = nullptr;
    REQUIRE(catrl_dataset_schema(g.data, &schema) == CATRL_OK);
    const std::string schema_text = take(schema);
    CHECK(json::parse(schema_text).size() == 2);

    TempDir dir;
    const auto csv = dir.file("d.csv").string();
    REQUIRE(catrl_dataset_save_csv(g.data, csv.c_str(), "note") == CATRL_OK);
    catrl_dataset* back = nullptr;
    REQUIRE(catrl_dataset_load_csv(csv.c_str(), schema_text.c_str(), &back) == CATRL_OK);
    char* a = nullptr;
    char* b = nullptr;
    REQUIRE(catrl_dataset_to_csv(g.data, nullptr, &a) == CATRL_OK);
    REQUIRE(catrl_dataset_to_csv(back, nullptr, &b) == CATRL_OK);
    CHECK(take(a) == take(b));
    catrl_dataset_free(back);

    const auto oracle_path = dir.file("oracle.json").string();
    REQUIRE(catrl_oracle_save(g.oracle, oracle_path.c_str()) == CATRL_OK);
    catrl_oracle* o = nullptr;
    REQUIRE(catrl_oracle_load(oracle_path.c_str(), &o) == CATRL_OK);
    CHECK(catrl_oracle_tau(o) == catrl_oracle_tau(g.oracle));
    char* oj = nullptr;
    REQUIRE(catrl_oracle_to_json(o, &oj) == CATRL_OK);
    CHECK(json::parse(take(oj)).contains("censoring"));
    catrl_oracle_free(o);
  }

  TEST_CASE("user covariates") {
    TempDir dir;
    std::string text = "X1_Age,X1_Creatinine,X1_Hemoglobin,X1_Potassium,X1_Sodium,X1_Glucose,X1_PlateletCount,"
                       "X1_Hematocrit,X1_WBC,X2_Creatinine,X2_Hemoglobin,X2_Potassium,X2_Sodium,X2_Glucose,"
                       "X2_PlateletCount,X2_Hematocrit,X2_WBC\n";
    text += "60,2,10,4,140,120,200,35,8,1.8,10,4.1,139,150,210,36,7\n";
    text += "70,1,14,4.5,138,100,250,40,6,1.1,13.5,4.3,140,110,240,41,6.5\n";
    const auto path = dir.write("cov.csv", text).string();
    catrl_dataset* d = nullptr;
    catrl_oracle* o = nullptr;
    const char* cfg = R"({"n_subjects": 200, "censoring_kind": "none", "target_censor_rate": 0})";
    const auto st = catrl_generate(cfg, path.c_str(), &d, &o);
    CHECK_MESSAGE(st == CATRL_OK, catrl_last_error());
    if (st == CATRL_OK) {
      char* csv = nullptr;
      REQUIRE(catrl_dataset_to_csv(d, nullptr, &csv) == CATRL_OK);
      const std::string body = take(csv);
      CHECK(body.find("\n60,2,10,") != std::string::npos);
      CHECK(body.find("\n70,1,14,") != std::string::npos);
      catrl_dataset_free(d);
      catrl_oracle_free(o);
    }
    CHECK(catrl_generate(cfg, dir.write("bad.csv", "a,b\n1,2\n").string().c_str(), &d, &o) == CATRL_ERR_CONFIG);
  }

  TEST_CASE("fit, recommend, save and load") {
    Generated g;
    catrl_policy* p = nullptr;
    REQUIRE(catrl_fit(g.data, kFit, &p) == CATRL_OK);
    CHECK(catrl_policy_stages(p) == 2);
    char* rules = nullptr;
    REQUIRE(catrl_policy_rules(p, &rules) == CATRL_OK);
    CHECK(take(rules).find("arm ") != std::string::npos);

    const std::vector<double> h1{60, 2.0, 10.0, 4.0, 140, 120, 200, 35, 8};
    int arm = -1;
    REQUIRE(catrl_policy_recommend(p, 0, h1.data(), h1.size(), &arm) == CATRL_OK);
    CHECK((arm == 0 || arm == 1));
    CHECK(catrl_policy_recommend(p, 1, h1.data(), h1.size(), &arm) == CATRL_ERR_CONFIG);
    CHECK(catrl_policy_recommend(p, 5, h1.data(), h1.size(), &arm) == CATRL_ERR_CONFIG);

    TempDir dir;
    const auto path = dir.file("p.json").string();
    REQUIRE(catrl_policy_save(p, path.c_str()) == CATRL_OK);
    catrl_policy* q = nullptr;
    REQUIRE(catrl_policy_load(path.c_str(), &q) == CATRL_OK);
    char* a = nullptr;
    char* b = nullptr;
    REQUIRE(catrl_policy_to_json(p, &a) == CATRL_OK);
    REQUIRE(catrl_policy_to_json(q, &b) == CATRL_OK);
    CHECK(take(a) == take(b));
    const auto truncated = dir.write("t.json", "{\"format\": \"catrl-policy\", ").string();
    catrl_policy* r = nullptr;
    CHECK(catrl_policy_load(truncated.c_str(), &r) == CATRL_ERR_CONFIG);
    catrl_policy_free(p);
    catrl_policy_free(q);
  }

  TEST_CASE("positivity failure maps to the fit status") {
    TempDir dir;
    std::string text = "X1_x,A1,R1,delta1,eta1,T\n";
    for (int i = 0; i < 40; ++i) text += std::to_string(i) + ",0," + std::to_string(1 + i) + ",1,1," + std::to_string(1 + i) + "\n";
    const auto path = dir.write("d.csv", text).string();
    catrl_dataset* d = nullptr;
    REQUIRE(catrl_dataset_load_csv(path.c_str(), nullptr, &d) == CATRL_OK);
    catrl_policy* p = nullptr;
    CHECK(catrl_fit(d, nullptr, &p) == CATRL_ERR_FIT);
    CHECK(std::string(catrl_last_error()).find("positivity") != std::string::npos);
    catrl_dataset_free(d);
  }

  TEST_CASE("evaluate") {
    Generated g;
    catrl_policy* p = nullptr;
    REQUIRE(catrl_fit(g.data, kFit, &p) == CATRL_OK);
    char* report = nullptr;
    char* csv = nullptr;
    REQUIRE(catrl_evaluate(p, g.data, g.oracle, R"({"n_mc": 2000, "with_baselines": true})", &report, &csv) ==
            CATRL_OK);
    const json j = json::parse(take(report));
    CHECK(j.at("counterfactual").size() == 5);
    CHECK(j.at("observational").size() == 6);
    const std::string table = take(csv);
    CHECK(table.rfind("mode,policy,tau,rmst", 0) == 0);
    CHECK(table.find("counterfactual,Optimal,") != std::string::npos);

    REQUIRE(catrl_evaluate(p, g.data, nullptr, nullptr, &report, nullptr) == CATRL_OK);
    const json obs = json::parse(take(report));
    CHECK_FALSE(obs.contains("counterfactual"));
    CHECK(obs.at("observational").size() == 1);

    CHECK(catrl_evaluate(p, g.data, nullptr, R"({"tau": -1})", &report, nullptr) == CATRL_ERR_CONFIG);
    CHECK(catrl_evaluate(p, nullptr, nullptr, nullptr, &report, nullptr) == CATRL_ERR_CONFIG);
    catrl_policy_free(p);
  }

  TEST_CASE("grid search") {
    Generated g;
    char* report = nullptr;
    const char* grid = R"({"configs": [{"trees": {"max_depth": 1}, "nuisance": {"forest": {"n_trees": 20}}},
                                     {"trees": {"max_depth": 2}, "nuisance": {"forest": {"n_trees": 20}}}],
                          "validation_fraction": 0.4, "seed": 2})";
    REQUIRE(catrl_gridsearch(g.data, grid, &report) == CATRL_OK);
    const json j = json::parse(take(report));
    CHECK(j.at("entries").size() == 2);
    CHECK(j.at("best").get<int>() >= 0);
    CHECK(catrl_gridsearch(g.data, "[]", &report) == CATRL_ERR_CONFIG);
  }

  TEST_CASE("benchmark") {
    TempDir dir;
    const char* cfg = R"({"arities": [2], "propensity_modes": ["true"], "censoring_kinds": ["uniform"],
                         "n_subjects": 500, "fit": {"nuisance": {"forest": {"n_trees": 20}}}})";
    char *j1 = nullptr, *c1 = nullptr, *t1 = nullptr, *c2 = nullptr;
    size_t failed = 9, total = 0;
    REQUIRE(catrl_benchmark(cfg, dir.path().string().c_str(), &j1, &c1, &t1, &failed, &total) == CATRL_OK);
    CHECK(total == 1);
    CHECK(failed == 0);
    CHECK(take(t1).find("CA-TRL") != std::string::npos);
    CHECK(json::parse(take(j1)).is_object());
    REQUIRE(catrl_benchmark(cfg, nullptr, nullptr, &c2, nullptr, nullptr, nullptr) == CATRL_OK);
    CHECK(take(c1) == take(c2));
    CHECK(catrl_benchmark(R"({"arities": []})", nullptr, nullptr, nullptr, nullptr, nullptr, nullptr) ==
          CATRL_ERR_CONFIG);
  }

  TEST_CASE("utilities") {
    TempDir dir;
    const auto path = dir.file("x.txt").string();
    REQUIRE(catrl_write_file_atomic(path.c_str(), "hello") == CATRL_OK);
    char* hex = nullptr;
    REQUIRE(catrl_content_hash("a", &hex) == CATRL_OK);
    CHECK(take(hex) == "af63dc4c8601ec8c");
  }
}
