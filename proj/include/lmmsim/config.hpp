/* Copyright 2026 The lmmsim Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lmmsim/errors.hpp"
#include "lmmsim/simengine.hpp"
#include "lmmsim/workload.hpp"

namespace lmmsim {
namespace detail {

using nlohmann::json;

inline const json& require(const json& j, const std::string& key,
                           const std::string& path) {
  if (!j.is_object())
    throw ConfigError(path + ": expected an object");
  const auto it = j.find(key);
  if (it == j.end()) throw ConfigError(path + "." + key + ": missing");
  return *it;
}

inline void check_keys(const json& j, std::initializer_list<const char*> allowed,
                       const std::string& path) {
  if (!j.is_object()) throw ConfigError(path + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed)
      if (key == a) { ok = true; break; }
    if (!ok) throw ConfigError(path + "." + key + ": unknown field");
  }
}

inline double as_double(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path + ": expected a number");
  return j.get<double>();
}

inline std::uint64_t as_u64(const json& j, const std::string& path) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer()) {
    const auto v = j.get<std::int64_t>();
    if (v >= 0) return static_cast<std::uint64_t>(v);
  }
  throw ConfigError(path + ": expected a non-negative integer");
}

inline std::string as_string(const json& j, const std::string& path) {
  if (!j.is_string()) throw ConfigError(path + ": expected a string");
  return j.get<std::string>();
}

inline IntDistribution distribution_from_json(const json& j,
                                              const std::string& path) {
  check_keys(j, {"constant", "uniform"}, path);
  const bool has_c = j.contains("constant"), has_u = j.contains("uniform");
  if (has_c == has_u)
    throw ConfigError(path + ": expected exactly one of constant / uniform");
  if (has_c) return IntDistribution::constant(as_u64(j["constant"], path + ".constant"));
  const json& u = j["uniform"];
  if (!u.is_array() || u.size() != 2)
    throw ConfigError(path + ".uniform: expected [lo, hi]");
  return IntDistribution::uniform(as_u64(u[0], path + ".uniform[0]"),
                                  as_u64(u[1], path + ".uniform[1]"));
}

inline json distribution_to_json(const IntDistribution& d) {
  if (d.kind == IntDistribution::Kind::Constant) return {{"constant", d.lo}};
  return {{"uniform", {d.lo, d.hi}}};
}

inline LayoutPattern pattern_from_string(const std::string& s,
                                         const std::string& path) {
  if (s == "alternating") return LayoutPattern::Alternating;
  if (s == "consecutive_mm") return LayoutPattern::ConsecutiveMm;
  if (s == "text_first") return LayoutPattern::TextFirst;
  throw ConfigError(path + ": unknown pattern '" + s +
                    "' (expected alternating, consecutive_mm or text_first)");
}

inline const char* pattern_to_string(LayoutPattern p) {
  switch (p) {
    case LayoutPattern::Alternating: return "alternating";
    case LayoutPattern::ConsecutiveMm: return "consecutive_mm";
    case LayoutPattern::TextFirst: return "text_first";
  }
  return "?";
}

}  // namespace detail

// One experiment: a workload source, a cost model and engine settings, and
// the (policies x rates x seeds) sweep matrix. The token budget is shared
// across policies within one experiment.
struct ExperimentConfig {
  std::optional<std::string> workload_file;
  double workload_duration_s = 10.0;
  std::vector<std::pair<RequestTemplate, double>> templates;

  SimConfig sim;  // policy field overridden per sweep cell
  std::vector<Policy> policies;
  std::vector<double> rates;
  std::vector<std::uint64_t> seeds;
  std::optional<double> slo_ttft_ms;
  std::string output_dir = "out";

  WorkloadConfig workload_config(double rate, std::uint64_t seed) const {
    WorkloadConfig w;
    w.arrival_rate = rate;
    w.duration_s = workload_duration_s;
    w.seed = seed;
    w.template_mix = templates;
    w.slo_ttft_ms = slo_ttft_ms;
    return w;
  }

  void validate() const {
    if (policies.empty()) throw ConfigError("policies: must not be empty");
    if (rates.empty()) throw ConfigError("rates: must not be empty");
    if (seeds.empty()) throw ConfigError("seeds: must not be empty");
    for (double r : rates)
      if (!(r > 0)) throw ConfigError("rates: entries must be > 0");
    if (output_dir.empty()) throw ConfigError("output_dir: must not be empty");
    if (workload_file) {
      if (!std::filesystem::exists(*workload_file))
        throw ConfigError("workload.file: no such file: " + *workload_file);
      // A workload file fixes the arrival process, so sweeping rates or
      // seeds would just duplicate rows.
      if (rates.size() != 1)
        throw ConfigError(
            "rates: must have exactly one entry when workload.file is set");
      if (seeds.size() != 1)
        throw ConfigError(
            "seeds: must have exactly one entry when workload.file is set");
    } else {
      if (templates.empty())
        throw ConfigError("workload: needs either file or templates");
      workload_config(rates.front(), seeds.front()).validate();
    }
    sim.validate();
  }

  // base_dir resolves a relative workload.file against the config's own
  // directory, so shipped configs work from any working directory.
  static ExperimentConfig from_json(const nlohmann::json& j,
                                    const std::string& base_dir = "");
  nlohmann::json to_json() const;
  static ExperimentConfig load(const std::string& path);
};

inline ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j,
                                                    const std::string& base_dir) {
  using namespace detail;
  ExperimentConfig cfg;
  check_keys(j,
             {"workload", "cost_model", "stages", "token_budget_B",
              "embedding_batch_size_C", "encoder_workers", "release_at",
              "pipeline_mode", "hidden_size", "policies", "rates", "seeds",
              "slo_ttft_ms", "output_dir"},
             "config");

  const json& w = require(j, "workload", "config");
  check_keys(w, {"file", "duration_s", "templates"}, "workload");
  if (w.contains("file")) {
    std::filesystem::path file = as_string(w["file"], "workload.file");
    if (!base_dir.empty() && file.is_relative())
      file = std::filesystem::path(base_dir) / file;
    cfg.workload_file = file.string();
  } else {
    cfg.workload_duration_s = as_double(require(w, "duration_s", "workload"),
                                        "workload.duration_s");
    const json& templates = require(w, "templates", "workload");
    if (!templates.is_array() || templates.empty())
      throw ConfigError("workload.templates: expected a non-empty array");
    for (std::size_t i = 0; i < templates.size(); ++i) {
      const std::string path = "workload.templates[" + format_u64(i) + "]";
      const json& t = templates[i];
      check_keys(t,
                 {"probability", "pattern", "num_mm_items", "mm_item_tokens",
                  "text_segment_tokens"},
                 path);
      RequestTemplate tmpl;
      tmpl.pattern = pattern_from_string(
          as_string(require(t, "pattern", path), path + ".pattern"),
          path + ".pattern");
      tmpl.num_mm_items = distribution_from_json(
          require(t, "num_mm_items", path), path + ".num_mm_items");
      tmpl.mm_item_tokens = distribution_from_json(
          require(t, "mm_item_tokens", path), path + ".mm_item_tokens");
      tmpl.text_segment_tokens =
          distribution_from_json(require(t, "text_segment_tokens", path),
                                 path + ".text_segment_tokens");
      cfg.templates.emplace_back(
          tmpl, as_double(require(t, "probability", path),
                          path + ".probability"));
    }
  }

  const json& cm = require(j, "cost_model", "config");
  check_keys(cm,
             {"alpha_enc_ms", "beta_enc_ms_per_token", "eps_tx_ms",
              "zeta_tx_ms_per_token", "gamma_stage_ms",
              "delta_stage_ms_per_token", "kappa_attn_ms", "tp_speedup"},
             "cost_model");
  CostModel& c = cfg.sim.cost;
  c.alpha_enc_ms = as_double(require(cm, "alpha_enc_ms", "cost_model"),
                             "cost_model.alpha_enc_ms");
  c.beta_enc_ms_per_token =
      as_double(require(cm, "beta_enc_ms_per_token", "cost_model"),
                "cost_model.beta_enc_ms_per_token");
  c.eps_tx_ms = as_double(require(cm, "eps_tx_ms", "cost_model"),
                          "cost_model.eps_tx_ms");
  c.zeta_tx_ms_per_token =
      as_double(require(cm, "zeta_tx_ms_per_token", "cost_model"),
                "cost_model.zeta_tx_ms_per_token");
  c.gamma_stage_ms = as_double(require(cm, "gamma_stage_ms", "cost_model"),
                               "cost_model.gamma_stage_ms");
  c.delta_stage_ms_per_token =
      as_double(require(cm, "delta_stage_ms_per_token", "cost_model"),
                "cost_model.delta_stage_ms_per_token");
  if (cm.contains("kappa_attn_ms"))
    c.kappa_attn_ms = as_double(cm["kappa_attn_ms"], "cost_model.kappa_attn_ms");
  if (cm.contains("tp_speedup"))
    c.tp_speedup = as_double(cm["tp_speedup"], "cost_model.tp_speedup");

  cfg.sim.stages = static_cast<int>(
      as_u64(require(j, "stages", "config"), "stages"));
  cfg.sim.token_budget =
      as_u64(require(j, "token_budget_B", "config"), "token_budget_B");
  const json& ebs = require(j, "embedding_batch_size_C", "config");
  if (ebs.is_string()) {
    if (ebs.get<std::string>() != "whole_request")
      throw ConfigError(
          "embedding_batch_size_C: expected a token count or "
          "\"whole_request\"");
    cfg.sim.embedding_batch_tokens = kWholeRequest;
  } else {
    cfg.sim.embedding_batch_tokens = as_u64(ebs, "embedding_batch_size_C");
  }
  if (j.contains("encoder_workers"))
    cfg.sim.encoder_workers = static_cast<int>(
        as_u64(j["encoder_workers"], "encoder_workers"));
  if (j.contains("release_at"))
    cfg.sim.release_at =
        release_at_from_string(as_string(j["release_at"], "release_at"));
  if (j.contains("pipeline_mode")) {
    const std::string mode = as_string(j["pipeline_mode"], "pipeline_mode");
    if (mode == "cpp")
      cfg.sim.pipeline_mode = PipelineMode::Cpp;
    else if (mode == "vanilla")
      cfg.sim.pipeline_mode = PipelineMode::Vanilla;
    else
      throw ConfigError("pipeline_mode: unknown value '" + mode +
                        "' (expected cpp or vanilla)");
  }
  if (j.contains("hidden_size"))
    cfg.sim.hidden_size =
        static_cast<std::uint32_t>(as_u64(j["hidden_size"], "hidden_size"));

  const json& policies = require(j, "policies", "config");
  if (!policies.is_array())
    throw ConfigError("policies: expected an array");
  for (const auto& p : policies)
    cfg.policies.push_back(policy_from_string(as_string(p, "policies[]")));

  const json& rates = require(j, "rates", "config");
  if (!rates.is_array()) throw ConfigError("rates: expected an array");
  for (const auto& r : rates) cfg.rates.push_back(as_double(r, "rates[]"));

  const json& seeds = require(j, "seeds", "config");
  if (!seeds.is_array()) throw ConfigError("seeds: expected an array");
  for (const auto& s : seeds) cfg.seeds.push_back(as_u64(s, "seeds[]"));

  if (j.contains("slo_ttft_ms"))
    cfg.slo_ttft_ms = as_double(j["slo_ttft_ms"], "slo_ttft_ms");
  cfg.output_dir = as_string(require(j, "output_dir", "config"), "output_dir");

  cfg.validate();
  return cfg;
}

inline nlohmann::json ExperimentConfig::to_json() const {
  using namespace detail;
  nlohmann::json j;
  nlohmann::json w;
  if (workload_file) {
    w["file"] = *workload_file;
  } else {
    w["duration_s"] = workload_duration_s;
    nlohmann::json ts = nlohmann::json::array();
    for (const auto& [tmpl, prob] : templates) {
      ts.push_back({{"probability", prob},
                    {"pattern", pattern_to_string(tmpl.pattern)},
                    {"num_mm_items", distribution_to_json(tmpl.num_mm_items)},
                    {"mm_item_tokens", distribution_to_json(tmpl.mm_item_tokens)},
                    {"text_segment_tokens",
                     distribution_to_json(tmpl.text_segment_tokens)}});
    }
    w["templates"] = std::move(ts);
  }
  j["workload"] = std::move(w);

  j["cost_model"] = {
      {"alpha_enc_ms", sim.cost.alpha_enc_ms},
      {"beta_enc_ms_per_token", sim.cost.beta_enc_ms_per_token},
      {"eps_tx_ms", sim.cost.eps_tx_ms},
      {"zeta_tx_ms_per_token", sim.cost.zeta_tx_ms_per_token},
      {"gamma_stage_ms", sim.cost.gamma_stage_ms},
      {"delta_stage_ms_per_token", sim.cost.delta_stage_ms_per_token},
      {"kappa_attn_ms", sim.cost.kappa_attn_ms},
      {"tp_speedup", sim.cost.tp_speedup},
  };
  j["stages"] = sim.stages;
  j["token_budget_B"] = sim.token_budget;
  if (sim.embedding_batch_tokens == kWholeRequest)
    j["embedding_batch_size_C"] = "whole_request";
  else
    j["embedding_batch_size_C"] = sim.embedding_batch_tokens;
  j["encoder_workers"] = sim.encoder_workers;
  j["release_at"] = sim.release_at == ReleaseAt::FirstStage ? "first_stage"
                                                            : "last_stage";
  if (sim.pipeline_mode)
    j["pipeline_mode"] =
        *sim.pipeline_mode == PipelineMode::Cpp ? "cpp" : "vanilla";
  j["hidden_size"] = sim.hidden_size;

  nlohmann::json ps = nlohmann::json::array();
  for (Policy p : policies) ps.push_back(to_string(p));
  j["policies"] = std::move(ps);
  j["rates"] = rates;
  j["seeds"] = seeds;
  if (slo_ttft_ms) j["slo_ttft_ms"] = *slo_ttft_ms;
  j["output_dir"] = output_dir;
  return j;
}

inline ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }
  try {
    return from_json(j, std::filesystem::path(path).parent_path().string());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

}  // namespace lmmsim
