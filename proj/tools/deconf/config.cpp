#include "config.hpp"

#include "deconf/common.hpp"

#include <fstream>
#include <sstream>

namespace deconf::cli {

Json default_config() {
  Json c;
  c["seed"] = 0;
  c["data"] = {{"path", ""}, {"roles", Json::object()}, {"normalize_tiv", true}};
  c["simulate"] = {
      {"n", 2000},
      {"d", 19},
      {"factors", 2},
      {"factor_loading_sd", 0.8},
      {"age_loading_sd", 0.5},
      {"gender_loading_sd", 0.3},
      {"noise_sd", 0.6},
      {"nu_x", 0.45},
      {"nu_z", 0.45},
      {"n_clusters", 4},
      {"band", {20.0, 80.0}},
      {"effect_scale", 0.5},
      {"age_coef_scale", 0.2},
      {"signal", "fitted"},
  };
  c["fit"] = {
      {"model", "ppca"},
      {"latent_dim", 6},
      {"prior_scale_loadings", 1.0},
      {"prior_scale_coefficients", 1.0},
      {"noise_shape", 3.0},
      {"noise_scale", 1.0},
      {"ard_shape", 2.0},
      {"ard_scale", 1.0},
      {"learn_loading_scale", true},
      {"n_warmup", 1000},
      {"n_samples", 500},
      {"thin", 2},
      {"hold_fraction", 0.2},
  };
  c["check"] = {{"n_replicates", 200}, {"tau", 0.1}, {"statistic_draws", 0}};
  c["effects"] = {
      {"outcome_transform", "adas"},
      {"max_score", 85.0},
      {"include_age", true},
      {"extra_covariates", Json::array()},
      {"prior_scale", 2.5},
      {"log_phi_mean", 0.0},
      {"log_phi_sd", 3.0},
      {"n_warmup", 2000},
      {"n_samples", 2000},
      {"thin", 1},
      {"intervention_units", "standardized"},
      {"interventions", Json::array()},
  };
  Json grid = Json::array();
  for (const char* g : {"10/1", "5/1", "4/1", "3/1", "5/2", "5/3", "3/2", "1/1", "2/3", "3/5", "2/5", "1/3",
                        "1/4", "1/5", "1/10"}) {
    grid.push_back(g);
  }
  c["benchmark"] = {
      {"grid", grid},
      {"n_sims", 50},
      {"nu_eps", 0.1},
      {"n", 2000},
      {"d", 19},
      {"factors", 2},
      {"factor_loading_sd", 0.8},
      {"age_loading_sd", 0.5},
      {"gender_loading_sd", 0.3},
      {"noise_sd", 0.6},
      {"n_clusters", 4},
      {"band", {20.0, 80.0}},
      {"effect_scale", 0.5},
      {"age_coef_scale", 0.2},
      {"signal", "fitted"},
      {"latent_dim", 5},
      {"n_warmup", 300},
      {"n_samples", 150},
      {"thin", 1},
      {"hold_fraction", 0.2},
      {"n_replicates", 100},
      {"tau", 0.1},
      {"statistic_draws", 30},
      {"l2", 0.0},
  };
  return c;
}

namespace {

bool same_kind(const Json& a, const Json& b) {
  if (a.is_number() && b.is_number()) {
    // An integer default only takes integers.
    return !a.is_number_integer() || b.is_number_integer();
  }
  return a.type() == b.type();
}

const char* kind_name(const Json& j) {
  if (j.is_number_integer()) return "an integer";
  if (j.is_number()) return "a number";
  if (j.is_boolean()) return "true/false";
  if (j.is_string()) return "a string";
  if (j.is_array()) return "a list";
  if (j.is_object()) return "an object";
  return "null";
}

// Maps whose keys are user data rather than settings.
bool free_form(const std::string& path) { return path == "data.roles"; }

void merge_into(Json& base, const Json& patch, const std::string& path, const std::string& where) {
  if (!patch.is_object()) throw UsageError(where + ": '" + path + "' must be an object");
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    if (!base.contains(it.key())) throw UsageError(where + ": unknown configuration key '" + key + "'");
    Json& target = base[it.key()];
    if (free_form(key)) {
      if (!it.value().is_object()) throw UsageError(where + ": '" + key + "' must be an object");
      for (auto r = it.value().begin(); r != it.value().end(); ++r) {
        if (!r.value().is_string()) throw UsageError(where + ": role of '" + r.key() + "' must be a string");
        target[r.key()] = r.value();
      }
      continue;
    }
    if (target.is_object()) {
      merge_into(target, it.value(), key, where);
      continue;
    }
    if (!same_kind(target, it.value())) {
      throw UsageError(where + ": '" + key + "' must be " + kind_name(target) + ", got " + kind_name(it.value()));
    }
    target = it.value();
  }
}

}  // namespace

void merge_config(Json& base, const Json& patch, const std::string& where) { merge_into(base, patch, "", where); }

Json read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file " + path.string());
  try {
    return Json::parse(in, nullptr, true, true);
  } catch (const Json::parse_error& e) {
    throw UsageError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
}

Json dotted_assignment(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) throw UsageError("expected section.key=value, got '" + text + "'");
  const std::string path = text.substr(0, eq);
  const std::string raw = text.substr(eq + 1);
  Json value;
  try {
    value = Json::parse(raw);
  } catch (const Json::parse_error&) {
    value = raw;
  }
  Json out = Json::object();
  Json* node = &out;
  std::stringstream parts(path);
  std::string part;
  std::vector<std::string> keys;
  while (std::getline(parts, part, '.')) keys.push_back(part);
  for (std::size_t k = 0; k + 1 < keys.size(); ++k) node = &(*node)[keys[k]];
  (*node)[keys.back()] = value;
  return out;
}

std::string echo(const Json& j) { return j.dump(); }

}  // namespace deconf::cli
