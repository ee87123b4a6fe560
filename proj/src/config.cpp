#include "fpbox/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

namespace fpbox {

CutoffScheme RunConfig::scheme() const {
  return CutoffScheme::make(cutoff_kind, params.kappa, cutoff_radius);
}

double RunConfig::effective_basis_radius() const {
  double support = scheme().support_radius();
  return basis_radius > 0.0 ? basis_radius : support;
}

void RunConfig::validate() const {
  if (!(tol_root > 0.0) || !(tol_residual > 0.0))
    throw ConfigError("config: tolerances must be positive");
  if (threads < 1) throw ConfigError("config: threads must be >= 1");
  if (!(cutoff_radius > 0.0)) throw ConfigError("config: cutoff_radius must be positive");
  double support = scheme().support_radius();
  if (basis_radius > 0.0 && basis_radius < support * (1.0 - 1e-12))
    throw ConfigError("config: basis_radius must be >= the scheme support radius");
}

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
  double box_length = 2.0 * M_PI;
  bool unit_kappa = true;
  double impurity_mass = 1.0, binding_energy = -1.0, fermi_energy = 0.5;
  RunConfig cfg;

  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto notspace = [](unsigned char c) { return !std::isspace(c); };
    line.erase(line.begin(), std::find_if(line.begin(), line.end(), notspace));
    line.erase(std::find_if(line.rbegin(), line.rend(), notspace).base(), line.end());
    if (line.empty()) continue;

    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    auto trim = [&](std::string& s) {
      s.erase(s.begin(), std::find_if(s.begin(), s.end(), notspace));
      s.erase(std::find_if(s.rbegin(), s.rend(), notspace).base(), s.end());
    };
    trim(key);
    trim(value);
    auto bad = [&](const std::string& why) {
      return ConfigError(origin + ":" + std::to_string(lineno) + ": field '" + key +
                                "': " + why);
    };
    auto as_double = [&]() {
      try {
        size_t pos = 0;
        double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("");
        return v;
      } catch (...) {
        throw bad("not a number: '" + value + "'");
      }
    };

    if (key == "box_length") {
      box_length = as_double();
      unit_kappa = false;
    } else if (key == "impurity_mass") {
      impurity_mass = as_double();
    } else if (key == "binding_energy") {
      binding_energy = as_double();
    } else if (key == "fermi_energy") {
      fermi_energy = as_double();
    } else if (key == "cutoff_kind") {
      try {
        cfg.cutoff_kind = cutoff_kind_from_string(value);
      } catch (const std::exception& e) {
        throw bad(e.what());
      }
    } else if (key == "cutoff_radius") {
      cfg.cutoff_radius = as_double();
    } else if (key == "basis_radius") {
      cfg.basis_radius = as_double();
    } else if (key == "k_cap") {
      cfg.k_cap = as_double();
    } else if (key == "tol_root") {
      cfg.tol_root = as_double();
    } else if (key == "tol_residual") {
      cfg.tol_residual = as_double();
    } else if (key == "threads") {
      cfg.threads = (int)as_double();
    } else if (key == "seed") {
      cfg.seed = (uint64_t)as_double();
    } else {
      throw bad("unknown key");
    }
  }

  try {
    cfg.params = ModelParams::create(box_length, impurity_mass, binding_energy, fermi_energy);
  } catch (const std::exception& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  if (unit_kappa) cfg.params.kappa = 1.0;  // default box: kappa exactly 1
  cfg.validate();
  return cfg;
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str(), path);
}

}  // namespace fpbox
