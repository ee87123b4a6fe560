#pragma once

#include <cstdint>
#include <string>

#include "fpbox/lattice.hpp"

namespace fpbox {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flat key-value run configuration shared by every CLI command.
struct RunConfig {
  ModelParams params = ModelParams::unit_kappa(1.0, -1.0, 0.5);
  CutoffKind cutoff_kind = CutoffKind::Sharp;
  double cutoff_radius = 4.0;
  double basis_radius = 0.0;  // 0: matches the scheme support radius
  double k_cap = 8.0;
  double tol_root = 1e-10;
  double tol_residual = 1e-8;
  int threads = 1;
  uint64_t seed = 12345;

  CutoffScheme scheme() const;
  double effective_basis_radius() const;
  void validate() const;
};

// Parses `key = value` lines ('#' comments). Unknown keys and malformed
// lines raise std::runtime_error carrying the line number and field.
RunConfig parse_config_file(const std::string& path);
RunConfig parse_config_text(const std::string& text, const std::string& origin = "<config>");

}  // namespace fpbox
