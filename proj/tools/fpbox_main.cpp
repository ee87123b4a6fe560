// Command-line driver: verification suites, secular-equation solves, and
// convergence studies with CSV/JSON output.

#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <thread>

#include "fpbox/config.hpp"
#include "fpbox/delta.hpp"
#include "fpbox/extrapolation.hpp"
#include "fpbox/fock.hpp"
#include "fpbox/molecule.hpp"
#include "fpbox/polaron.hpp"
#include "fpbox/renorm.hpp"
#include "fpbox/schur.hpp"

using json = nlohmann::ordered_json;
using namespace fpbox;

namespace {

constexpr int kSchemaVersion = 1;

std::string fmt15(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.15g", v);
  return buf;
}

struct Output {
  std::string path;  // empty: stdout
  void write(const std::string& text) const {
    if (path.empty()) {
      std::cout << text;
      if (!text.empty() && text.back() != '\n') std::cout << "\n";
    } else {
      std::ofstream f(path);
      if (!f) throw std::runtime_error("cannot open output file: " + path);
      f << text;
      if (!text.empty() && text.back() != '\n') f << "\n";
    }
  }
};

json params_json(const RunConfig& cfg) {
  json j;
  j["box_length"] = cfg.params.box_length;
  j["kappa"] = cfg.params.kappa;
  j["impurity_mass"] = cfg.params.impurity_mass;
  j["binding_energy"] = cfg.params.binding_energy;
  j["fermi_energy"] = cfg.params.fermi_energy;
  j["cutoff_kind"] = to_string(cfg.cutoff_kind);
  j["cutoff_radius"] = cfg.cutoff_radius;
  j["basis_radius"] = cfg.effective_basis_radius();
  j["k_cap"] = cfg.k_cap;
  j["seed"] = cfg.seed;
  return j;
}

// Ordered parallel map over row indices; results land by index so output is
// deterministic for any thread count.
template <typename Fn>
void parallel_rows(int n, int threads, Fn&& fn) {
  if (threads <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  int nt = std::min(threads, n);
  for (int t = 0; t < nt; ++t)
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  for (auto& th : pool) th.join();
}

// ---------------------------------------------------------------------------
// twobody
// ---------------------------------------------------------------------------

int cmd_twobody(const RunConfig& cfg, const Output& out, const std::string&) {
  json rep;
  rep["schema_version"] = kSchemaVersion;
  rep["command"] = "twobody";
  rep["params"] = params_json(cfg);
  rep["cases"] = json::array();

  bool pass = true;
  for (CutoffKind kind : {CutoffKind::Sharp, CutoffKind::Gaussian}) {
    for (double lam : {4.0, 8.0, 16.0}) {
      CutoffScheme scheme = CutoffScheme::make(kind, cfg.params.kappa, lam * cfg.params.kappa);
      TwoBodyReport r = two_body_check(scheme, cfg.params);
      bool ok = r.eigenvalue_error <= 1e-10 && r.eigvec_residual <= 1e-9;
      pass = pass && ok;
      json c;
      c["scheme"] = to_string(kind);
      c["cutoff_radius"] = lam * cfg.params.kappa;
      c["dim"] = r.dim;
      c["dense"] = r.dense;
      c["g"] = r.g;
      c["eigenvalue"] = r.eigenvalue;
      c["eigenvalue_error"] = r.eigenvalue_error;
      c["eigvec_residual"] = r.eigvec_residual;
      c["pass"] = ok;
      rep["cases"].push_back(c);
    }
  }
  rep["pass"] = pass;
  out.write(rep.dump(2));
  return pass ? 0 : 1;
}

// ---------------------------------------------------------------------------
// bscheck
// ---------------------------------------------------------------------------

int cmd_bscheck(const RunConfig& cfg, const Output& out, const std::string&) {
  json rep;
  rep["schema_version"] = kSchemaVersion;
  rep["command"] = "bscheck";
  rep["params"] = params_json(cfg);
  rep["seed"] = cfg.seed;

  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<int> dim_dist(2, 24);
  std::uniform_int_distribution<int> aux_dist(1, 8);

  int mismatches = 0, cases = 0;
  double max_resolvent = 0.0, max_inverse = 0.0, max_fact = 0.0;
  for (int m = 0; m < 100; ++m) {
    BsModel model = random_bs_model(rng, dim_dist(rng), aux_dist(rng));
    std::uniform_real_distribution<double> e_dist(-10.0, model.h0.minCoeff() - 1e-3);
    for (int e = 0; e < 20; ++e) {
      auto [ch, cphi] = bs_count_check(model, e_dist(rng));
      ++cases;
      if (ch != cphi) ++mismatches;
    }
    double z = -0.7;
    Eigen::MatrixXcd h = bs_hamiltonian(model);
    Eigen::MatrixXcd direct =
        (h - z * Eigen::MatrixXcd::Identity(model.dim(), model.dim())).fullPivLu().inverse();
    max_resolvent = std::max(max_resolvent,
                             (krein_resolvent(model, z) - direct).norm() / direct.norm());
    max_inverse = std::max(max_inverse, inverse_phi_identity_check(model, z));
    auto [f1, f2] = schur_factorization_check(model, z);
    max_fact = std::max({max_fact, f1, f2});
  }

  // Sector-instantiated counting, N in {1, 2}.
  json sector_counts = json::array();
  CutoffScheme scheme = cfg.scheme();
  double radius = cfg.effective_basis_radius();
  for (int nf : {1, 2}) {
    SectorBasis phys = build_sector(cfg.params, nf, SectorKind::Physical, radius, LatticePoint{0, 0});
    SectorBasis angel = build_sector(cfg.params, nf - 1, SectorKind::Angel, radius, LatticePoint{0, 0});
    HamiltonianOperator hop = make_hamiltonian_operator(scheme, cfg.params, phys, angel);
    Eigen::SparseMatrix<double> vt = hop.v.transpose();
    Eigen::SparseMatrix<double> h = -hop.g * Eigen::SparseMatrix<double>(vt * hop.v);
    for (int i = 0; i < phys.dim(); ++i) h.coeffRef(i, i) += hop.h0(i);
    std::vector<double> spec = spectrum_via_c2v(h, c2v_blocks(phys));

    std::mt19937_64 rng2(cfg.seed + nf);
    std::uniform_real_distribution<double> e_dist(cfg.params.binding_energy - 1.0, -1e-3);
    for (int e = 0; e < 20; ++e) {
      double E = e_dist(rng2);
      int count_h = (int)(std::lower_bound(spec.begin(), spec.end(), E) - spec.begin());
      Eigen::MatrixXd phi = phi_n_matrix(scheme, cfg.params, E, angel);
      std::vector<double> pe = dense_sym_eigenvalues(phi);
      int count_phi = (int)(std::lower_bound(pe.begin(), pe.end(), -1e-10) - pe.begin());
      ++cases;
      if (count_h != count_phi) ++mismatches;
      json row;
      row["n_fermions"] = nf;
      row["E"] = E;
      row["count_h"] = count_h;
      row["count_phi"] = count_phi;
      sector_counts.push_back(row);
    }
  }

  rep["cases"] = cases;
  rep["mismatches"] = mismatches;
  rep["max_resolvent_residual"] = max_resolvent;
  rep["max_inverse_phi_residual"] = max_inverse;
  rep["max_factorization_residual"] = max_fact;
  rep["sector_counts"] = sector_counts;
  bool pass = mismatches == 0 && max_resolvent <= 1e-10 && max_inverse <= 1e-10 &&
              max_fact <= 1e-12;
  rep["pass"] = pass;
  out.write(rep.dump(2));
  return pass ? 0 : 1;
}

// ---------------------------------------------------------------------------
// polaron / molecule / crossover
// ---------------------------------------------------------------------------

json polaron_json(const PolaronSolution& s) {
  json j;
  j["lambda_star"] = s.lambda_star;
  j["e_polaron"] = s.e_polaron;
  j["residual"] = s.residual;
  j["mu1_check"] = s.mu1_check;
  j["ker_residual"] = s.ker_residual;
  j["g_error_bound"] = s.g_error_bound;
  j["propagated_error"] = s.propagated_error;
  j["sign_changes"] = s.sign_changes;
  j["coefficients"] = json::array();
  for (const auto& [q, v] : s.coefficients) j["coefficients"].push_back({q.nx, q.ny, v});
  return j;
}

int cmd_polaron(const RunConfig& cfg, const Output& out, const std::string& format) {
  PolaronOptions opts;
  opts.tol = cfg.tol_root;
  PolaronSolution s = solve_polaron(cfg.params, opts);
  if (format == "csv") {
    std::string csv = "lambda_star,e_polaron,residual,mu1_check,ker_residual,g_error_bound\n";
    csv += fmt15(s.lambda_star) + "," + fmt15(s.e_polaron) + "," + fmt15(s.residual) + "," +
           fmt15(s.mu1_check) + "," + fmt15(s.ker_residual) + "," + fmt15(s.g_error_bound) + "\n";
    out.write(csv);
  } else {
    json rep;
    rep["schema_version"] = kSchemaVersion;
    rep["command"] = "polaron";
    rep["params"] = params_json(cfg);
    rep["solution"] = polaron_json(s);
    out.write(rep.dump(2));
  }
  bool pass = s.residual <= cfg.tol_residual && std::abs(s.mu1_check) <= 1e-8;
  return pass ? 0 : 1;
}

json molecule_json(const MoleculeSolution& s) {
  json j;
  j["found"] = s.found;
  if (s.found) {
    j["e_molecule"] = s.e_molecule;
    j["lambda"] = s.lambda;
    j["stationarity_residual"] = s.stationarity_residual;
    j["scalar_residual"] = s.scalar_residual;
    j["form_value"] = s.form_value;
    j["g_error_bound"] = s.g_error_bound;
    j["sign_changes"] = s.sign_changes;
    j["k_cap"] = s.k_cap;
    if (s.extrapolated) j["extrapolated"] = *s.extrapolated;
    j["ladder"] = json::array();
    for (auto& [kc, e] : s.ladder) j["ladder"].push_back({kc, e});
    j["gamma"] = json::array();
    for (int ik = 0; ik < (int)s.ks.size(); ++ik)
      for (int iq = 0; iq < (int)s.qs.size(); ++iq)
        j["gamma"].push_back({s.ks[ik].nx, s.ks[ik].ny, s.qs[iq].nx, s.qs[iq].ny,
                              s.gamma(ik * (int)s.qs.size() + iq)});
  }
  return j;
}

int cmd_molecule(const RunConfig& cfg, const Output& out, const std::string& format) {
  MoleculeOptions opts;
  std::vector<double> ladder = {cfg.k_cap / 4.0, cfg.k_cap / 2.0, cfg.k_cap};
  MoleculeSolution s = solve_molecule(cfg.params, cfg.k_cap, ladder, opts);
  if (format == "csv") {
    std::string csv = "found,e_molecule,stationarity_residual,scalar_residual,k_cap\n";
    csv += std::string(s.found ? "1" : "0") + "," + fmt15(s.e_molecule) + "," +
           fmt15(s.stationarity_residual) + "," + fmt15(s.scalar_residual) + "," +
           fmt15(s.k_cap) + "\n";
    out.write(csv);
  } else {
    json rep;
    rep["schema_version"] = kSchemaVersion;
    rep["command"] = "molecule";
    rep["params"] = params_json(cfg);
    rep["solution"] = molecule_json(s);
    out.write(rep.dump(2));
  }
  bool pass = !s.found || (s.stationarity_residual <= cfg.tol_residual &&
                           s.scalar_residual <= cfg.tol_residual);
  return pass ? 0 : 1;
}

int cmd_crossover(const RunConfig& cfg, const Output& out, const std::string& format,
                  const std::vector<double>& eb_grid) {
  std::vector<CrossoverRow> rows(eb_grid.size());
  MoleculeOptions opts;
  parallel_rows((int)eb_grid.size(), cfg.threads, [&](int i) {
    auto r = crossover_sweep(cfg.params, {eb_grid[i]}, cfg.k_cap, opts);
    rows[i] = r[0];
  });

  int flips = 0;
  for (size_t i = 1; i < rows.size(); ++i)
    if (rows[i].winner != rows[i - 1].winner) ++flips;

  if (format == "json") {
    json rep;
    rep["schema_version"] = kSchemaVersion;
    rep["command"] = "crossover";
    rep["params"] = params_json(cfg);
    rep["winner_flips"] = flips;
    rep["rows"] = json::array();
    for (const auto& r : rows) {
      json j;
      j["e_b"] = r.e_b;
      j["e_polaron"] = r.e_polaron;
      j["molecule_found"] = r.molecule_found;
      j["e_molecule"] = r.e_molecule;
      j["e_molecule_minus_mu"] = r.e_molecule_minus_mu;
      j["winner"] = r.winner;
      j["flagged"] = r.flagged;
      j["polaron_residual"] = r.polaron_residual;
      j["molecule_residual"] = r.molecule_residual;
      j["k_cap"] = r.k_cap;
      j["error"] = r.error;
      rep["rows"].push_back(j);
    }
    out.write(rep.dump(2));
  } else {
    std::string csv =
        "e_b,e_polaron,e_molecule,e_molecule_minus_mu,winner,polaron_residual,"
        "molecule_residual,k_cap,flagged,error\n";
    for (const auto& r : rows) {
      csv += fmt15(r.e_b) + "," + fmt15(r.e_polaron) + "," +
             (r.molecule_found ? fmt15(r.e_molecule) : "") + "," +
             (r.molecule_found ? fmt15(r.e_molecule_minus_mu) : "") + "," + r.winner + "," +
             fmt15(r.polaron_residual) + "," + fmt15(r.molecule_residual) + "," +
             fmt15(r.k_cap) + "," + (r.flagged ? "1" : "0") + "," + r.error + "\n";
    }
    out.write(csv);
  }
  for (const auto& r : rows)
    if (!r.error.empty()) return 1;
  return 0;
}

// ---------------------------------------------------------------------------
// convergence
// ---------------------------------------------------------------------------

int cmd_convergence(const RunConfig& cfg, const Output& out, const std::string& format,
                    const std::vector<double>& ladder) {
  // Compare scheme kinds at equal support radii: sharp uses the rung radius
  // directly, the smooth kinds scale lambda so 6*lambda matches it.
  struct Row {
    std::string scheme;
    double lambda, support;
    int dim;
    double e0, mu00, mu10;
  };
  std::vector<Row> rows;
  std::vector<double> hs;
  std::vector<std::vector<double>> e0s(3), mu0s(3);
  const CutoffKind kinds[3] = {CutoffKind::Sharp, CutoffKind::Gaussian, CutoffKind::BetaOnly};
  double tau = -2.0;

  for (double rung : ladder) {
    hs.push_back(1.0 / rung);
    for (int s = 0; s < 3; ++s) {
      double lam = kinds[s] == CutoffKind::Sharp ? rung : rung / 6.0;
      CutoffScheme scheme = CutoffScheme::make(kinds[s], cfg.params.kappa, lam * cfg.params.kappa);
      double radius = scheme.support_radius();
      SectorBasis phys = build_sector(cfg.params, 2, SectorKind::Physical, radius, LatticePoint{0, 0});
      SectorBasis angel = build_sector(cfg.params, 1, SectorKind::Angel, radius, LatticePoint{0, 0});
      HamiltonianOperator hop = make_hamiltonian_operator(scheme, cfg.params, phys, angel);
      GroundStateResult gs =
          ground_state(hop, 1e-9, cfg.seed, 2.0 * cfg.params.binding_energy - 1.0);
      Row row;
      row.scheme = to_string(kinds[s]);
      row.lambda = lam * cfg.params.kappa;
      row.support = radius;
      row.dim = phys.dim();
      row.e0 = gs.energy;
      row.mu00 = mu_tau_n(scheme, cfg.params, tau, LatticePoint{0, 0}, 0.0);
      row.mu10 = mu_tau_n(scheme, cfg.params, tau, LatticePoint{1, 0}, 0.0);
      rows.push_back(row);
      e0s[s].push_back(gs.energy);
      mu0s[s].push_back(row.mu00);
    }
  }

  RenormSum mu_limit = mu_tau(cfg.params, tau, LatticePoint{0, 0}, 0.0);
  json fits = json::array();
  std::vector<double> extrapolated;
  for (int s = 0; s < 3; ++s) {
    Extrapolation ex = richardson(hs, e0s[s]);
    extrapolated.push_back(ex.value);
    json f;
    f["scheme"] = to_string(kinds[s]);
    f["extrapolated_e0"] = ex.value;
    f["decay_exponent"] = ex.exponent;
    f["mu_tau_n_last"] = mu0s[s].back();
    f["mu_tau_limit"] = mu_limit.value;
    fits.push_back(f);
  }
  double spread = 0.0;
  for (double v : extrapolated)
    for (double w : extrapolated) spread = std::max(spread, std::abs(v - w));
  bool pass = ladder.size() < 2 || spread <= 1e-3;

  if (format == "csv") {
    std::string csv = "scheme,lambda,support,dim,e0,mu_tau_n_q0,mu_tau_n_q10\n";
    for (const auto& r : rows)
      csv += r.scheme + "," + fmt15(r.lambda) + "," + fmt15(r.support) + "," +
             std::to_string(r.dim) + "," + fmt15(r.e0) + "," + fmt15(r.mu00) + "," +
             fmt15(r.mu10) + "\n";
    out.write(csv);
  } else {
    json rep;
    rep["schema_version"] = kSchemaVersion;
    rep["command"] = "convergence";
    rep["params"] = params_json(cfg);
    rep["ladder"] = ladder;
    rep["rows"] = json::array();
    for (const auto& r : rows) {
      json j;
      j["scheme"] = r.scheme;
      j["lambda"] = r.lambda;
      j["support"] = r.support;
      j["dim"] = r.dim;
      j["e0"] = r.e0;
      j["mu_tau_n_q0"] = r.mu00;
      j["mu_tau_n_q10"] = r.mu10;
      rep["rows"].push_back(j);
    }
    rep["fits"] = fits;
    rep["extrapolated_spread"] = spread;
    rep["pass"] = pass;
    out.write(rep.dump(2));
  }
  return pass ? 0 : 1;
}

// ---------------------------------------------------------------------------
// delta
// ---------------------------------------------------------------------------

int cmd_delta(const RunConfig& cfg, const Output& out, const std::string&) {
  std::vector<double> radii = {2.0 * cfg.params.kappa, 4.0 * cfg.params.kappa,
                               8.0 * cfg.params.kappa};
  DeltaLadderReport rep = delta_ladder(cfg.params, radii);
  RenormSum at_eb_minus = phi_delta(cfg.params, cfg.params.binding_energy - 1.0);

  json j;
  j["schema_version"] = kSchemaVersion;
  j["command"] = "delta";
  j["params"] = params_json(cfg);
  j["phi_delta_at_EB_minus_1"] = at_eb_minus.value;
  j["phi_delta_error_bound"] = at_eb_minus.error_bound;
  j["rungs"] = json::array();
  bool pass = true;
  for (size_t i = 0; i < rep.rungs.size(); ++i) {
    const DeltaReport& r = rep.rungs[i];
    json rj;
    rj["cutoff_radius"] = r.cutoff_radius;
    rj["dim"] = r.dim;
    rj["g_n"] = r.g_n;
    rj["eigenvalue"] = r.eigenvalue;
    rj["eigenvalue_error"] = r.eigenvalue_error;
    rj["eigvec_residual"] = r.eigvec_residual;
    rj["resolvent_residual"] = r.resolvent_residual;
    rj["phi_zero_residual"] = r.phi_zero_residual;
    rj["limit_vector_distance"] = rep.eigvec_limit_distance[i];
    j["rungs"].push_back(rj);
    pass = pass && r.eigenvalue_error <= 1e-12 && r.resolvent_residual <= 1e-10 &&
           r.phi_zero_residual <= 1e-13;
  }
  j["pass"] = pass;
  out.write(j.dump(2));
  return pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectral toolkit for the two-dimensional Fermi polaron in a periodic box"};
  app.require_subcommand(1);

  std::string config_path, out_path, format = "json", eb_grid_str = "-0.25,-1,-4,-16";
  std::string ladder_str = "4,8,16";
  int threads = 0;
  long long seed = -1;

  app.add_option("--config", config_path, "Configuration file (key = value lines)");
  app.add_option("--out", out_path, "Output path (default: stdout)");
  app.add_option("--threads", threads, "Worker threads for sweeps");
  app.add_option("--seed", seed, "Seed override for randomized suites");
  app.add_option("--format", format, "Output format: csv or json")
      ->check(CLI::IsMember({"csv", "json"}));

  auto* twobody = app.add_subcommand("twobody", "Two-body exactness suite");
  auto* bscheck = app.add_subcommand("bscheck", "Birman-Schwinger verification suites");
  auto* polaron = app.add_subcommand("polaron", "Solve the polaron secular equation");
  auto* molecule = app.add_subcommand("molecule", "Solve the molecule secular equations");
  auto* crossover = app.add_subcommand("crossover", "Polaron-molecule crossover sweep");
  crossover->add_option("--eb-grid", eb_grid_str, "Comma-separated E_B grid");
  auto* convergence = app.add_subcommand("convergence", "Cutoff-ladder convergence study");
  convergence->add_option("--ladder", ladder_str, "Comma-separated support radii (kappa units)");
  auto* delta = app.add_subcommand("delta", "Point-interaction closed-form checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    RunConfig cfg = config_path.empty() ? RunConfig{} : parse_config_file(config_path);
    if (threads > 0) cfg.threads = threads;
    if (seed >= 0) cfg.seed = (uint64_t)seed;
    cfg.validate();
    Output out{out_path};

    auto parse_grid = [](const std::string& s) {
      std::vector<double> grid;
      std::stringstream ss(s);
      std::string item;
      while (std::getline(ss, item, ',')) grid.push_back(std::stod(item));
      return grid;
    };

    if (twobody->parsed()) return cmd_twobody(cfg, out, format);
    if (bscheck->parsed()) return cmd_bscheck(cfg, out, format);
    if (polaron->parsed()) return cmd_polaron(cfg, out, format);
    if (molecule->parsed()) return cmd_molecule(cfg, out, format);
    if (crossover->parsed()) return cmd_crossover(cfg, out, format, parse_grid(eb_grid_str));
    if (convergence->parsed()) return cmd_convergence(cfg, out, format, parse_grid(ladder_str));
    if (delta->parsed()) return cmd_delta(cfg, out, format);
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
