#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "driftmt/model.hpp"

namespace driftmt {

enum class Protocol {
  S3Proportional,         // Sigma = I, equidistributed loadings, k sweep
  S3Concentrated,         // Sigma = I, concentrated loadings, k in 1..5
  AppendixAr,             // AR(0.9) features, shared latents, equidistributed
  AppendixArConcentrated  // AR(0.9) features, concentrated loadings
};

const char* protocol_name(Protocol p);

struct PanelSpec {
  int p = 0;
  int q = 0;
};

struct ExperimentGrid {
  Protocol protocol = Protocol::S3Proportional;
  int n = 100;
  std::vector<PanelSpec> panels = {{50, 250}, {200, 100}, {300, 0}};
  std::vector<double> k_values;  // defaulted per protocol when empty
  std::vector<double> z_values = {0.01, 0.1};
  std::int64_t draws = 10000;
  std::uint64_t seed = 1;
  int threads = 0;  // 0 = all hardware threads
  int batches = 100;

  void validate() const;
};

struct GridRow {
  std::string experiment;
  double k = 0.0;
  double z = 0.0;
  int n = 0, p = 0, q = 0;
  double mc_mean = 0.0, mc_se = 0.0, mc_vol = 0.0, mc_sharpe = 0.0;
  double mc_sharpe_se = 0.0;  // batched estimate, not part of the CSV schema
  double th_mean = 0.0, th_vol = 0.0, th_sharpe = 0.0;
  std::string error;  // theory domain error recorded per point, not fatal
};

struct SimulationResult {
  std::vector<GridRow> rows;

  void write_csv(const std::string& path) const;
  void write_json(const std::string& path) const;
};

SimulationResult run_grid(const ExperimentGrid& grid);

// Builds the ModelSpec of one grid point; exposed so tests and the theory
// columns share one construction.
ModelSpec grid_model(const ExperimentGrid& grid, const PanelSpec& panel, double k);

// beta_oos,k = k p^{-1/2} (1,...,1)'; theta analogous with q coordinates
DriftGeometry proportional_geometry(int p, int q, double k);

// first round(fraction p) coefficients 1, the rest 0.1, scaled to unit norm
Eigen::VectorXd concentrated_vector(int p, double fraction);

// in-sample concentration 1/2, out-of-sample concentration `fraction`
DriftGeometry concentrated_geometry(int p, int q, double fraction);

struct ConvergenceConfig {
  double cphi = 0.5;
  double c = 3.0;
  double z = 0.1;
  double k = 1.0;
  std::vector<int> n_values = {40, 55, 70, 85, 100, 115, 130};
  std::int64_t draws = 1000000;
  std::uint64_t seed = 1;
  int threads = 0;
};

struct ConvergenceRow {
  int n = 0, p = 0, q = 0;
  double z = 0.0;
  double th_mean = 0.0, mc_mean = 0.0, gap = 0.0, se = 0.0;
  std::int64_t draws = 0;
};

// |theory - MC| vs n at fixed cphi. The MC column averages the conditional
// expected return beta_hat' beta_oos over training draws, which has the same
// expectation as the realized return but far smaller variance.
std::vector<ConvergenceRow> convergence_scan(const ConvergenceConfig& config);

void write_convergence_csv(const std::vector<ConvergenceRow>& rows, const std::string& path);

}  // namespace driftmt
