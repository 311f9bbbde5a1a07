#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace driftmt {

// Monthly panel of macro predictors and the excess market return. Row t is
// month yyyymm[t]; predictors are values known at the end of that month and
// excess_return[t] is the return realized during it.
struct MacroPanel {
  std::vector<int> yyyymm;
  std::vector<std::string> predictor_names;  // 14 macro indicators + lagged returns
  Eigen::MatrixXd predictors;                // T x names.size()
  Eigen::VectorXd excess_return;             // T

  int rows() const { return static_cast<int>(yyyymm.size()); }
  int find_month(int ym) const;  // -1 when absent
};

// Column-name overrides for the raw data file, as {canonical: actual} pairs.
struct SchemaMapping {
  std::vector<std::pair<std::string, std::string>> renames;

  static SchemaMapping from_json_file(const std::string& path);
  std::string resolve(const std::string& canonical) const;
};

// Loads the monthly predictor file (Goyal-Welch layout), derives the 14
// indicators (dp, dy, ep, de, svar, bm, ntis, tbl, lty, ltr, tms, dfy, dfr,
// infl) plus lagged market returns, and imputes interior gaps by carrying the
// last observation forward. Leading rows with missing requirements drop.
MacroPanel load_panel(const std::string& csv_path, const SchemaMapping& mapping = {},
                      int return_lags = 6);

// Expanding-window z-scores with a burn-in; statistics use rows <= t only.
// Zero-variance predictors fall back to unit scale.
class Standardizer {
 public:
  Standardizer(const MacroPanel& panel, int burn_in = 36, int n_predictors = -1);

  int burn_in() const { return burn_in_; }
  int first_valid_row() const { return burn_in_ - 1; }
  Eigen::VectorXd at(int t) const;  // throws DomainError before the burn-in

 private:
  const MacroPanel* panel_;
  int burn_in_;
  int n_pred_;
  Eigen::MatrixXd mean_;   // running means per row
  Eigen::MatrixXd scale_;  // running stds per row (unit fallback)
};

// Random Fourier features: interleaved [sin(g w_i'G), cos(g w_i'G)] / sqrt(p).
Eigen::VectorXd rff(const Eigen::VectorXd& g_std, double gamma,
                    const Eigen::MatrixXd& weights);

// p/2 x d standard-normal weight matrix for one draw index
Eigen::MatrixXd rff_weights(int p, int d, std::uint64_t seed, std::uint64_t draw_index);

struct PeriodDef {
  std::string label;
  int start_yyyymm = 0;  // inclusive
  int end_yyyymm = 0;    // inclusive
};

std::vector<PeriodDef> default_periods();  // six 15-year blocks, 1930-2019

struct BacktestConfig {
  int window = 12;
  int p = 600;  // must be even (sin/cos pairs)
  int rff_draws = 500;
  std::vector<double> gammas;  // default 0.1, 0.2, ..., 5.0
  std::vector<double> zs = {0.01, 100.0};
  int burn_in = 36;
  std::uint64_t seed = 1;
  int threads = 0;
  bool counterfactual = false;
  std::vector<PeriodDef> periods = default_periods();

  void validate() const;
  std::vector<double> gamma_grid() const;
};

struct PeriodAggregate {
  std::string period;
  double gamma = 0.0;  // NaN for the linear strategy
  double z = 0.0;
  double mean_return = 0.0;
  double sharpe = 0.0;       // annualized, sqrt(12) x monthly mean / monthly std
  double cf_mean_return = std::numeric_limits<double>::quiet_NaN();
  int months = 0;
};

struct BacktestResult {
  std::vector<int> months;      // return month of each evaluated observation
  std::vector<double> gammas;
  std::vector<double> zs;
  // draw-averaged monthly strategy returns, indexed [gamma][z][month]
  std::vector<std::vector<std::vector<double>>> series;
  std::vector<std::vector<std::vector<double>>> cf_series;  // empty unless requested
  std::vector<PeriodAggregate> aggregates;                  // includes "full"
  std::vector<int> skipped_months;

  const std::vector<double>& series_at(double gamma, double z) const;
  void write_expret_csv(const std::string& path) const;
  void write_sharpe_csv(const std::string& path) const;
  void write_counterfactual_csv(const std::string& path) const;
};

// Rolling random-feature timing backtest: each month fit a ridge on the
// trailing `window` months of RFFs, hold beta' S_t for one month, average
// returns over draws, then aggregate per (period, gamma, z).
BacktestResult timing_backtest(const MacroPanel& panel, const BacktestConfig& config);

// Same protocol on the raw standardized predictors (p = 15, no draws).
BacktestResult linear_backtest(const MacroPanel& panel, const BacktestConfig& config);

struct SchemeRow {
  std::string period;
  std::string scheme;  // "linear", "feasible", "hindsight"
  double z = 0.0;
  double value = 0.0;
};

// Feasible = gamma with the best return in the previous period (first period
// uses the gamma-average); hindsight = best gamma within the period. The full
// sample row chains the per-period selections, weighted by month count.
std::vector<SchemeRow> bandwidth_schemes(const BacktestResult& rff_result,
                                         const BacktestResult& linear_result);

void write_table2_csv(const std::vector<SchemeRow>& rows, const std::string& path);

struct RollingBetasConfig {
  int window = 180;
  int return_lags = 6;
  std::vector<std::string> exclusions = {"lty", "dp", "dy", "tms"};
  int burn_in = 36;
};

struct RollingBetas {
  std::vector<int> months;                 // estimation month per row
  std::vector<std::string> names;          // regressors (no intercept column)
  Eigen::MatrixXd coefficients;            // rows x names
  std::vector<int> ridge_fallback_months;  // audit: singular windows
};

// OLS coefficient paths of r_{t+1} on the (standardized) predictors over a
// rolling window, intercept included but not reported.
RollingBetas rolling_betas(const MacroPanel& panel, const RollingBetasConfig& config = {});

void write_betas_csv(const RollingBetas& betas, const std::string& path);

// Affine rescale so the sample mean/std of `series` match target exactly.
std::vector<double> match_moments(const std::vector<double>& series, double target_mean,
                                  double target_std);

}  // namespace driftmt
