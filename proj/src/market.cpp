#include "driftmt/market.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "driftmt/errors.hpp"
#include "driftmt/rng.hpp"

namespace driftmt {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

int next_month(int ym) {
  const int y = ym / 100, m = ym % 100;
  return m == 12 ? (y + 1) * 100 + 1 : ym + 1;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (char ch : line) {
    if (ch == '"') {
      quoted = !quoted;
    } else if (ch == ',' && !quoted) {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

std::string trim(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

// numbers may carry thousand separators from spreadsheet exports
double parse_cell(const std::string& raw) {
  std::string s = trim(raw);
  if (s.empty()) return kNaN;
  std::string lower;
  for (char c : s) lower.push_back(static_cast<char>(std::tolower(c)));
  if (lower == "na" || lower == "nan" || lower == "null" || lower == ".") return kNaN;
  s.erase(std::remove(s.begin(), s.end(), ','), s.end());
  try {
    size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) return kNaN;
    return v;
  } catch (...) {
    return kNaN;
  }
}

struct PeriodMask {
  std::string label;
  std::vector<int> idx;  // indices into the month axis
};

std::vector<PeriodMask> build_masks(const std::vector<int>& months,
                                    const std::vector<PeriodDef>& periods) {
  std::vector<PeriodMask> masks;
  PeriodMask full{"full", {}};
  for (const auto& pd : periods) {
    PeriodMask m{pd.label, {}};
    for (size_t i = 0; i < months.size(); ++i)
      if (months[i] >= pd.start_yyyymm && months[i] <= pd.end_yyyymm)
        m.idx.push_back(static_cast<int>(i));
    full.idx.insert(full.idx.end(), m.idx.begin(), m.idx.end());
    masks.push_back(std::move(m));
  }
  std::sort(full.idx.begin(), full.idx.end());
  masks.push_back(std::move(full));
  return masks;
}

double mean_of(const std::vector<double>& v, const std::vector<int>& idx) {
  if (idx.empty()) return kNaN;
  double s = 0.0;
  for (int i : idx) s += v[i];
  return s / idx.size();
}

double sharpe_of(const std::vector<double>& v, const std::vector<int>& idx) {
  if (idx.size() < 2) return kNaN;
  const double m = mean_of(v, idx);
  double ss = 0.0;
  for (int i : idx) ss += (v[i] - m) * (v[i] - m);
  const double sd = std::sqrt(ss / (idx.size() - 1));
  return sd > 0.0 ? std::sqrt(12.0) * m / sd : kNaN;
}

int effective_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

template <typename Fn>
void parallel_chunks(int chunks, int threads, Fn&& fn) {
  threads = std::min(threads, chunks);
  if (threads <= 1) {
    for (int c = 0; c < chunks; ++c) fn(c);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const int c = next.fetch_add(1);
      if (c >= chunks) return;
      try {
        fn(c);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace

int MacroPanel::find_month(int ym) const {
  const auto it = std::lower_bound(yyyymm.begin(), yyyymm.end(), ym);
  if (it == yyyymm.end() || *it != ym) return -1;
  return static_cast<int>(it - yyyymm.begin());
}

SchemaMapping SchemaMapping::from_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw SchemaError("cannot open schema mapping " + path);
  nlohmann::json j;
  is >> j;
  SchemaMapping m;
  for (auto it = j.begin(); it != j.end(); ++it)
    m.renames.emplace_back(it.key(), it.value().get<std::string>());
  return m;
}

std::string SchemaMapping::resolve(const std::string& canonical) const {
  for (const auto& [from, to] : renames)
    if (from == canonical) return to;
  return canonical;
}

MacroPanel load_panel(const std::string& csv_path, const SchemaMapping& mapping,
                      int return_lags) {
  std::ifstream is(csv_path);
  if (!is) throw SchemaError("cannot open data file " + csv_path);

  std::string line;
  if (!std::getline(is, line)) throw SchemaError("empty data file " + csv_path);
  const std::vector<std::string> header = split_csv_line(line);

  const std::vector<std::string> raw_names = {"yyyymm", "Index", "D12",   "E12",  "b/m", "tbl",
                                              "AAA",    "BAA",   "lty",   "ntis", "Rfree",
                                              "infl",   "ltr",   "corpr", "svar", "CRSP_SPvw"};
  std::map<std::string, int> col;
  std::vector<std::string> missing;
  for (const auto& canonical : raw_names) {
    const std::string actual = mapping.resolve(canonical);
    int found = -1;
    for (size_t i = 0; i < header.size(); ++i)
      if (trim(header[i]) == actual) found = static_cast<int>(i);
    if (found < 0)
      missing.push_back(actual);
    else
      col[canonical] = found;
  }
  if (!missing.empty()) {
    std::string msg = "data file is missing required columns:";
    for (const auto& m : missing) msg += " " + m;
    throw SchemaError(msg);
  }

  std::vector<int> months;
  std::vector<std::vector<double>> raw(raw_names.size());
  while (std::getline(is, line)) {
    if (trim(line).empty()) continue;
    const std::vector<std::string> cells = split_csv_line(line);
    const double ymv = parse_cell(cells.at(col["yyyymm"]));
    if (std::isnan(ymv)) continue;
    months.push_back(static_cast<int>(ymv));
    for (size_t k = 0; k < raw_names.size(); ++k) {
      const int c = col[raw_names[k]];
      raw[k].push_back(c < static_cast<int>(cells.size()) ? parse_cell(cells[c]) : kNaN);
    }
  }
  const int T0 = static_cast<int>(months.size());
  if (T0 < 3) throw SchemaError("data file has too few rows");
  for (int t = 1; t < T0; ++t)
    if (months[t] != next_month(months[t - 1]))
      throw ValidationError("dates must be strictly increasing monthly with no gaps");

  // impute interior gaps by carrying the last observation forward
  int first_complete = 0;
  for (size_t k = 1; k < raw_names.size(); ++k) {
    int first = -1;
    for (int t = 0; t < T0; ++t) {
      if (!std::isnan(raw[k][t])) {
        if (first < 0) first = t;
      } else if (first >= 0 && t > first) {
        raw[k][t] = raw[k][t - 1];
      }
    }
    if (first < 0) throw SchemaError("column " + raw_names[k] + " has no data");
    first_complete = std::max(first_complete, first);
  }

  auto r = [&](const std::string& name) -> const std::vector<double>& {
    for (size_t k = 0; k < raw_names.size(); ++k)
      if (raw_names[k] == name) return raw[k];
    throw SchemaError("internal: unknown raw column " + name);
  };

  std::vector<double> excess(T0, kNaN);
  for (int t = 0; t < T0; ++t) excess[t] = r("CRSP_SPvw")[t] - r("Rfree")[t];

  const std::vector<std::string> macro = {"dp",  "dy",  "ep",  "de",  "svar", "bm",  "ntis",
                                          "tbl", "lty", "ltr", "tms", "dfy",  "dfr", "infl"};
  const int n_macro = static_cast<int>(macro.size());
  Eigen::MatrixXd pred0(T0, n_macro + return_lags);
  pred0.setConstant(kNaN);
  for (int t = 0; t < T0; ++t) {
    pred0(t, 0) = std::log(r("D12")[t]) - std::log(r("Index")[t]);
    pred0(t, 1) = t > 0 ? std::log(r("D12")[t]) - std::log(r("Index")[t - 1]) : kNaN;
    pred0(t, 2) = std::log(r("E12")[t]) - std::log(r("Index")[t]);
    pred0(t, 3) = std::log(r("D12")[t]) - std::log(r("E12")[t]);
    pred0(t, 4) = r("svar")[t];
    pred0(t, 5) = r("b/m")[t];
    pred0(t, 6) = r("ntis")[t];
    pred0(t, 7) = r("tbl")[t];
    pred0(t, 8) = r("lty")[t];
    pred0(t, 9) = r("ltr")[t];
    pred0(t, 10) = r("lty")[t] - r("tbl")[t];
    pred0(t, 11) = r("BAA")[t] - r("AAA")[t];
    pred0(t, 12) = r("corpr")[t] - r("ltr")[t];
    pred0(t, 13) = r("infl")[t];
    for (int l = 1; l <= return_lags; ++l)
      if (t - l + 1 >= 1) pred0(t, n_macro + l - 1) = excess[t - l + 1];
  }
  // mr_l at row t is the excess return of month t-l+1, i.e. mr_1 is the
  // current month's return, known at the end of month t.

  int start = std::max(first_complete, std::max(1, return_lags));
  while (start < T0 && (!pred0.row(start).allFinite() || std::isnan(excess[start]))) ++start;
  if (T0 - start < 3) throw SchemaError("not enough complete rows after imputation");

  MacroPanel panel;
  panel.predictor_names = macro;
  for (int l = 1; l <= return_lags; ++l)
    panel.predictor_names.push_back("mr_" + std::to_string(l));
  const int T = T0 - start;
  panel.yyyymm.assign(months.begin() + start, months.end());
  panel.predictors = pred0.middleRows(start, T);
  panel.excess_return.resize(T);
  for (int t = 0; t < T; ++t) panel.excess_return(t) = excess[start + t];
  if (!panel.predictors.allFinite())
    throw SchemaError("predictors still contain gaps after imputation");
  return panel;
}

Standardizer::Standardizer(const MacroPanel& panel, int burn_in, int n_predictors)
    : panel_(&panel), burn_in_(burn_in) {
  n_pred_ = n_predictors > 0 ? n_predictors : static_cast<int>(panel.predictors.cols());
  if (n_pred_ > panel.predictors.cols())
    throw ValidationError("standardizer: more predictors requested than available");
  if (burn_in_ < 2) throw ValidationError("standardizer: burn-in must be >= 2");
  const int T = panel.rows();
  mean_.resize(T, n_pred_);
  scale_.resize(T, n_pred_);
  for (int j = 0; j < n_pred_; ++j) {
    double m = 0.0, m2 = 0.0;
    for (int t = 0; t < T; ++t) {
      const double x = panel.predictors(t, j);
      const double d = x - m;
      m += d / (t + 1);
      m2 += d * (x - m);
      mean_(t, j) = m;
      const double var = t > 0 ? m2 / t : 0.0;
      scale_(t, j) = var > 1e-24 ? std::sqrt(var) : 1.0;  // zero-variance fallback
    }
  }
}

Eigen::VectorXd Standardizer::at(int t) const {
  if (t < first_valid_row())
    throw DomainError("standardize: fewer than burn-in months of history");
  Eigen::VectorXd g(n_pred_);
  for (int j = 0; j < n_pred_; ++j)
    g(j) = (panel_->predictors(t, j) - mean_(t, j)) / scale_(t, j);
  return g;
}

Eigen::MatrixXd rff_weights(int p, int d, std::uint64_t seed, std::uint64_t draw_index) {
  if (p < 2 || p % 2 != 0) throw ValidationError("rff: p must be even and >= 2");
  CounterRng rng(seed, 0x52464657ULL /* "RFFW" */, draw_index);
  Eigen::MatrixXd W(p / 2, d);
  for (int i = 0; i < p / 2; ++i)
    for (int j = 0; j < d; ++j) W(i, j) = rng.next_normal();
  return W;
}

Eigen::VectorXd rff(const Eigen::VectorXd& g_std, double gamma, const Eigen::MatrixXd& weights) {
  if (weights.cols() != g_std.size()) throw ValidationError("rff: weight dimension mismatch");
  const int half = static_cast<int>(weights.rows());
  const double scale = 1.0 / std::sqrt(2.0 * half);
  const Eigen::VectorXd proj = gamma * (weights * g_std);
  Eigen::VectorXd s(2 * half);
  for (int i = 0; i < half; ++i) {
    s(2 * i) = std::sin(proj(i)) * scale;
    s(2 * i + 1) = std::cos(proj(i)) * scale;
  }
  return s;
}

std::vector<PeriodDef> default_periods() {
  return {{"1930-1944", 193001, 194412}, {"1945-1959", 194501, 195912},
          {"1960-1974", 196001, 197412}, {"1975-1989", 197501, 198912},
          {"1990-2004", 199001, 200412}, {"2005-2019", 200501, 201912}};
}

void BacktestConfig::validate() const {
  if (window < 2) throw ValidationError("backtest: window must be >= 2");
  if (p < 2 || p % 2 != 0) throw ValidationError("backtest: p must be even and >= 2");
  if (rff_draws < 1) throw ValidationError("backtest: need at least one draw");
  if (burn_in < 2) throw ValidationError("backtest: burn-in must be >= 2");
  for (double z : zs)
    if (z < 0.0) throw ValidationError("backtest: z must be >= 0");
}

std::vector<double> BacktestConfig::gamma_grid() const {
  if (!gammas.empty()) return gammas;
  std::vector<double> g;
  for (int i = 1; i <= 50; ++i) g.push_back(0.1 * i);
  return g;
}

namespace {

// Shared rolling engine. features(t) must be valid for all t >= first_row.
// Decisions run for t in [first_row + window, T - 2]; the return of month
// t + 1 is position_t * label(t + 1).
struct RollingPlan {
  int first_decision = 0;
  int T = 0;
  std::vector<int> months;  // return months
};

RollingPlan make_plan(const MacroPanel& panel, int first_row, int window) {
  RollingPlan plan;
  plan.T = panel.rows();
  plan.first_decision = first_row + window;
  if (plan.first_decision > plan.T - 2)
    throw ValidationError("backtest: panel too short for the window and burn-in");
  for (int t = plan.first_decision; t <= plan.T - 2; ++t)
    plan.months.push_back(panel.yyyymm[t + 1]);
  return plan;
}

// positions over all decision months for one feature matrix and one z;
// labels[tau] is consumed for window rows tau in [t-window+1, t]
std::vector<double> rolling_positions(const Eigen::MatrixXd& F, const Eigen::VectorXd& labels,
                                      const RollingPlan& plan, int window, double z,
                                      int start_decision) {
  const double n = static_cast<double>(window);
  std::vector<double> pos;
  pos.reserve(plan.T - start_decision - 1);
  for (int t = start_decision; t <= plan.T - 2; ++t) {
    const auto A = F.middleRows(t - window, window);
    const Eigen::VectorXd y = labels.segment(t - window + 1, window);
    Eigen::MatrixXd K = A * A.transpose() / n;
    Eigen::VectorXd alpha;
    if (z > 0.0) {
      K.diagonal().array() += z;
      alpha = Eigen::LLT<Eigen::MatrixXd>(K).solve(y);
    } else {
      alpha = Eigen::LDLT<Eigen::MatrixXd>(K).solve(y);
    }
    const Eigen::VectorXd w = A * F.row(t).transpose();
    pos.push_back(alpha.dot(w) / n);
  }
  return pos;
}

}  // namespace

std::vector<double> match_moments(const std::vector<double>& series, double target_mean,
                                  double target_std) {
  if (series.size() < 2) throw DomainError("match_moments: need at least two points");
  double m = 0.0;
  for (double v : series) m += v;
  m /= series.size();
  double ss = 0.0;
  for (double v : series) ss += (v - m) * (v - m);
  const double sd = std::sqrt(ss / (series.size() - 1));
  if (!(sd > 0.0)) throw DomainError("match_moments: zero variance in the source series");
  std::vector<double> out(series.size());
  for (size_t i = 0; i < series.size(); ++i)
    out[i] = (series[i] - m) / sd * target_std + target_mean;
  return out;
}

BacktestResult timing_backtest(const MacroPanel& panel, const BacktestConfig& config) {
  config.validate();
  const int d = 15;  // 14 macro indicators + one lagged return
  if (panel.predictors.cols() < d)
    throw ValidationError("backtest: panel must carry at least 15 predictors");
  const Standardizer std_(panel, config.burn_in, d);
  const RollingPlan plan = make_plan(panel, std_.first_valid_row(), config.window);
  const std::vector<double> gammas = config.gamma_grid();
  const int T = plan.T;
  const int n_months = static_cast<int>(plan.months.size());
  const int cf_start = plan.first_decision + config.window;  // needs window cf labels
  const int n_cf_months = config.counterfactual ? T - 1 - cf_start : 0;

  // standardized predictors, rows < first_valid_row stay zero and unused
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(T, d);
  for (int t = std_.first_valid_row(); t < T; ++t) G.row(t) = std_.at(t).transpose();
  const Eigen::VectorXd& R = panel.excess_return;

  const size_t ng = gammas.size(), nz = config.zs.size();
  auto zero_series = [&](int len) {
    return std::vector<std::vector<std::vector<double>>>(
        ng, std::vector<std::vector<double>>(nz, std::vector<double>(len, 0.0)));
  };

  const int chunks = std::min<int>(32, config.rff_draws);
  const int threads = effective_threads(config.threads);
  std::vector<std::vector<std::vector<std::vector<double>>>> chunk_sums(chunks);
  std::vector<std::vector<std::vector<std::vector<double>>>> chunk_cf_sums(chunks);

  parallel_chunks(chunks, threads, [&](int chunk) {
    const int lo = static_cast<int>(static_cast<std::int64_t>(config.rff_draws) * chunk / chunks);
    const int hi =
        static_cast<int>(static_cast<std::int64_t>(config.rff_draws) * (chunk + 1) / chunks);
    auto local = zero_series(n_months);
    auto local_cf = zero_series(std::max(0, n_cf_months));
    Eigen::MatrixXd F(T, config.p);
    for (int draw = lo; draw < hi; ++draw) {
      const Eigen::MatrixXd W = rff_weights(config.p, d, config.seed, draw);
      const Eigen::MatrixXd proj = G * W.transpose();  // T x p/2
      const double scale = 1.0 / std::sqrt(static_cast<double>(config.p));
      for (size_t gi = 0; gi < ng; ++gi) {
        const double gamma = gammas[gi];
        for (int t = 0; t < T; ++t) {
          for (int i = 0; i < config.p / 2; ++i) {
            const double a = gamma * proj(t, i);
            F(t, 2 * i) = std::sin(a) * scale;
            F(t, 2 * i + 1) = std::cos(a) * scale;
          }
        }
        for (size_t zi = 0; zi < nz; ++zi) {
          const std::vector<double> pos =
              rolling_positions(F, R, plan, config.window, config.zs[zi], plan.first_decision);
          for (int m = 0; m < n_months; ++m)
            local[gi][zi][m] += pos[m] * R(plan.first_decision + 1 + m);
        }
        if (config.counterfactual && n_cf_months > 0) {
          // counterfactual labels: the min-norm model's own prediction,
          // rescaled to the realized mean/std over the same months
          const std::vector<double> fitted =
              rolling_positions(F, R, plan, config.window, 0.0, plan.first_decision);
          double rm = 0.0, rs = 0.0;
          for (int m = 0; m < n_months; ++m) rm += R(plan.first_decision + 1 + m);
          rm /= n_months;
          for (int m = 0; m < n_months; ++m) {
            const double dlt = R(plan.first_decision + 1 + m) - rm;
            rs += dlt * dlt;
          }
          rs = std::sqrt(rs / (n_months - 1));
          const std::vector<double> cf_labels = match_moments(fitted, rm, rs);
          Eigen::VectorXd Rcf = Eigen::VectorXd::Zero(T);
          for (int m = 0; m < n_months; ++m) Rcf(plan.first_decision + 1 + m) = cf_labels[m];
          for (size_t zi = 0; zi < nz; ++zi) {
            const std::vector<double> cf_pos =
                rolling_positions(F, Rcf, plan, config.window, config.zs[zi], cf_start);
            for (int m = 0; m < n_cf_months; ++m)
              local_cf[gi][zi][m] += cf_pos[m] * Rcf(cf_start + 1 + m);
          }
        }
      }
    }
    chunk_sums[chunk] = std::move(local);
    if (config.counterfactual) chunk_cf_sums[chunk] = std::move(local_cf);
  });

  BacktestResult result;
  result.months = plan.months;
  result.gammas = gammas;
  result.zs = config.zs;
  result.series.assign(ng, std::vector<std::vector<double>>(nz, std::vector<double>(n_months)));
  for (size_t gi = 0; gi < ng; ++gi)
    for (size_t zi = 0; zi < nz; ++zi)
      for (int m = 0; m < n_months; ++m) {
        double s = 0.0;
        for (int c = 0; c < chunks; ++c) s += chunk_sums[c][gi][zi][m];
        result.series[gi][zi][m] = s / config.rff_draws;
      }
  if (config.counterfactual && n_cf_months > 0) {
    result.cf_series.assign(ng,
                            std::vector<std::vector<double>>(nz, std::vector<double>(n_cf_months)));
    for (size_t gi = 0; gi < ng; ++gi)
      for (size_t zi = 0; zi < nz; ++zi)
        for (int m = 0; m < n_cf_months; ++m)
          result.cf_series[gi][zi][m] = sum_cf[gi][zi][m] / config.rff_draws;
  }

  const std::vector<PeriodMask> masks = build_masks(result.months, config.periods);
  const int cf_offset = cf_start - plan.first_decision;  // cf month m maps to real m + offset
  for (const auto& mask : masks) {
    for (size_t gi = 0; gi < ng; ++gi)
      for (size_t zi = 0; zi < nz; ++zi) {
        PeriodAggregate agg;
        agg.period = mask.label;
        agg.gamma = gammas[gi];
        agg.z = config.zs[zi];
        agg.months = static_cast<int>(mask.idx.size());
        agg.mean_return = mean_of(result.series[gi][zi], mask.idx);
        agg.sharpe = sharpe_of(result.series[gi][zi], mask.idx);
        if (config.counterfactual && n_cf_months > 0) {
          // compare real and counterfactual over the common months
          std::vector<int> cf_idx, real_idx;
          for (int i : mask.idx)
            if (i >= cf_offset) {
              cf_idx.push_back(i - cf_offset);
              real_idx.push_back(i);
            }
          if (!cf_idx.empty()) {
            agg.cf_mean_return = mean_of(result.cf_series[gi][zi], cf_idx);
            agg.mean_return = mean_of(result.series[gi][zi], real_idx);
            agg.months = static_cast<int>(real_idx.size());
          }
        }
        result.aggregates.push_back(std::move(agg));
      }
  }
  return result;
}

BacktestResult linear_backtest(const MacroPanel& panel, const BacktestConfig& config) {
  const int d = 15;
  if (panel.predictors.cols() < d)
    throw ValidationError("backtest: panel must carry at least 15 predictors");
  const Standardizer std_(panel, config.burn_in, d);
  const RollingPlan plan = make_plan(panel, std_.first_valid_row(), config.window);
  const int T = plan.T;
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(T, d);
  for (int t = std_.first_valid_row(); t < T; ++t) G.row(t) = std_.at(t).transpose();

  BacktestResult result;
  result.months = plan.months;
  result.gammas = {kNaN};
  result.zs = config.zs;
  const int n_months = static_cast<int>(plan.months.size());
  result.series.assign(1, std::vector<std::vector<double>>(config.zs.size(),
                                                           std::vector<double>(n_months)));
  for (size_t zi = 0; zi < config.zs.size(); ++zi) {
    const std::vector<double> pos = rolling_positions(G, panel.excess_return, plan, config.window,
                                                      config.zs[zi], plan.first_decision);
    for (int m = 0; m < n_months; ++m)
      result.series[0][zi][m] = pos[m] * panel.excess_return(plan.first_decision + 1 + m);
  }
  const std::vector<PeriodMask> masks = build_masks(result.months, config.periods);
  for (const auto& mask : masks)
    for (size_t zi = 0; zi < config.zs.size(); ++zi) {
      PeriodAggregate agg;
      agg.period = mask.label;
      agg.gamma = kNaN;
      agg.z = config.zs[zi];
      agg.months = static_cast<int>(mask.idx.size());
      agg.mean_return = mean_of(result.series[0][zi], mask.idx);
      agg.sharpe = sharpe_of(result.series[0][zi], mask.idx);
      result.aggregates.push_back(std::move(agg));
    }
  return result;
}

const std::vector<double>& BacktestResult::series_at(double gamma, double z) const {
  for (size_t gi = 0; gi < gammas.size(); ++gi)
    for (size_t zi = 0; zi < zs.size(); ++zi)
      if ((gammas[gi] == gamma || (std::isnan(gamma) && std::isnan(gammas[gi]))) && zs[zi] == z)
        return series[gi][zi];
  throw ValidationError("series_at: no such (gamma, z) pair");
}

std::vector<SchemeRow> bandwidth_schemes(const BacktestResult& rff_result,
                                         const BacktestResult& linear_result) {
  std::vector<SchemeRow> rows;
  // ordered period labels, "full" excluded from the chaining
  std::vector<std::string> period_labels;
  for (const auto& a : rff_result.aggregates)
    if (a.period != "full" &&
        std::find(period_labels.begin(), period_labels.end(), a.period) == period_labels.end())
      period_labels.push_back(a.period);

  auto agg_value = [&](const BacktestResult& res, const std::string& period, double gamma,
                       double z, int* months = nullptr) {
    for (const auto& a : res.aggregates)
      if (a.period == period && a.z == z &&
          (a.gamma == gamma || (std::isnan(gamma) && std::isnan(a.gamma)))) {
        if (months) *months = a.months;
        return a.mean_return;
      }
    return kNaN;
  };

  for (double z : rff_result.zs) {
    // linear rows
    for (const auto& period : period_labels)
      rows.push_back({period, "linear", z, agg_value(linear_result, period, kNaN, z)});
    rows.push_back({"full", "linear", z, agg_value(linear_result, "full", kNaN, z)});

    // per-period best gamma (hindsight) and previous-period best (feasible)
    std::vector<double> best_gamma(period_labels.size(), kNaN);
    std::vector<double> hindsight(period_labels.size(), kNaN);
    std::vector<double> feasible(period_labels.size(), kNaN);
    std::vector<int> month_count(period_labels.size(), 0);
    for (size_t pi = 0; pi < period_labels.size(); ++pi) {
      double best = -std::numeric_limits<double>::infinity();
      for (double g : rff_result.gammas) {
        const double v = agg_value(rff_result, period_labels[pi], g, z, &month_count[pi]);
        if (v > best) {
          best = v;
          best_gamma[pi] = g;
        }
      }
      hindsight[pi] = best;
    }
    for (size_t pi = 0; pi < period_labels.size(); ++pi) {
      if (pi == 0) {
        // no prior period: average over the gamma grid
        double s = 0.0;
        for (double g : rff_result.gammas)
          s += agg_value(rff_result, period_labels[pi], g, z, nullptr);
        feasible[pi] = s / rff_result.gammas.size();
      } else {
        feasible[pi] = agg_value(rff_result, period_labels[pi], best_gamma[pi - 1], z, nullptr);
      }
      rows.push_back({period_labels[pi], "feasible", z, feasible[pi]});
      rows.push_back({period_labels[pi], "hindsight", z, hindsight[pi]});
    }
    // full-sample rows: month-weighted average of the per-period selections
    double wf = 0.0, wh = 0.0;
    int total = 0;
    for (size_t pi = 0; pi < period_labels.size(); ++pi) {
      wf += feasible[pi] * month_count[pi];
      wh += hindsight[pi] * month_count[pi];
      total += month_count[pi];
    }
    rows.push_back({"full", "feasible", z, total ? wf / total : kNaN});
    rows.push_back({"full", "hindsight", z, total ? wh / total : kNaN});
  }
  return rows;
}

RollingBetas rolling_betas(const MacroPanel& panel, const RollingBetasConfig& config) {
  const int n_macro = 14;
  std::vector<int> cols;
  std::vector<std::string> names;
  for (int j = 0; j < n_macro; ++j) {
    const std::string& nm = panel.predictor_names[j];
    if (std::find(config.exclusions.begin(), config.exclusions.end(), nm) ==
        config.exclusions.end()) {
      cols.push_back(j);
      names.push_back(nm);
    }
  }
  for (int l = 1; l <= config.return_lags; ++l) {
    const std::string nm = "mr_" + std::to_string(l);
    const auto it =
        std::find(panel.predictor_names.begin(), panel.predictor_names.end(), nm);
    if (it == panel.predictor_names.end())
      throw ValidationError("rolling_betas: panel lacks lagged return " + nm);
    cols.push_back(static_cast<int>(it - panel.predictor_names.begin()));
    names.push_back(nm);
  }

  const Standardizer std_(panel, config.burn_in);
  const int T = panel.rows();
  const int k = static_cast<int>(cols.size());
  RollingBetas out;
  out.names = names;
  const int first_t = std_.first_valid_row() + config.window;
  if (first_t > T - 1) throw ValidationError("rolling_betas: panel shorter than the window");

  std::vector<Eigen::VectorXd> paths;
  for (int t = first_t; t <= T - 2; ++t) {
    Eigen::MatrixXd X(config.window, k + 1);
    Eigen::VectorXd y(config.window);
    for (int i = 0; i < config.window; ++i) {
      const int tau = t - config.window + i;
      const Eigen::VectorXd g = std_.at(tau);
      X(i, 0) = 1.0;
      for (int j = 0; j < k; ++j) X(i, j + 1) = g(cols[j]);
      y(i) = panel.excess_return(tau + 1);
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    Eigen::VectorXd beta;
    if (qr.rank() < k + 1) {
      Eigen::MatrixXd Gm = X.transpose() * X;
      Gm.diagonal().array() += 1e-8 * config.window;
      beta = Eigen::LDLT<Eigen::MatrixXd>(Gm).solve(X.transpose() * y);
      out.ridge_fallback_months.push_back(panel.yyyymm[t]);
    } else {
      beta = qr.solve(y);
    }
    out.months.push_back(panel.yyyymm[t]);
    paths.push_back(beta.tail(k));
  }
  out.coefficients.resize(static_cast<int>(paths.size()), k);
  for (size_t i = 0; i < paths.size(); ++i) out.coefficients.row(static_cast<int>(i)) = paths[i];
  return out;
}

// ---------------------------------------------------------------------------
// writers

void BacktestResult::write_expret_csv(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw SchemaError("cannot open " + path + " for writing");
  os << "period,gamma,z,mean_monthly_return\n";
  for (const auto& a : aggregates)
    os << a.period << ',' << fmt(a.gamma) << ',' << fmt(a.z) << ',' << fmt(a.mean_return) << '\n';
}

void BacktestResult::write_sharpe_csv(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw SchemaError("cannot open " + path + " for writing");
  os << "period,gamma,z,annualized_sharpe\n";
  for (const auto& a : aggregates)
    os << a.period << ',' << fmt(a.gamma) << ',' << fmt(a.z) << ',' << fmt(a.sharpe) << '\n';
}

void BacktestResult::write_counterfactual_csv(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw SchemaError("cannot open " + path + " for writing");
  os << "period,gamma,z,real_return,cf_return\n";
  for (const auto& a : aggregates)
    os << a.period << ',' << fmt(a.gamma) << ',' << fmt(a.z) << ',' << fmt(a.mean_return) << ','
       << fmt(a.cf_mean_return) << '\n';
}

void write_table2_csv(const std::vector<SchemeRow>& rows, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw SchemaError("cannot open " + path + " for writing");
  os << "period,scheme,z,return\n";
  for (const auto& r : rows)
    os << r.period << ',' << r.scheme << ',' << fmt(r.z) << ',' << fmt(r.value) << '\n';
}

void write_betas_csv(const RollingBetas& betas, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw SchemaError("cannot open " + path + " for writing");
  os << "date,predictor,coefficient\n";
  for (size_t i = 0; i < betas.months.size(); ++i)
    for (size_t j = 0; j < betas.names.size(); ++j)
      os << betas.months[i] << ',' << betas.names[j] << ','
         << fmt(betas.coefficients(static_cast<int>(i), static_cast<int>(j))) << '\n';
}

}  // namespace driftmt
