#include "driftmt/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "driftmt/dgp.hpp"
#include "driftmt/errors.hpp"
#include "driftmt/theory.hpp"

namespace driftmt {

namespace {

int effective_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

// Runs fn(chunk) for chunk = 0..chunks-1 on a small worker pool. Results must
// be stored per chunk by the callback so the final reduction is order-fixed.
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
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

struct ChunkStats {
  double sum = 0.0;
  double sumsq = 0.0;
  std::int64_t count = 0;
};

// Kahan-compensated accumulation inside a chunk
struct Accum {
  double sum = 0.0, csum = 0.0;
  double sumsq = 0.0, csumsq = 0.0;
  std::int64_t count = 0;

  void add(double x) {
    double y = x - csum;
    double t = sum + y;
    csum = (t - sum) - y;
    sum = t;
    y = x * x - csumsq;
    t = sumsq + y;
    csumsq = (t - sumsq) - y;
    sumsq = t;
    ++count;
  }
  ChunkStats stats() const { return {sum, sumsq, count}; }
};

// Evaluates the realized strategy return of one draw for every z in zs.
// Shares the Gram matrix across z values; z = 0 means the min-norm fit.
void draw_returns(const DgpSampler& sampler, const std::vector<double>& zs,
                  std::uint64_t draw_index, SampleDraw& buf, std::vector<double>& out) {
  sampler.draw_into(draw_index, buf);
  const int n = sampler.spec().n, p = sampler.spec().p;
  const double nd = static_cast<double>(n);
  out.resize(zs.size());
  if (p <= n) {
    const Eigen::MatrixXd G = buf.X.transpose() * buf.X;
    const Eigen::VectorXd rhs = buf.X.transpose() * buf.y;
    for (size_t i = 0; i < zs.size(); ++i) {
      Eigen::VectorXd beta;
      if (zs[i] > 0.0) {
        Eigen::MatrixXd Gz = G;
        Gz.diagonal().array() += nd * zs[i];
        beta = Eigen::LLT<Eigen::MatrixXd>(Gz).solve(rhs);
      } else {
        beta = Eigen::LDLT<Eigen::MatrixXd>(G).solve(rhs);
      }
      out[i] = beta.dot(buf.x_next) * buf.r_next;
    }
  } else {
    const Eigen::MatrixXd G = buf.X * buf.X.transpose();
    const Eigen::VectorXd v = buf.X * buf.x_next;  // position = alpha' v
    for (size_t i = 0; i < zs.size(); ++i) {
      Eigen::VectorXd alpha;
      if (zs[i] > 0.0) {
        Eigen::MatrixXd Gz = G;
        Gz.diagonal().array() += nd * zs[i];
        alpha = Eigen::LLT<Eigen::MatrixXd>(Gz).solve(buf.y);
      } else {
        alpha = Eigen::LDLT<Eigen::MatrixXd>(G).solve(buf.y);
      }
      out[i] = alpha.dot(v) * buf.r_next;
    }
  }
}

std::vector<double> default_k(Protocol p) {
  switch (p) {
    case Protocol::S3Proportional:
    case Protocol::AppendixAr:
      return {0.2, 0.4, 0.6, 0.8, 1.0};
    case Protocol::S3Concentrated:
    case Protocol::AppendixArConcentrated:
      return {1.0, 2.0, 3.0, 4.0, 5.0};
  }
  return {};
}

bool is_concentrated(Protocol p) {
  return p == Protocol::S3Concentrated || p == Protocol::AppendixArConcentrated;
}

bool is_autoregressive(Protocol p) {
  return p == Protocol::AppendixAr || p == Protocol::AppendixArConcentrated;
}

}  // namespace

const char* protocol_name(Protocol p) {
  switch (p) {
    case Protocol::S3Proportional: return "s3-proportional";
    case Protocol::S3Concentrated: return "s3-concentrated";
    case Protocol::AppendixAr: return "appendix-ar";
    case Protocol::AppendixArConcentrated: return "appendix-ar-concentrated";
  }
  return "unknown";
}

void ExperimentGrid::validate() const {
  if (n <= 0) throw ValidationError("grid: n must be positive");
  if (draws < 1) throw ValidationError("grid: draw count must be >= 1");
  if (panels.empty()) throw ValidationError("grid: no panels");
  if (z_values.empty()) throw ValidationError("grid: no z values");
  for (double k : k_values)
    if (!std::isfinite(k)) throw ValidationError("grid: non-finite k value");
  for (const auto& pn : panels)
    if (pn.p <= 0 || pn.q < 0) throw ValidationError("grid: bad panel dimensions");
}

DriftGeometry proportional_geometry(int p, int q, double k) {
  DriftGeometry g;
  g.beta_is = Eigen::VectorXd::Constant(p, 1.0 / std::sqrt(static_cast<double>(p)));
  g.beta_oos = k * g.beta_is;
  if (q > 0) {
    g.theta_is = Eigen::VectorXd::Constant(q, 1.0 / std::sqrt(static_cast<double>(q)));
    g.theta_oos = k * g.theta_is;
  }
  return g;
}

Eigen::VectorXd concentrated_vector(int p, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw ValidationError("concentrated_vector: fraction must be in (0,1]");
  const long top = std::lround(fraction * p);
  if (top < 1) throw ValidationError("concentrated_vector: p too small for the fraction");
  Eigen::VectorXd v(p);
  for (int i = 0; i < p; ++i) v(i) = i < top ? 1.0 : 0.1;
  return v / v.norm();
}

DriftGeometry concentrated_geometry(int p, int q, double fraction) {
  DriftGeometry g;
  g.beta_is = concentrated_vector(p, 0.5);
  g.beta_oos = concentrated_vector(p, fraction);
  if (q > 0) {
    g.theta_is = concentrated_vector(q, 0.5);
    g.theta_oos = concentrated_vector(q, fraction);
  }
  return g;
}

ModelSpec grid_model(const ExperimentGrid& grid, const PanelSpec& panel, double k) {
  ModelSpec spec;
  spec.n = grid.n;
  spec.p = panel.p;
  spec.q = panel.q;
  if (is_autoregressive(grid.protocol)) {
    spec.sigma_x = CovarianceSpec::autoregressive(panel.p, 0.9);
    if (panel.q > 0) spec.sigma_w = CovarianceSpec::autoregressive(panel.q, 0.9);
    spec.coupling = Coupling::SharedLatent;
  } else {
    spec.sigma_x = CovarianceSpec::identity(panel.p);
    if (panel.q > 0) spec.sigma_w = CovarianceSpec::identity(panel.q);
    spec.coupling = Coupling::Independent;
  }
  spec.geometry = is_concentrated(grid.protocol)
                      ? concentrated_geometry(panel.p, panel.q, 0.5 / k)
                      : proportional_geometry(panel.p, panel.q, k);
  spec.latent_law = LatentLaw::Gaussian;
  spec.m4 = 3.0;
  // stream the seed by grid point so points are independent
  spec.seed = grid.seed * 0x100000001b3ULL + static_cast<std::uint64_t>(panel.p) * 1315423911ULL +
              static_cast<std::uint64_t>(std::llround(k * 1024.0));
  return spec;
}

SimulationResult run_grid(const ExperimentGrid& grid) {
  grid.validate();
  const std::vector<double> ks = grid.k_values.empty() ? default_k(grid.protocol) : grid.k_values;
  const int threads = effective_threads(grid.threads);
  const int chunks = std::max(1, grid.batches);

  SimulationResult result;
  for (const auto& panel : grid.panels) {
    for (double k : ks) {
      const ModelSpec spec = grid_model(grid, panel, k);
      const DgpSampler sampler(spec);

      // chunked, order-fixed accumulation; chunk boundaries double as the
      // batches for the Sharpe error bars
      std::vector<std::vector<ChunkStats>> chunk_stats(
          grid.z_values.size(), std::vector<ChunkStats>(chunks));
      parallel_chunks(chunks, threads, [&](int chunk) {
        const std::int64_t lo = grid.draws * chunk / chunks;
        const std::int64_t hi = grid.draws * (chunk + 1) / chunks;
        std::vector<Accum> acc(grid.z_values.size());
        SampleDraw buf;
        std::vector<double> rets;
        for (std::int64_t d = lo; d < hi; ++d) {
          draw_returns(sampler, grid.z_values, static_cast<std::uint64_t>(d), buf, rets);
          for (size_t i = 0; i < rets.size(); ++i) acc[i].add(rets[i]);
        }
        for (size_t i = 0; i < acc.size(); ++i) chunk_stats[i][chunk] = acc[i].stats();
      });

      for (size_t zi = 0; zi < grid.z_values.size(); ++zi) {
        const double z = grid.z_values[zi];
        GridRow row;
        row.experiment = protocol_name(grid.protocol);
        row.k = k;
        row.z = z;
        row.n = grid.n;
        row.p = panel.p;
        row.q = panel.q;

        double sum = 0.0, sumsq = 0.0;
        std::int64_t cnt = 0;
        std::vector<double> batch_sharpe;
        batch_sharpe.reserve(chunks);
        for (const auto& cs : chunk_stats[zi]) {
          sum += cs.sum;
          sumsq += cs.sumsq;
          cnt += cs.count;
          if (cs.count > 1) {
            const double bm = cs.sum / cs.count;
            const double bv = cs.sumsq / cs.count - bm * bm;
            if (bv > 0.0) batch_sharpe.push_back(bm / std::sqrt(bv));
          }
        }
        const double mean = sum / cnt;
        const double var = std::max(0.0, sumsq / cnt - mean * mean);
        row.mc_mean = mean;
        row.mc_vol = std::sqrt(var);
        row.mc_se = row.mc_vol / std::sqrt(static_cast<double>(cnt));
        row.mc_sharpe = row.mc_vol > 0.0 ? mean / row.mc_vol : 0.0;
        if (batch_sharpe.size() > 1) {
          double bs = 0.0, bss = 0.0;
          for (double s : batch_sharpe) bs += s, bss += s * s;
          const double bmean = bs / batch_sharpe.size();
          const double bvar = std::max(0.0, bss / batch_sharpe.size() - bmean * bmean);
          row.mc_sharpe_se = std::sqrt(bvar / batch_sharpe.size());
        }

        try {
          StrategyMoments th;
          if (spec.coupling == Coupling::Independent && spec.sigma_x.is_identity())
            th = strategy_moments_iid(z, spec.cphi(), spec.geometry, spec.m4);
          else
            th = strategy_moments_general(z, spec);
          row.th_mean = th.mean;
          row.th_vol = std::sqrt(th.variance);
          row.th_sharpe = th.sharpe;
        } catch (const std::exception& e) {
          row.error = e.what();
          row.th_mean = row.th_vol = row.th_sharpe =
              std::numeric_limits<double>::quiet_NaN();
        }
        result.rows.push_back(std::move(row));
      }
    }
  }
  return result;
}

std::vector<ConvergenceRow> convergence_scan(const ConvergenceConfig& config) {
  if (config.n_values.empty()) throw ValidationError("convergence scan: no n values");
  const int threads = effective_threads(config.threads);
  std::vector<ConvergenceRow> rows;
  for (int n : config.n_values) {
    const int p = static_cast<int>(std::lround(config.cphi * n));
    const int q = static_cast<int>(std::lround(config.c * n)) - p;
    ModelSpec spec;
    spec.n = n;
    spec.p = p;
    spec.q = q;
    spec.sigma_x = CovarianceSpec::identity(p);
    if (q > 0) spec.sigma_w = CovarianceSpec::identity(q);
    spec.coupling = Coupling::Independent;
    spec.geometry = proportional_geometry(p, q, config.k);
    spec.seed = config.seed + static_cast<std::uint64_t>(n) * 7919ULL;
    const DgpSampler sampler(spec);

    const int chunks = 256;
    std::vector<ChunkStats> stats(chunks);
    parallel_chunks(chunks, threads, [&](int chunk) {
      const std::int64_t lo = config.draws * chunk / chunks;
      const std::int64_t hi = config.draws * (chunk + 1) / chunks;
      Accum acc;
      SampleDraw buf;
      const double nd = static_cast<double>(n);
      for (std::int64_t d = lo; d < hi; ++d) {
        sampler.draw_into(static_cast<std::uint64_t>(d), buf);
        // conditional expected return E[r | X, noise] = beta_hat' beta_oos
        double value;
        if (p <= n) {
          Eigen::MatrixXd G = buf.X.transpose() * buf.X;
          G.diagonal().array() += nd * config.z;
          const Eigen::VectorXd beta =
              Eigen::LLT<Eigen::MatrixXd>(G).solve(buf.X.transpose() * buf.y);
          value = beta.dot(spec.geometry.beta_oos);
        } else {
          Eigen::MatrixXd G = buf.X * buf.X.transpose();
          G.diagonal().array() += nd * config.z;
          const Eigen::VectorXd alpha = Eigen::LLT<Eigen::MatrixXd>(G).solve(buf.y);
          value = alpha.dot(buf.X * spec.geometry.beta_oos);
        }
        acc.add(value);
      }
      stats[chunk] = acc.stats();
    });

    double sum = 0.0, sumsq = 0.0;
    std::int64_t cnt = 0;
    for (const auto& cs : stats) sum += cs.sum, sumsq += cs.sumsq, cnt += cs.count;
    const double mean = sum / cnt;
    const double var = std::max(0.0, sumsq / cnt - mean * mean);

    ConvergenceRow row;
    row.n = n;
    row.p = p;
    row.q = q;
    row.z = config.z;
    row.th_mean = expected_return_iid(config.z, spec.cphi(), spec.geometry);
    row.mc_mean = mean;
    row.gap = std::abs(mean - row.th_mean);
    row.se = std::sqrt(var / cnt);
    row.draws = cnt;
    rows.push_back(row);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// output

namespace {

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

}  // namespace

void SimulationResult::write_csv(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw SchemaError("cannot open " + path + " for writing");
  os << "experiment,k,z,n,p,q,mc_mean,mc_se,mc_vol,mc_sharpe,th_mean,th_vol,th_sharpe\n";
  for (const auto& r : rows) {
    os << r.experiment << ',' << fmt(r.k) << ',' << fmt(r.z) << ',' << r.n << ',' << r.p << ','
       << r.q << ',' << fmt(r.mc_mean) << ',' << fmt(r.mc_se) << ',' << fmt(r.mc_vol) << ','
       << fmt(r.mc_sharpe) << ',' << fmt(r.th_mean) << ',' << fmt(r.th_vol) << ','
       << fmt(r.th_sharpe) << '\n';
  }
}

void SimulationResult::write_json(const std::string& path) const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rows) {
    arr.push_back({{"experiment", r.experiment},
                   {"k", r.k},
                   {"z", r.z},
                   {"n", r.n},
                   {"p", r.p},
                   {"q", r.q},
                   {"mc_mean", r.mc_mean},
                   {"mc_se", r.mc_se},
                   {"mc_vol", r.mc_vol},
                   {"mc_sharpe", r.mc_sharpe},
                   {"th_mean", std::isnan(r.th_mean) ? nlohmann::json() : nlohmann::json(r.th_mean)},
                   {"th_vol", std::isnan(r.th_vol) ? nlohmann::json() : nlohmann::json(r.th_vol)},
                   {"th_sharpe",
                    std::isnan(r.th_sharpe) ? nlohmann::json() : nlohmann::json(r.th_sharpe)}});
  }
  std::ofstream os(path);
  if (!os) throw SchemaError("cannot open " + path + " for writing");
  os << arr.dump(2) << '\n';
}

void write_convergence_csv(const std::vector<ConvergenceRow>& rows, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw SchemaError("cannot open " + path + " for writing");
  os << "n,p,q,z,th_mean,mc_mean,gap,se,draws\n";
  for (const auto& r : rows) {
    os << r.n << ',' << r.p << ',' << r.q << ',' << fmt(r.z) << ',' << fmt(r.th_mean) << ','
       << fmt(r.mc_mean) << ',' << fmt(r.gap) << ',' << fmt(r.se) << ',' << r.draws << '\n';
  }
}

}  // namespace driftmt
