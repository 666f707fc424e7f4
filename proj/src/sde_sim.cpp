#include "covsteer/sde_sim.hpp"

#include "covsteer/errors.hpp"
#include "covsteer/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

namespace covsteer {

namespace {

void add_coeffs(std::vector<double>& into, const std::vector<double>& c, double scale) {
  if (into.size() < c.size()) into.resize(c.size(), 0.0);
  for (std::size_t k = 0; k < c.size(); ++k) into[k] += scale * c[k];
}

void check_component(const NoiseComponent& c, int q, bool additive) {
  if (c.rate.rows() != 1 || c.rate.cols() != 1) throw DimensionError("noise rate must be a 1x1 polynomial");
  if (additive && (c.channel < 0 || c.channel >= q)) throw DimensionError("noise channel index out of range");
  if (c.kind == NoiseKind::compound_poisson && !(c.jump_std >= 0.0)) throw PreconditionError("jump_std must be >= 0");
  for (double t : uniform_grid(kValidationGrid)) {
    if (c.rate(t)(0, 0) < kSemidefiniteFloor) throw PreconditionError("noise rate negative at t=" + format_double(t));
  }
}

double contribution_scale(const NoiseComponent& c) {
  return c.kind == NoiseKind::wiener ? 1.0 : c.jump_std * c.jump_std;
}

double horner(const std::vector<double>& c, double t) {
  double v = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) v = v * t + *it;
  return v;
}

}  // namespace

Intensities derive_intensities(const NoiseModel& noise) {
  if (noise.q <= 0) throw DimensionError("noise model needs q >= 1 additive channels");
  std::vector<std::vector<double>> d(noise.q * noise.q, std::vector<double>{0.0});
  for (const auto& c : noise.additive) {
    check_component(c, noise.q, true);
    add_coeffs(d[c.channel * noise.q + c.channel], c.rate.entry(0, 0), contribution_scale(c));
  }
  std::vector<double> nu{0.0};
  for (const auto& c : noise.multiplicative) {
    check_component(c, noise.q, false);
    add_coeffs(nu, c.rate.entry(0, 0), 0.5 * contribution_scale(c));
  }
  return {MatrixPoly(noise.q, noise.q, std::move(d)), MatrixPoly::scalar(std::move(nu))};
}

Matrix GainSchedule::operator()(double t) const {
  if (times.empty()) throw PreconditionError("empty gain schedule");
  if (t <= times.front()) return gains.front();
  if (t >= times.back()) return gains.back();
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  const std::size_t k = static_cast<std::size_t>(it - times.begin());
  const double w = (t - times[k - 1]) / (times[k] - times[k - 1]);
  return (1.0 - w) * gains[k - 1] + w * gains[k];
}

void MomentAccumulator::add(const Vector& x) {
  ++count;
  const Vector delta = x - mean;
  mean += delta / static_cast<double>(count);
  scatter.noalias() += delta * (x - mean).transpose();
}

void MomentAccumulator::merge(const MomentAccumulator& other) {
  if (other.count == 0) return;
  if (count == 0) {
    *this = other;
    return;
  }
  const double na = static_cast<double>(count);
  const double nb = static_cast<double>(other.count);
  const double total = na + nb;
  const Vector delta = other.mean - mean;
  mean += delta * (nb / total);
  scatter += other.scatter + delta * delta.transpose() * (na * nb / total);
  count += other.count;
}

MomentAccumulator merge_pairwise(std::vector<MomentAccumulator> parts) {
  if (parts.empty()) return MomentAccumulator{};
  while (parts.size() > 1) {
    std::vector<MomentAccumulator> next;
    for (std::size_t i = 0; i + 1 < parts.size(); i += 2) {
      parts[i].merge(parts[i + 1]);
      next.push_back(std::move(parts[i]));
    }
    if (parts.size() % 2 == 1) next.push_back(std::move(parts.back()));
    parts = std::move(next);
  }
  return std::move(parts.front());
}

namespace {

struct JumpSource {
  bool additive;
  int channel;
  double jump_std;
  std::vector<double> rate;
  std::vector<double> majorant;  // per step
};

struct BlockResult {
  std::vector<MomentAccumulator> moments;
  MomentAccumulator cost{1};
  MomentAccumulator jumps{1};
  MomentAccumulator martingale;
  std::vector<RetainedPath> paths;
};

// Per-step coefficients laid out for the inner loop.
struct Plan {
  int n = 0, p = 0, q = 0;
  long steps = 0;
  double dt = 0.0;
  int stride = 1;
  std::vector<double> times;
  std::vector<double> transition;   // steps x n x n closed-loop flow per step, column-major
  std::vector<double> gain;         // (steps+1) x p x n
  std::vector<double> c;            // (steps+1) x n x q
  std::vector<double> qcost, rcost; // (steps+1) x n x n, x p x p
  std::vector<std::pair<int, std::vector<double>>> wiener_add;  // channel, sqrt(rate dt) per step
  std::vector<std::vector<double>> wiener_mult;
  std::vector<JumpSource> jumps;
  Matrix sigma0_root;
  Vector mean0;
  std::vector<long> checkpoint_steps;
};

void simulate_block(const Plan& plan, const SimulationConfig& cfg, long first, long last, BlockResult& out) {
  const int n = plan.n, p = plan.p, q = plan.q;
  out.moments.assign(plan.checkpoint_steps.size(), MomentAccumulator(n));
  out.martingale = MomentAccumulator(q);
  std::vector<double> x(n), xn(n), u(p), dm(q), z(n);
  Vector xv(n), mv(q), one(1);
  std::vector<double> budget(plan.jumps.size());

  auto cost_at = [&](long k) {
    const double* qk = &plan.qcost[k * n * n];
    const double* rk = &plan.rcost[k * p * p];
    double s = 0.0;
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) s += x[i] * qk[j * n + i] * x[j];
    for (int j = 0; j < p; ++j)
      for (int i = 0; i < p; ++i) s += u[i] * rk[j * p + i] * u[j];
    return s;
  };
  auto control_at = [&](long k) {
    const double* g = &plan.gain[k * p * n];
    for (int i = 0; i < p; ++i) {
      double s = 0.0;
      for (int j = 0; j < n; ++j) s += g[j * p + i] * x[j];
      u[i] = s;
    }
  };
  auto record = [&](std::size_t slot) {
    for (int i = 0; i < n; ++i) xv(i) = x[i];
    out.moments[slot].add(xv);
  };

  for (long path = first; path < last; ++path) {
    PathStream rs(cfg.master_seed, static_cast<std::uint64_t>(path));
    for (int i = 0; i < n; ++i) z[i] = rs.normal();
    for (int i = 0; i < n; ++i) {
      double s = plan.mean0(i);
      for (int j = 0; j < n; ++j) s += plan.sigma0_root(i, j) * z[j];
      x[i] = s;
    }
    for (std::size_t j = 0; j < plan.jumps.size(); ++j) budget[j] = rs.exponential();
    std::fill(mv.data(), mv.data() + q, 0.0);
    long arrivals = 0;
    const bool keep = path < cfg.retain_paths;
    RetainedPath kept;
    kept.path_id = path;

    std::size_t slot = 0;
    record(slot++);
    control_at(0);
    double cost = 0.0;
    double prev = cfg.track_cost ? cost_at(0) : 0.0;
    for (long k = 0; k < plan.steps; ++k) {
      if (keep) {
        kept.x.emplace_back(Eigen::Map<const Vector>(x.data(), n));
        kept.u.emplace_back(Eigen::Map<const Vector>(u.data(), p));
      }
      std::fill(dm.begin(), dm.end(), 0.0);
      double dmu = 0.0;
      for (const auto& [ch, scale] : plan.wiener_add) dm[ch] += scale[k] * rs.normal();
      for (const auto& scale : plan.wiener_mult) dmu += scale[k] * rs.normal();
      for (std::size_t j = 0; j < plan.jumps.size(); ++j) {
        const JumpSource& src = plan.jumps[j];
        const double lam_bar = src.majorant[k];
        const double step_budget = lam_bar * plan.dt;
        double& e = budget[j];
        while (e <= step_budget) {
          const double s = plan.times[k] + e / lam_bar;
          if (rs.uniform() * lam_bar < horner(src.rate, s)) {
            const double chi = src.jump_std * rs.normal();
            if (src.additive) {
              dm[src.channel] += chi;
              ++arrivals;
            } else {
              dmu += chi;
            }
          }
          e += rs.exponential();
        }
        e -= step_budget;
      }
      const double* phi = &plan.transition[k * n * n];
      const double* ck = &plan.c[k * n * q];
      for (int i = 0; i < n; ++i) {
        double s = x[i] * dmu;
        for (int j = 0; j < n; ++j) s += phi[j * n + i] * x[j];
        for (int j = 0; j < q; ++j) s += ck[j * n + i] * dm[j];
        xn[i] = s;
      }
      for (int j = 0; j < q; ++j) mv(j) += dm[j];
      x.swap(xn);
      control_at(k + 1);
      if (cfg.track_cost) {
        const double next = cost_at(k + 1);
        cost += 0.5 * plan.dt * (prev + next);
        prev = next;
      }
      if (slot < plan.checkpoint_steps.size() && plan.checkpoint_steps[slot] == k + 1) record(slot++);
    }
    if (keep) {
      kept.x.emplace_back(Eigen::Map<const Vector>(x.data(), n));
      kept.u.emplace_back(Eigen::Map<const Vector>(u.data(), p));
      out.paths.push_back(std::move(kept));
    }
    one(0) = cost;
    out.cost.add(one);
    one(0) = static_cast<double>(arrivals);
    out.jumps.add(one);
    out.martingale.add(mv);
  }
}

// Deterministic closed-loop flow over one step by two RK4 substeps; the noise
// increments stay Euler-Maruyama.
Matrix step_transition(const SystemSpec& sys, const GainSchedule& gain, double t0, double t1) {
  auto f = [&](double t) -> Matrix { return sys.A(t) + sys.B(t) * gain(t); };
  const int n = sys.n;
  Matrix phi = Matrix::Identity(n, n);
  const double h = 0.5 * (t1 - t0);
  for (int j = 0; j < 2; ++j) {
    const double t = t0 + j * h;
    const Matrix fa = f(t), fm = f(t + 0.5 * h), fb = f(t + h);
    const Matrix k1 = fa * phi;
    const Matrix k2 = fm * (phi + 0.5 * h * k1);
    const Matrix k3 = fm * (phi + 0.5 * h * k2);
    const Matrix k4 = fb * (phi + h * k3);
    phi += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return phi;
}

void check_consistency(const SystemSpec& sys, const Intensities& in) {
  if (in.D.rows() != sys.q) throw InconsistencyError("noise model has a different number of channels than D");
  for (double t : uniform_grid(kValidationGrid)) {
    if (max_abs(in.D(t) - sys.D(t)) > 1e-10)
      throw InconsistencyError("noise model intensity differs from D at t=" + format_double(t));
    if (std::abs(in.nu(t)(0, 0) - sys.effective_nu(t)) > 1e-10)
      throw InconsistencyError("noise model intensity differs from nu at t=" + format_double(t));
  }
}

}  // namespace

SimulationResult simulate_paths(const SystemSpec& sys, const NoiseModel& noise, const GainSchedule& gain,
                                const SimulationConfig& cfg) {
  check_dimensions(sys);
  if (!(cfg.step_size > 0.0 && cfg.step_size <= kMaxStepSize))
    throw StepSizeError("step size must lie in (0, 0.01]");
  if (cfg.num_paths < 1) throw PreconditionError("at least one path is required");
  if (cfg.checkpoint_stride < 1) throw PreconditionError("checkpoint stride must be positive");
  if (sys.has_general_channels()) throw PreconditionError("simulation supports only identity multiplicative channels");
  if (noise.q != sys.q) throw InconsistencyError("noise model has a different number of channels than D");
  check_consistency(sys, derive_intensities(noise));
  if (gain.times.empty() || gain.times.size() != gain.gains.size() || gain.times.front() > 0.0 ||
      gain.times.back() < 1.0)
    throw PreconditionError("gain schedule must cover [0, 1]");
  for (const auto& k : gain.gains)
    if (k.rows() != sys.p || k.cols() != sys.n) throw DimensionError("gain must be p x n");
  if (cfg.Sigma0.rows() != sys.n || cfg.Sigma0.cols() != sys.n) throw DimensionError("Sigma0 must be n x n");

  Plan plan;
  plan.n = sys.n;
  plan.p = sys.p;
  plan.q = sys.q;
  const double raw = 1.0 / cfg.step_size;
  plan.steps = std::abs(raw - std::round(raw)) < 1e-9 ? std::lround(raw) : static_cast<long>(std::ceil(raw));
  plan.dt = 1.0 / static_cast<double>(plan.steps);
  plan.stride = cfg.checkpoint_stride;
  const int n = sys.n, p = sys.p, q = sys.q;
  for (long k = 0; k <= plan.steps; ++k) {
    const double t = k == plan.steps ? 1.0 : static_cast<double>(k) * plan.dt;
    plan.times.push_back(t);
    const Matrix kk = gain(t);
    if (k < plan.steps) {
      const Matrix phi = step_transition(sys, gain, t, k + 1 == plan.steps ? 1.0 : t + plan.dt);
      plan.transition.insert(plan.transition.end(), phi.data(), phi.data() + n * n);
    }
    plan.gain.insert(plan.gain.end(), kk.data(), kk.data() + p * n);
    const Matrix c = sys.C(t);
    plan.c.insert(plan.c.end(), c.data(), c.data() + n * q);
    const Matrix qm = sys.Q(t), rm = sys.R(t);
    plan.qcost.insert(plan.qcost.end(), qm.data(), qm.data() + n * n);
    plan.rcost.insert(plan.rcost.end(), rm.data(), rm.data() + p * p);
  }
  auto sqrt_rates = [&plan](const MatrixPoly& rate) {
    std::vector<double> s;
    for (long k = 0; k < plan.steps; ++k) s.push_back(std::sqrt(std::max(0.0, rate(plan.times[k])(0, 0)) * plan.dt));
    return s;
  };
  auto jump_source = [&plan](const NoiseComponent& c, bool additive) {
    JumpSource src{additive, c.channel, c.jump_std, c.rate.entry(0, 0), {}};
    double lipschitz = 0.0;
    for (std::size_t k = 1; k < src.rate.size(); ++k) lipschitz += static_cast<double>(k) * std::abs(src.rate[k]);
    for (long k = 0; k < plan.steps; ++k) {
      const double hi = std::max(horner(src.rate, plan.times[k]), horner(src.rate, plan.times[k + 1]));
      src.majorant.push_back(std::max(hi + 0.5 * lipschitz * plan.dt, 1e-300));
    }
    return src;
  };
  for (const auto& c : noise.additive) {
    if (c.kind == NoiseKind::wiener) {
      plan.wiener_add.emplace_back(c.channel, sqrt_rates(c.rate));
    } else {
      plan.jumps.push_back(jump_source(c, true));
    }
  }
  for (const auto& c : noise.multiplicative) {
    if (c.kind == NoiseKind::wiener) {
      plan.wiener_mult.push_back(sqrt_rates(c.rate));
    } else {
      plan.jumps.push_back(jump_source(c, false));
    }
  }
  plan.sigma0_root = sqrtm_psd(symmetrize(cfg.Sigma0));
  plan.mean0 = cfg.initial_mean.value_or(Vector::Zero(n));
  if (plan.mean0.size() != n) throw DimensionError("initial mean must have n entries");
  plan.checkpoint_steps.push_back(0);
  for (long k = plan.stride; k < plan.steps; k += plan.stride) plan.checkpoint_steps.push_back(k);
  plan.checkpoint_steps.push_back(plan.steps);

  const long blocks = (cfg.num_paths + kBlockPaths - 1) / kBlockPaths;
  std::vector<BlockResult> results(blocks);
  std::atomic<long> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (long b = next++; b < blocks; b = next++) {
      try {
        simulate_block(plan, cfg, b * kBlockPaths, std::min(cfg.num_paths, (b + 1) * kBlockPaths), results[b]);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  unsigned threads = cfg.threads > 0 ? static_cast<unsigned>(cfg.threads) : std::thread::hardware_concurrency();
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(blocks)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  SimulationResult res;
  res.n = n;
  res.p = p;
  res.num_paths = cfg.num_paths;
  res.step_size = plan.dt;
  res.master_seed = cfg.master_seed;
  res.step_times = plan.times;
  for (long k : plan.checkpoint_steps) res.checkpoint_times.push_back(plan.times[k]);
  for (std::size_t c = 0; c < plan.checkpoint_steps.size(); ++c) {
    std::vector<MomentAccumulator> parts;
    for (auto& r : results) parts.push_back(r.moments[c]);
    res.moments.push_back(merge_pairwise(std::move(parts)));
  }
  auto merge_field = [&results](MomentAccumulator BlockResult::*field) {
    std::vector<MomentAccumulator> parts;
    for (auto& r : results) parts.push_back(r.*field);
    return merge_pairwise(std::move(parts));
  };
  res.cost_tracked = cfg.track_cost;
  res.cost = merge_field(&BlockResult::cost);
  res.jump_count = merge_field(&BlockResult::jumps);
  res.martingale_end = merge_field(&BlockResult::martingale);
  for (auto& r : results)
    for (auto& path : r.paths) res.paths.push_back(std::move(path));
  return res;
}

Moments moments_of(const MomentAccumulator& acc) {
  Moments m;
  m.count = acc.count;
  m.mean = acc.mean;
  m.cov_defined = acc.count >= 2;
  m.cov = m.cov_defined ? Matrix(acc.scatter / static_cast<double>(acc.count - 1))
                        : Matrix::Constant(acc.scatter.rows(), acc.scatter.cols(), std::nan(""));
  return m;
}

Moments empirical_moments(const SimulationResult& result, double t) {
  for (std::size_t i = 0; i < result.checkpoint_times.size(); ++i) {
    if (std::abs(result.checkpoint_times[i] - t) <= 1e-9) return moments_of(result.moments[i]);
  }
  throw MissingCheckpointError("no checkpoint recorded at t=" + format_double(t));
}

CostEstimate estimate_cost(const SystemSpec&, const SimulationResult& result) {
  if (!result.cost_tracked) throw PathsNotRetainedError("simulation ran without cost tracking");
  CostEstimate e;
  const long n = result.cost.count;
  e.mean = result.cost.mean(0);
  e.half_width = n >= 2 ? 1.96 * std::sqrt(result.cost.scatter(0, 0) / static_cast<double>(n - 1)) /
                              std::sqrt(static_cast<double>(n))
                        : std::numeric_limits<double>::infinity();
  return e;
}

std::vector<EnvelopeRow> envelope(const SimulationResult& result) {
  std::vector<EnvelopeRow> rows;
  for (std::size_t i = 0; i < result.checkpoint_times.size(); ++i) {
    const Moments m = moments_of(result.moments[i]);
    Vector band = m.cov_defined ? Vector(3.0 * m.cov.diagonal().cwiseMax(0.0).cwiseSqrt())
                                : Vector::Zero(m.mean.size());
    rows.push_back({result.checkpoint_times[i], m.mean, m.mean - band, m.mean + band});
  }
  return rows;
}

}  // namespace covsteer
