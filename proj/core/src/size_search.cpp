#include "metsize/size_search.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <sstream>
#include <thread>

#include "metsize/error.hpp"
#include "metsize/percentile.hpp"
#include "metsize/perm_fdr.hpp"
#include "metsize/pilot_sim.hpp"

namespace metsize {

bool RunDiagnostics::operator==(const RunDiagnostics& o) const {
  return grid_exhausted == o.grid_exhausted &&
         early_stopped == o.early_stopped &&
         points_evaluated == o.points_evaluated && grid_size == o.grid_size &&
         seed == o.seed;
}

namespace {

int worker_count(const EstimationConfig& config, int tasks) {
  int n = config.threads > 0
              ? config.threads
              : static_cast<int>(std::thread::hardware_concurrency());
  return std::clamp(n, 1, std::max(tasks, 1));
}

// Runs body(i) for i in [0, count) on up to `workers` threads. The first
// failure by index is rethrown after all tasks finish.
template <typename Body>
void parallel_for(int count, int workers, Body body) {
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
  auto run = [&](int i) {
    try {
      body(i);
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  };
  if (workers <= 1) {
    for (int i = 0; i < count; ++i) run(i);
  } else {
    std::atomic<int> next{0};
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (int i = next++; i < count; i = next++) run(i);
      });
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

GroupSplit split_total(int total, const GroupRatio& ratio) {
  const int r = ratio.total();
  if (total % r != 0) {
    std::ostringstream os;
    os << "sample size " << total << " cannot be split in ratio "
       << ratio.group1 << ":" << ratio.group2;
    fail(ErrorKind::InvalidArgument, os.str());
  }
  return {total / r * ratio.group1, total / r * ratio.group2};
}

PilotMatrix simulate_for_source(int n1, int n2, const EstimationConfig& config,
                                RandomStream& rng) {
  if (const auto* draws = std::get_if<PriorDraws>(&config.source))
    return simulate_pilot(n1, n2, config.p, config.model, draws->prior, rng);
  return simulate_from_fit(std::get<FittedPilot>(config.source).fit, n1, n2,
                           rng);
}

}  // namespace

std::vector<GroupSplit> candidate_grid(const EstimationConfig& config) {
  const GroupRatio& ratio = config.group_ratio;
  require(ratio.group1 >= 1 && ratio.group2 >= 1,
          "group ratio parts must be positive");
  require(config.grid_step >= 1, "grid step must be positive");
  require(config.n_max >= config.n_min, "n_max must be at least n_min");
  const int r = ratio.total();
  if (config.n_min % r != 0 || config.grid_step % r != 0) {
    std::ostringstream os;
    os << "ratio " << ratio.group1 << ":" << ratio.group2
       << " is incompatible with n_min " << config.n_min << " and step "
       << config.grid_step << " (both must be divisible by " << r << ")";
    fail(ErrorKind::InvalidArgument, os.str());
  }
  std::vector<GroupSplit> grid;
  for (int n = config.n_min; n <= config.n_max; n += config.grid_step)
    grid.push_back(split_total(n, ratio));
  if (grid.front().n1 < 2 || grid.front().n2 < 2)
    fail(ErrorKind::InvalidArgument,
         "smallest grid point leaves a group with fewer than 2 samples");
  return grid;
}

RandomStream point_stream(std::uint64_t seed, int n1, int n2) {
  return RandomStream(derive_seed(seed, {static_cast<std::uint64_t>(n1),
                                         static_cast<std::uint64_t>(n2)}));
}

FdrCurvePoint fdr_percentiles_at(int n1, int n2, const EstimationConfig& config,
                                 RandomStream& rng) {
  require(n1 >= 2 && n2 >= 2, "each group needs at least 2 samples");
  require(config.simulations >= 1, "number of simulations must be positive");
  const std::uint64_t base = rng.next_u64();
  const int sims = config.simulations;
  std::vector<double> fdrs(static_cast<std::size_t>(sims));

  parallel_for(sims, worker_count(config, sims), [&](int s) {
    RandomStream sim(derive_seed(base, {static_cast<std::uint64_t>(s)}));
    try {
      const PilotMatrix pilot = simulate_for_source(n1, n2, config, sim);
      fdrs[static_cast<std::size_t>(s)] =
          dataset_fdr(pilot, config, sim).dataset_fdr;
    } catch (const Error& e) {
      std::ostringstream os;
      os << "simulation " << s << " at n1=" << n1 << ", n2=" << n2
         << " failed: " << e.what();
      throw Error(e.kind(), os.str());
    }
  });

  FdrCurvePoint point;
  point.n1 = n1;
  point.n2 = n2;
  point.n = n1 + n2;
  point.fdr10 = percentile(fdrs, 0.10);
  point.fdr50 = percentile(fdrs, 0.50);
  point.fdr90 = percentile(fdrs, 0.90);
  return point;
}

SizeEstimate interpolate_sample_size(const std::vector<FdrCurvePoint>& curve,
                                     double target, const GroupRatio& ratio) {
  require(!curve.empty(), "cannot interpolate an empty curve");
  require(ratio.group1 >= 1 && ratio.group2 >= 1,
          "group ratio parts must be positive");
  for (std::size_t i = 1; i < curve.size(); ++i)
    require(curve[i].n > curve[i - 1].n,
            "curve must be sorted by strictly increasing n");

  const auto below = [&](const FdrCurvePoint& pt) { return pt.fdr50 <= target; };
  const auto first_it = std::find_if(curve.begin(), curve.end(), below);
  if (first_it == curve.end()) return {std::nullopt, kGridExhausted};
  const auto first = static_cast<std::size_t>(first_it - curve.begin());
  if (first == 0) return {curve.front().n, ""};

  // Bracket: last point above the target before the first crossing through
  // the point after the last re-crossing, if the curve goes back above.
  const std::size_t lo = first - 1;
  std::size_t hi = first;
  for (std::size_t i = curve.size(); i-- > first;) {
    if (!below(curve[i])) {
      hi = std::min(i + 1, curve.size() - 1);
      break;
    }
  }

  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const auto k = static_cast<double>(hi - lo + 1);
  for (std::size_t i = lo; i <= hi; ++i) {
    const double x = curve[i].n, y = curve[i].fdr50;
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double slope = (k * sxy - sx * sy) / (k * sxx - sx * sx);
  const double intercept = (sy - slope * sx) / k;

  double solution = curve[first].n;
  if (std::isfinite(slope) && slope < 0.0)
    solution = std::clamp((target - intercept) / slope,
                          static_cast<double>(curve[lo].n),
                          static_cast<double>(curve[hi].n));

  const int r = ratio.total();
  // The small offset absorbs rounding error at exact grid hits.
  const int n = static_cast<int>(std::ceil((solution - 1e-9) / r)) * r;
  return {n, ""};
}

SampleSizeResult estimate_sample_size(const EstimationConfig& config,
                                      const ProgressFn& progress) {
  validate(config);
  const auto start = std::chrono::steady_clock::now();
  const std::vector<GroupSplit> grid = candidate_grid(config);

  SampleSizeResult result;
  result.config = config;
  result.diagnostics.seed = config.seed;
  result.diagnostics.grid_size = static_cast<int>(grid.size());

  std::optional<std::size_t> first_crossing;
  int below_after_crossing = 0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const auto [n1, n2] = grid[k];
    RandomStream rng = point_stream(config.seed, n1, n2);
    result.curve.push_back(fdr_percentiles_at(n1, n2, config, rng));
    if (progress) progress(result.curve, static_cast<int>(grid.size()));

    const double fdr50 = result.curve.back().fdr50;
    if (!first_crossing) {
      if (fdr50 <= config.target_fdr) first_crossing = k;
    } else {
      below_after_crossing = fdr50 < config.target_fdr ? below_after_crossing + 1 : 0;
    }
    if (!config.full_grid && below_after_crossing >= 2 &&
        k + 1 < grid.size()) {
      result.diagnostics.early_stopped = true;
      break;
    }
  }
  result.diagnostics.points_evaluated = static_cast<int>(result.curve.size());

  const SizeEstimate est = interpolate_sample_size(
      result.curve, config.target_fdr, config.group_ratio);
  if (est.n) {
    const int r = config.group_ratio.total();
    result.n_hat = *est.n;
    result.n1_hat = *est.n / r * config.group_ratio.group1;
    result.n2_hat = *est.n / r * config.group_ratio.group2;
    result.converged = true;
  } else {
    result.reason = est.reason;
    result.converged = false;
    result.diagnostics.grid_exhausted = true;
  }
  result.diagnostics.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return result;
}

std::vector<SweepPoint> sweep_proportion(const EstimationConfig& config,
                                         const std::vector<double>& m_values,
                                         const std::vector<int>& n_values) {
  require(!m_values.empty() && !n_values.empty(),
          "sweep needs at least one proportion and one sample size");
  std::vector<SweepPoint> out;
  for (int n : n_values) {
    const GroupSplit split = split_total(n, config.group_ratio);
    for (double m : m_values) {
      EstimationConfig cfg = config;
      cfg.m = m;
      validate(cfg);
      // Same stream for every m at this n: common random numbers.
      RandomStream rng = point_stream(config.seed, split.n1, split.n2);
      out.push_back({m, fdr_percentiles_at(split.n1, split.n2, cfg, rng)});
    }
  }
  return out;
}

}  // namespace metsize
