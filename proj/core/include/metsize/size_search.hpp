#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "metsize/config.hpp"
#include "metsize/random.hpp"

namespace metsize {

struct GroupSplit {
  int n1 = 0;
  int n2 = 0;

  int total() const { return n1 + n2; }
  bool operator==(const GroupSplit&) const = default;
};

struct FdrCurvePoint {
  int n = 0;
  int n1 = 0;
  int n2 = 0;
  double fdr10 = 0.0;
  double fdr50 = 0.0;
  double fdr90 = 0.0;

  bool operator==(const FdrCurvePoint&) const = default;
};

struct RunDiagnostics {
  bool grid_exhausted = false;
  bool early_stopped = false;
  int points_evaluated = 0;
  int grid_size = 0;
  std::uint64_t seed = 0;
  double wall_time_seconds = 0.0;  // not serialized

  bool operator==(const RunDiagnostics& other) const;
};

struct SampleSizeResult {
  std::optional<int> n_hat;
  int n1_hat = 0;
  int n2_hat = 0;
  std::string reason;  // set when n_hat is absent
  std::vector<FdrCurvePoint> curve;
  bool converged = false;
  RunDiagnostics diagnostics;
  EstimationConfig config;

  bool operator==(const SampleSizeResult&) const = default;
};

inline constexpr const char* kGridExhausted = "grid-exhausted";

// Totals from n_min to n_max in steps of grid_step, split by group_ratio.
std::vector<GroupSplit> candidate_grid(const EstimationConfig& config);

// Stream for grid point (n1, n2); depends only on the seed and the split.
RandomStream point_stream(std::uint64_t seed, int n1, int n2);

// SIM simulated datasets at (n1, n2); 10th/50th/90th percentiles of their
// dataset FDRs.
FdrCurvePoint fdr_percentiles_at(int n1, int n2, const EstimationConfig& config,
                                 RandomStream& rng);

struct SizeEstimate {
  std::optional<int> n;
  std::string reason;
};

// Least-squares line of fdr50 on n over the points bracketing the target;
// the solution is rounded up to a total divisible by ratio.total().
SizeEstimate interpolate_sample_size(const std::vector<FdrCurvePoint>& curve,
                                     double target,
                                     const GroupRatio& ratio = {});

// Called after each grid point with the curve so far and the grid size.
using ProgressFn =
    std::function<void(const std::vector<FdrCurvePoint>& partial, int total)>;

SampleSizeResult estimate_sample_size(const EstimationConfig& config,
                                      const ProgressFn& progress = {});

struct SweepPoint {
  double m = 0.0;
  FdrCurvePoint point;
};

// FDR percentiles for every (m, n) pair; n totals split by group_ratio.
std::vector<SweepPoint> sweep_proportion(const EstimationConfig& config,
                                         const std::vector<double>& m_values,
                                         const std::vector<int>& n_values);

}  // namespace metsize
