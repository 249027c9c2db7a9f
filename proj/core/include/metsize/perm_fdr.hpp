#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "metsize/config.hpp"
#include "metsize/model.hpp"
#include "metsize/random.hpp"

namespace metsize {

struct StatVector {
  Eigen::VectorXd ts;         // p
  Eigen::VectorXd pooled_se;  // p, S_j without the correction factor
  double cf = 0.0;
};

struct FdrEstimate {
  std::vector<double> per_permutation;
  double dataset_fdr = 0.0;
  int n1 = 0;
  int n2 = 0;
  int planted = 0;
};

// Pooled standard error per column:
// sqrt((1/n1 + 1/n2) ((n1-1) s1^2 + (n2-1) s2^2) / (n1 + n2 - 2)).
// labels are 1 or 2, one per row; each group needs at least two rows.
Eigen::VectorXd pooled_se(const Eigen::MatrixXd& data,
                          std::span<const int> labels);

// 5th percentile of the pooled standard errors.
double correction_factor(const Eigen::VectorXd& pooled_se);

// (mean1 - mean2) / (S_j + cf). Throws DegenerateStatistic listing the
// columns where S_j + cf == 0.
StatVector t_statistics(const Eigen::MatrixXd& data,
                        std::span<const int> labels, double cf);

struct PermutationNull {
  Eigen::MatrixXd stats;      // T x p
  Eigen::MatrixXd pooled_se;  // T x p
  std::vector<std::vector<int>> labels;
};

// Statistics under the given relabelings; cf is held fixed.
PermutationNull permutation_null(const Eigen::MatrixXd& data,
                                 std::vector<std::vector<int>> relabelings,
                                 double cf);

// T uniformly random relabelings preserving the group sizes. Each draws the
// group-1 rows as a uniform subset, independent of the original labeling.
PermutationNull permutation_null(const Eigen::MatrixXd& data,
                                 std::span<const int> labels, int T, double cf,
                                 RandomStream& rng);

// FDR for one permuted statistic row with an explicit planted set. Planted
// statistics are shifted by +delta / S_j (delta is in intensity units);
// crit is the p_o-th largest |statistic| and everything at or above it is
// declared.
double fdr_for_planted(std::span<const double> ts_row,
                       std::span<const double> se_row,
                       std::span<const int> planted, double delta);

// Samples p_o = round(m p) planted indices without replacement, then
// applies fdr_for_planted. n1 and n2 are accepted for the shift formula
// delta / (rho_j sqrt(1/n1 + 1/n2)) with rho_j = S_j / sqrt(1/n1 + 1/n2),
// which reduces to delta / S_j.
double fdr_single_permutation(std::span<const double> ts_row,
                              std::span<const double> se_row, int n1, int n2,
                              double m, double delta, RandomStream& rng);

// Median FDR over T permutations of one dataset.
FdrEstimate dataset_fdr(const PilotMatrix& pilot,
                        const EstimationConfig& config, RandomStream& rng);

}  // namespace metsize
