#include "metsize/perm_fdr.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "metsize/error.hpp"
#include "metsize/percentile.hpp"

namespace metsize {

namespace {

struct GroupMoments {
  Eigen::VectorXd mean1, mean2, se;
  int n1 = 0, n2 = 0;
};

GroupMoments group_moments(const Eigen::MatrixXd& data,
                           std::span<const int> labels) {
  require(static_cast<Eigen::Index>(labels.size()) == data.rows(),
          "label count must equal the number of rows");
  GroupMoments gm;
  const Eigen::Index p = data.cols();
  gm.mean1 = Eigen::VectorXd::Zero(p);
  gm.mean2 = Eigen::VectorXd::Zero(p);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto row = data.row(static_cast<Eigen::Index>(i)).transpose();
    if (labels[i] == 1) {
      gm.mean1 += row;
      ++gm.n1;
    } else if (labels[i] == 2) {
      gm.mean2 += row;
      ++gm.n2;
    } else {
      std::ostringstream os;
      os << "label at row " << i << " must be 1 or 2, got " << labels[i];
      fail(ErrorKind::InvalidArgument, os.str());
    }
  }
  if (gm.n1 < 2 || gm.n2 < 2) {
    std::ostringstream os;
    os << "each group needs at least 2 samples for a variance estimate "
       << "(group 1: " << gm.n1 << ", group 2: " << gm.n2 << ")";
    fail(ErrorKind::InvalidArgument, os.str());
  }
  gm.mean1 /= gm.n1;
  gm.mean2 /= gm.n2;

  Eigen::VectorXd ss = Eigen::VectorXd::Zero(p);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto row = data.row(static_cast<Eigen::Index>(i)).transpose();
    const auto& mean = labels[i] == 1 ? gm.mean1 : gm.mean2;
    ss += (row - mean).cwiseAbs2();
  }
  const double n1 = gm.n1, n2 = gm.n2;
  const double scale = (1.0 / n1 + 1.0 / n2) / (n1 + n2 - 2.0);
  gm.se = (ss * scale).cwiseSqrt();
  return gm;
}

Eigen::VectorXd statistics(const GroupMoments& gm, double cf) {
  const Eigen::VectorXd denom = gm.se.array() + cf;
  std::vector<Eigen::Index> bad;
  for (Eigen::Index j = 0; j < denom.size(); ++j)
    if (!(denom(j) > 0.0)) bad.push_back(j);
  if (!bad.empty()) {
    std::ostringstream os;
    os << "S_j + cf is zero for " << bad.size() << " metabolite(s):";
    for (std::size_t k = 0; k < bad.size() && k < 20; ++k) os << ' ' << bad[k];
    if (bad.size() > 20) os << " ...";
    fail(ErrorKind::DegenerateStatistic, os.str());
  }
  return (gm.mean1 - gm.mean2).cwiseQuotient(denom);
}

}  // namespace

Eigen::VectorXd pooled_se(const Eigen::MatrixXd& data,
                          std::span<const int> labels) {
  return group_moments(data, labels).se;
}

double correction_factor(const Eigen::VectorXd& pooled_se) {
  require(pooled_se.size() >= 1, "correction factor needs at least one value");
  return percentile(std::span<const double>(pooled_se.data(),
                                            static_cast<std::size_t>(
                                                pooled_se.size())),
                    0.05);
}

StatVector t_statistics(const Eigen::MatrixXd& data,
                        std::span<const int> labels, double cf) {
  require(cf >= 0.0, "correction factor must be non-negative");
  const GroupMoments gm = group_moments(data, labels);
  return {statistics(gm, cf), gm.se, cf};
}

PermutationNull permutation_null(const Eigen::MatrixXd& data,
                                 std::vector<std::vector<int>> relabelings,
                                 double cf) {
  require(!relabelings.empty(), "need at least one permutation");
  PermutationNull out;
  const auto t = static_cast<Eigen::Index>(relabelings.size());
  out.stats.resize(t, data.cols());
  out.pooled_se.resize(t, data.cols());
  for (Eigen::Index r = 0; r < t; ++r) {
    const GroupMoments gm =
        group_moments(data, relabelings[static_cast<std::size_t>(r)]);
    out.stats.row(r) = statistics(gm, cf).transpose();
    out.pooled_se.row(r) = gm.se.transpose();
  }
  out.labels = std::move(relabelings);
  return out;
}

PermutationNull permutation_null(const Eigen::MatrixXd& data,
                                 std::span<const int> labels, int T, double cf,
                                 RandomStream& rng) {
  require(T >= 1, "number of permutations T must be positive");
  const auto n = labels.size();
  const auto n1 = static_cast<std::size_t>(
      std::count(labels.begin(), labels.end(), 1));
  std::vector<std::vector<int>> relabelings;
  relabelings.reserve(static_cast<std::size_t>(T));
  std::vector<std::size_t> rows(n);
  for (int t = 0; t < T; ++t) {
    // Uniform n1-subset of rows becomes group 1 (partial Fisher-Yates).
    // Only the group sizes of `labels` are used, so relabeled statistics
    // do not depend on which group was called 1.
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    for (std::size_t k = 0; k < n1; ++k)
      std::swap(rows[k], rows[k + static_cast<std::size_t>(rng.index(n - k))]);
    std::vector<int> relabeled(n, 2);
    for (std::size_t k = 0; k < n1; ++k) relabeled[rows[k]] = 1;
    relabelings.push_back(std::move(relabeled));
  }
  return permutation_null(data, std::move(relabelings), cf);
}

double fdr_for_planted(std::span<const double> ts_row,
                       std::span<const double> se_row,
                       std::span<const int> planted, double delta) {
  const std::size_t p = ts_row.size();
  require(se_row.size() == p, "statistic and standard error rows differ");
  require(!planted.empty() && planted.size() <= p,
          "planted set must be nonempty and no larger than p");
  require(delta >= 0.0, "delta must be non-negative");

  std::vector<double> magnitude(p);
  std::vector<char> is_planted(p, 0);
  for (std::size_t j = 0; j < p; ++j) magnitude[j] = std::abs(ts_row[j]);
  for (int idx : planted) {
    require(idx >= 0 && static_cast<std::size_t>(idx) < p,
            "planted index out of range");
    const auto j = static_cast<std::size_t>(idx);
    require(!is_planted[j], "planted indices must be distinct");
    is_planted[j] = 1;
    if (delta > 0.0) {
      require(se_row[j] > 0.0,
              "pooled standard error of a planted metabolite must be "
              "positive");
      magnitude[j] = std::abs(ts_row[j] + delta / se_row[j]);
    }
  }

  std::vector<double> sorted = magnitude;
  const auto kth = sorted.begin() + static_cast<std::ptrdiff_t>(planted.size() - 1);
  std::nth_element(sorted.begin(), kth, sorted.end(), std::greater<>());
  const double crit = *kth;

  std::size_t declared = 0, false_pos = 0;
  for (std::size_t j = 0; j < p; ++j) {
    if (magnitude[j] >= crit) {
      ++declared;
      if (!is_planted[j]) ++false_pos;
    }
  }
  return static_cast<double>(false_pos) /
         static_cast<double>(std::max<std::size_t>(declared, 1));
}

double fdr_single_permutation(std::span<const double> ts_row,
                              std::span<const double> se_row, int n1, int n2,
                              double m, double delta, RandomStream& rng) {
  require(m > 0.0 && m < 1.0, "m must lie in (0, 1)");
  require(n1 >= 1 && n2 >= 1, "group sizes must be positive");
  const int p = static_cast<int>(ts_row.size());
  const int planted_n = planted_count(m, p);

  // Partial Fisher-Yates: the first planted_n entries are a uniform sample
  // without replacement.
  std::vector<int> idx(static_cast<std::size_t>(p));
  std::iota(idx.begin(), idx.end(), 0);
  for (int k = 0; k < planted_n; ++k) {
    const auto pick =
        k + static_cast<int>(rng.index(static_cast<std::uint64_t>(p - k)));
    std::swap(idx[static_cast<std::size_t>(k)],
              idx[static_cast<std::size_t>(pick)]);
  }
  idx.resize(static_cast<std::size_t>(planted_n));
  return fdr_for_planted(ts_row, se_row, idx, delta);
}

FdrEstimate dataset_fdr(const PilotMatrix& pilot,
                        const EstimationConfig& config, RandomStream& rng) {
  require(config.permutations >= 1, "number of permutations must be positive");
  const std::span<const int> labels(pilot.group);
  const double cf = correction_factor(pooled_se(pilot.data, labels));

  RandomStream perm_rng = rng.split();
  RandomStream plant_rng = rng.split();
  const PermutationNull null =
      permutation_null(pilot.data, labels, config.permutations, cf, perm_rng);

  FdrEstimate est;
  est.n1 = pilot.count(1);
  est.n2 = pilot.count(2);
  est.planted = planted_count(config.m, static_cast<int>(pilot.p()));
  est.per_permutation.reserve(static_cast<std::size_t>(config.permutations));
  const auto p = static_cast<std::size_t>(pilot.p());
  for (Eigen::Index t = 0; t < null.stats.rows(); ++t) {
    // Rows of a column-major matrix are strided; copy them out.
    const Eigen::VectorXd ts = null.stats.row(t).transpose();
    const Eigen::VectorXd se = null.pooled_se.row(t).transpose();
    est.per_permutation.push_back(fdr_single_permutation(
        std::span<const double>(ts.data(), p),
        std::span<const double>(se.data(), p), est.n1, est.n2, config.m,
        config.delta, plant_rng));
  }
  est.dataset_fdr = percentile(est.per_permutation, 0.5);
  return est;
}

}  // namespace metsize
