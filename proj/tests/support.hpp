#pragma once

// Shared fixtures and independent oracles for the test suites. Nothing here
// calls into the library's numerical code.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace testing_support {

inline std::filesystem::path data_path(const std::string& name) {
  return std::filesystem::path(METSIZE_TEST_DATA) / name;
}

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("metsize-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Pooled SE straight from the textbook formula, one column at a time.
inline double naive_pooled_se(const std::vector<double>& g1,
                              const std::vector<double>& g2) {
  auto var = [](const std::vector<double>& g) {
    double mean = 0;
    for (double v : g) mean += v;
    mean /= g.size();
    double ss = 0;
    for (double v : g) ss += (v - mean) * (v - mean);
    return ss / (g.size() - 1);
  };
  const double n1 = g1.size(), n2 = g2.size();
  return std::sqrt((1 / n1 + 1 / n2) * ((n1 - 1) * var(g1) + (n2 - 1) * var(g2)) /
                   (n1 + n2 - 2));
}

// Type-7 percentile, written independently of the library.
inline double oracle_percentile(std::vector<double> v, double prob) {
  std::sort(v.begin(), v.end());
  const double h = (v.size() - 1) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - lo) * (v[hi] - v[lo]);
}

// Largest principal angle (degrees) between the column spans of a and b.
inline double max_principal_angle_deg(const Eigen::MatrixXd& a,
                                      const Eigen::MatrixXd& b) {
  const Eigen::MatrixXd qa =
      Eigen::HouseholderQR<Eigen::MatrixXd>(a).householderQ() *
      Eigen::MatrixXd::Identity(a.rows(), a.cols());
  const Eigen::MatrixXd qb =
      Eigen::HouseholderQR<Eigen::MatrixXd>(b).householderQ() *
      Eigen::MatrixXd::Identity(b.rows(), b.cols());
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(qa.transpose() * qb);
  const double smallest = std::clamp(svd.singularValues().minCoeff(), -1.0, 1.0);
  return std::acos(smallest) * 180.0 / M_PI;
}

inline Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& x) {
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::MatrixXd c = x.rowwise() - mean;
  return c.transpose() * c / double(x.rows() - 1);
}

// sup |F_a - F_b| for two samples. Values closer than `tol` count as the
// same atom, so discrete distributions computed by different formulas
// (equal up to rounding) compare correctly.
inline double ks_distance(std::vector<double> a, std::vector<double> b,
                          double tol = 1e-9) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  auto cdf = [](const std::vector<double>& v, double x) {
    return double(std::upper_bound(v.begin(), v.end(), x) - v.begin()) / v.size();
  };
  double d = 0;
  for (const auto* v : {&a, &b})
    for (double x : *v) d = std::max(d, std::abs(cdf(a, x + tol) - cdf(b, x + tol)));
  return d;
}

// Least-squares slope of y on x.
inline double ols_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= x.size();
  my /= y.size();
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

inline double median(std::vector<double> v) { return oracle_percentile(std::move(v), 0.5); }

}  // namespace testing_support
