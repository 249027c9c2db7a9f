#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace metsize {

enum class ModelKind { PPCA, PPCCA, DPPCA };

const char* to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& text);

struct AnalysisModel {
  ModelKind kind = ModelKind::PPCA;
  int n_covariates = 0;  // PPCCA only
  int q = 2;

  bool operator==(const AnalysisModel&) const = default;
};

// Throws InvalidArgument when the covariate count does not match the kind.
void validate(const AnalysisModel& model);

/// Hyperparameters of the generative priors.
struct PriorSpec {
  // Mean and covariance of each loadings row; empty means zero / identity
  // of dimension q.
  Eigen::VectorXd loadings_mean;
  Eigen::MatrixXd loadings_cov;
  double ig_shape = 3.0;
  double ig_scale = 4.0;
  double ppcca_coeff_sd = 1.0;
  double dppca_logvol_mean = 0.6931471805599453;  // ln 2
  double dppca_logvol_sd = 1.0;

  Eigen::VectorXd mean_for(int q) const;
  Eigen::MatrixXd cov_for(int q) const;

  bool operator==(const PriorSpec& other) const;
};

void validate(const PriorSpec& prior, int q);

enum class Provenance { Simulated, Experimental };

/// n x p intensity matrix with group labels in {1, 2}.
struct PilotMatrix {
  Eigen::MatrixXd data;
  std::vector<int> group;
  std::optional<Eigen::MatrixXd> covariates;  // n x c, no intercept column
  Provenance provenance = Provenance::Simulated;

  Eigen::Index n() const { return data.rows(); }
  Eigen::Index p() const { return data.cols(); }
  int count(int label) const;
};

// Throws Validation on label, shape or finiteness violations.
void validate(const PilotMatrix& pilot);

/// Parameters of a fitted (or fixed) PPCA-family model.
struct FittedModel {
  ModelKind kind = ModelKind::PPCA;
  int q = 0;
  Eigen::VectorXd mean;      // p
  Eigen::MatrixXd loadings;  // p x q
  double noise_var = 1.0;
  // q x (c + 1); column 0 multiplies the intercept. PPCCA only.
  std::optional<Eigen::MatrixXd> coeffs;
  // Experimental covariate rows (n x c) kept for resampling. PPCCA only.
  std::optional<Eigen::MatrixXd> covariates;

  // Fit diagnostics; not part of the model proper.
  bool converged = true;
  int iterations = 0;
  std::vector<double> loglik_trace;

  Eigen::Index p() const { return loadings.rows(); }

  bool operator==(const FittedModel& other) const;
};

void validate(const FittedModel& fit);

}  // namespace metsize
