#pragma once

#include <string_view>

#include <Eigen/Dense>

#include "metsize/model.hpp"
#include "metsize/random.hpp"

namespace metsize {

// One draw from IG(shape, scale), density proportional to
// x^(-shape-1) exp(-scale/x).
double draw_inverse_gamma(double shape, double scale, RandomStream& rng);

// rows x cols matrix whose rows are independent MVN_cols(mean, row_cov)
// draws. row_cov is factorized once by Cholesky; a non-SPD matrix raises
// DecompositionFailure naming `cov_name`.
Eigen::MatrixXd draw_gaussian_matrix(Eigen::Index rows, Eigen::Index cols,
                                     double mean,
                                     const Eigen::MatrixXd& row_cov,
                                     RandomStream& rng,
                                     std::string_view cov_name = "row_cov");
Eigen::MatrixXd draw_gaussian_matrix(Eigen::Index rows, Eigen::Index cols,
                                     const Eigen::RowVectorXd& mean,
                                     const Eigen::MatrixXd& row_cov,
                                     RandomStream& rng,
                                     std::string_view cov_name = "row_cov");
// Per-row means: mean is rows x cols.
Eigen::MatrixXd draw_gaussian_matrix(const Eigen::MatrixXd& mean,
                                     const Eigen::MatrixXd& row_cov,
                                     RandomStream& rng,
                                     std::string_view cov_name = "row_cov");

// sigma^2 prior draw for the given model kind: IG(ig_shape, ig_scale) for
// PPCA/PPCCA, exp(N(dppca_logvol_mean, dppca_logvol_sd^2)) for DPPCA.
double draw_noise_variance(ModelKind kind, const PriorSpec& prior,
                           RandomStream& rng);

// Pseudo-pilot data from the marginal model: parameters and latent scores
// drawn from the priors, then rows x_i ~ MVN_p(W u_i, sigma^2 I).
// Labels: first n1 rows are group 1, the rest group 2.
PilotMatrix simulate_ppca_pilot(int n1, int n2, int p,
                                const AnalysisModel& model,
                                const PriorSpec& prior, RandomStream& rng);

// Covariates shift the latent means: u_i ~ MVN_q(B c_i, I) with
// c_i = (1, z_i), z_i standard Gaussian, B entries N(0, ppcca_coeff_sd^2).
PilotMatrix simulate_ppcca_pilot(int n1, int n2, int p,
                                 const AnalysisModel& model,
                                 const PriorSpec& prior, RandomStream& rng);

// PPCA with first-time-point stochastic-volatility noise:
// sigma^2 = exp(h), h ~ N(dppca_logvol_mean, dppca_logvol_sd^2).
PilotMatrix simulate_dppca_pilot(int n1, int n2, int p,
                                 const AnalysisModel& model,
                                 const PriorSpec& prior, RandomStream& rng);

// Dispatches on model.kind.
PilotMatrix simulate_pilot(int n1, int n2, int p, const AnalysisModel& model,
                           const PriorSpec& prior, RandomStream& rng);

// Generates rows from fixed parameters (W, mu, sigma^2[, B]) with latent
// means B c_i where c_i is given (n x (c + 1), intercept in column 0).
// Exposed for oracle tests; simulate_* build on it.
Eigen::MatrixXd generate_rows(const Eigen::MatrixXd& loadings,
                              const Eigen::VectorXd& mean, double noise_var,
                              const Eigen::MatrixXd& latent_mean,
                              RandomStream& rng);

// Closed-form maximum-likelihood PPCA (rotation fixed to identity).
FittedModel fit_ppca(const PilotMatrix& pilot, int q);

struct PpccaFitOptions {
  int max_iter = 500;
  double tol = 1e-8;
};

// EM for PPCA with covariate-dependent latent means, started from fit_ppca
// with B = 0. The mean vector is held at the column means.
FittedModel fit_ppcca(const PilotMatrix& pilot, int q,
                      const PpccaFitOptions& options = {});

// Marginal log-likelihood of PPCCA parameters on pilot data.
double ppcca_loglik(const PilotMatrix& pilot, const FittedModel& fit);

// Pilot data at fixed fitted parameters. PPCCA covariate rows are resampled
// with replacement from fit.covariates.
PilotMatrix simulate_from_fit(const FittedModel& fit, int n1, int n2,
                              RandomStream& rng);

}  // namespace metsize
