#include "metsize/pilot_sim.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <string>

#include "metsize/error.hpp"

namespace metsize {

namespace {

Eigen::MatrixXd standard_normal(Eigen::Index rows, Eigen::Index cols,
                                RandomStream& rng) {
  Eigen::MatrixXd z(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) z(i, j) = rng.normal();
  return z;
}

Eigen::MatrixXd cholesky_factor(const Eigen::MatrixXd& cov,
                                std::string_view name) {
  const std::string label(name);
  if (cov.rows() != cov.cols())
    fail(ErrorKind::DecompositionFailure, label + " is not square");
  if (!cov.isApprox(cov.transpose(), 1e-12) && cov.norm() > 0)
    fail(ErrorKind::DecompositionFailure, label + " is not symmetric");
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success)
    fail(ErrorKind::DecompositionFailure,
         label + " is not positive definite (Cholesky failed)");
  return llt.matrixL();
}

void check_sizes(int n1, int n2, int p, const AnalysisModel& model) {
  require(n1 >= 2 && n2 >= 2, "each group needs at least 2 samples");
  require(model.q >= 1, "latent dimension q must be positive");
  if (p <= model.q) {
    std::ostringstream os;
    os << "p (" << p << ") must exceed the latent dimension q (" << model.q
       << ")";
    fail(ErrorKind::InvalidArgument, os.str());
  }
}

std::vector<int> split_labels(int n1, int n2) {
  std::vector<int> g(static_cast<std::size_t>(n1 + n2), 2);
  std::fill(g.begin(), g.begin() + n1, 1);
  return g;
}

// Independent sub-streams per model component, split in a fixed order for
// every model kind so that shared components match under a common seed.
struct SimStreams {
  RandomStream loadings;
  RandomStream variance;
  RandomStream rows;
  RandomStream covariates;
  RandomStream coeffs;

  explicit SimStreams(RandomStream& rng)
      : loadings(rng.split()),
        variance(rng.split()),
        rows(rng.split()),
        covariates(rng.split()),
        coeffs(rng.split()) {}
};

PilotMatrix simulate_common(int n1, int n2, int p, const AnalysisModel& model,
                            const PriorSpec& prior, RandomStream& rng,
                            ModelKind kind) {
  check_sizes(n1, n2, p, model);
  const int q = model.q;
  const int n = n1 + n2;
  SimStreams streams(rng);

  const Eigen::MatrixXd w = draw_gaussian_matrix(
      p, q, Eigen::RowVectorXd(prior.mean_for(q).transpose()),
      prior.cov_for(q), streams.loadings, "loadings_cov");
  const double noise_var = draw_noise_variance(kind, prior, streams.variance);

  Eigen::MatrixXd latent_mean = Eigen::MatrixXd::Zero(n, q);
  std::optional<Eigen::MatrixXd> covariates;
  if (kind == ModelKind::PPCCA) {
    const int c = model.n_covariates;
    Eigen::MatrixXd design(n, c + 1);
    design.col(0).setOnes();
    design.rightCols(c) = standard_normal(n, c, streams.covariates);
    Eigen::MatrixXd coeffs = standard_normal(q, c + 1, streams.coeffs);
    coeffs *= prior.ppcca_coeff_sd;
    latent_mean = design * coeffs.transpose();
    covariates = design.rightCols(c);
  }

  PilotMatrix out;
  out.data = generate_rows(w, Eigen::VectorXd::Zero(p), noise_var,
                           latent_mean, streams.rows);
  out.group = split_labels(n1, n2);
  out.covariates = std::move(covariates);
  out.provenance = Provenance::Simulated;
  return out;
}

}  // namespace

double draw_inverse_gamma(double shape, double scale, RandomStream& rng) {
  if (!(shape > 0.0) || !(scale > 0.0)) {
    std::ostringstream os;
    os << "inverse gamma parameters must be positive (shape " << shape
       << ", scale " << scale << ")";
    fail(ErrorKind::InvalidArgument, os.str());
  }
  // 1/X with X ~ Gamma(shape, rate = scale).
  for (;;) {
    const double g = rng.gamma(shape);
    if (g > 0.0) return scale / g;
  }
}

Eigen::MatrixXd draw_gaussian_matrix(Eigen::Index rows, Eigen::Index cols,
                                     double mean,
                                     const Eigen::MatrixXd& row_cov,
                                     RandomStream& rng,
                                     std::string_view cov_name) {
  return draw_gaussian_matrix(rows, cols,
                              Eigen::RowVectorXd::Constant(cols, mean),
                              row_cov, rng, cov_name);
}

Eigen::MatrixXd draw_gaussian_matrix(Eigen::Index rows, Eigen::Index cols,
                                     const Eigen::RowVectorXd& mean,
                                     const Eigen::MatrixXd& row_cov,
                                     RandomStream& rng,
                                     std::string_view cov_name) {
  require(rows > 0 && cols > 0, "matrix dimensions must be positive");
  require(mean.size() == cols, "mean length must equal the column count");
  return draw_gaussian_matrix(Eigen::MatrixXd(mean.replicate(rows, 1)),
                              row_cov, rng, cov_name);
}

Eigen::MatrixXd draw_gaussian_matrix(const Eigen::MatrixXd& mean,
                                     const Eigen::MatrixXd& row_cov,
                                     RandomStream& rng,
                                     std::string_view cov_name) {
  require(mean.rows() > 0 && mean.cols() > 0,
          "matrix dimensions must be positive");
  require(row_cov.rows() == mean.cols(),
          std::string(cov_name) + " dimension must equal the column count");
  const Eigen::MatrixXd lower = cholesky_factor(row_cov, cov_name);
  return mean + standard_normal(mean.rows(), mean.cols(), rng) *
                    lower.transpose();
}

double draw_noise_variance(ModelKind kind, const PriorSpec& prior,
                           RandomStream& rng) {
  if (kind == ModelKind::DPPCA) {
    require(prior.dppca_logvol_sd >= 0.0,
            "dppca_logvol_sd must be non-negative");
    return std::exp(rng.normal(prior.dppca_logvol_mean, prior.dppca_logvol_sd));
  }
  return draw_inverse_gamma(prior.ig_shape, prior.ig_scale, rng);
}

Eigen::MatrixXd generate_rows(const Eigen::MatrixXd& loadings,
                              const Eigen::VectorXd& mean, double noise_var,
                              const Eigen::MatrixXd& latent_mean,
                              RandomStream& rng) {
  require(loadings.cols() == latent_mean.cols(),
          "latent mean width must equal the loadings column count");
  require(mean.size() == loadings.rows(),
          "mean length must equal the loadings row count");
  require(noise_var >= 0.0, "noise variance must be non-negative");
  const Eigen::Index n = latent_mean.rows();
  const Eigen::Index p = loadings.rows();
  const Eigen::MatrixXd scores =
      latent_mean + standard_normal(n, loadings.cols(), rng);
  Eigen::MatrixXd x = scores * loadings.transpose();
  x.rowwise() += mean.transpose();
  x += std::sqrt(noise_var) * standard_normal(n, p, rng);
  return x;
}

PilotMatrix simulate_ppca_pilot(int n1, int n2, int p,
                                const AnalysisModel& model,
                                const PriorSpec& prior, RandomStream& rng) {
  return simulate_common(n1, n2, p, model, prior, rng, ModelKind::PPCA);
}

PilotMatrix simulate_ppcca_pilot(int n1, int n2, int p,
                                 const AnalysisModel& model,
                                 const PriorSpec& prior, RandomStream& rng) {
  require(model.n_covariates >= 1,
          "PPCCA simulation requires n_covariates >= 1");
  require(prior.ppcca_coeff_sd >= 0.0, "ppcca_coeff_sd must be non-negative");
  return simulate_common(n1, n2, p, model, prior, rng, ModelKind::PPCCA);
}

PilotMatrix simulate_dppca_pilot(int n1, int n2, int p,
                                 const AnalysisModel& model,
                                 const PriorSpec& prior, RandomStream& rng) {
  return simulate_common(n1, n2, p, model, prior, rng, ModelKind::DPPCA);
}

PilotMatrix simulate_pilot(int n1, int n2, int p, const AnalysisModel& model,
                           const PriorSpec& prior, RandomStream& rng) {
  switch (model.kind) {
    case ModelKind::PPCA: return simulate_ppca_pilot(n1, n2, p, model, prior, rng);
    case ModelKind::PPCCA: return simulate_ppcca_pilot(n1, n2, p, model, prior, rng);
    case ModelKind::DPPCA: return simulate_dppca_pilot(n1, n2, p, model, prior, rng);
  }
  fail(ErrorKind::InvalidArgument, "unknown model kind");
}

// ---------------------------------------------------------------------------
// Fitting

namespace {

constexpr double kEigenClamp = 1e-12;

void check_fit_sizes(const PilotMatrix& pilot, int q) {
  const auto n = pilot.n(), p = pilot.p();
  require(n >= 3, "fitting needs at least 3 samples");
  if (!(q >= 1 && q < std::min<Eigen::Index>(n - 1, p))) {
    std::ostringstream os;
    os << "q (" << q << ") must satisfy 1 <= q < min(n - 1, p) = "
       << std::min<Eigen::Index>(n - 1, p);
    fail(ErrorKind::InvalidArgument, os.str());
  }
}

}  // namespace

FittedModel fit_ppca(const PilotMatrix& pilot, int q) {
  check_fit_sizes(pilot, q);
  const auto n = pilot.n(), p = pilot.p();
  const Eigen::VectorXd mu = pilot.data.colwise().mean().transpose();
  const Eigen::MatrixXd centered = pilot.data.rowwise() - mu.transpose();
  // Top-q eigenpairs of the sample covariance, largest first, plus the
  // clamped eigenvalue sum over the other p - q directions. With fewer
  // samples than bins the n x n Gram matrix has the same nonzero spectrum
  // and is far cheaper; the p - n missing eigenvalues are exactly zero.
  Eigen::VectorXd top(q);
  Eigen::MatrixXd vectors(p, q);
  double rest_sum = 0.0;
  if (n < p) {
    const Eigen::MatrixXd gram = (centered * centered.transpose()) / static_cast<double>(n);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    if (eig.info() != Eigen::Success)
      fail(ErrorKind::DecompositionFailure, "sample Gram matrix eigendecomposition failed");
    const Eigen::VectorXd values = eig.eigenvalues().cwiseMax(kEigenClamp);
    for (int k = 0; k < q; ++k) {
      const Eigen::Index idx = n - 1 - k;
      top(k) = values(idx);
      // v = C^T u / sqrt(n lambda) is a unit eigenvector of C^T C / n.
      vectors.col(k) = centered.transpose() * eig.eigenvectors().col(idx) /
                       std::sqrt(static_cast<double>(n) * values(idx));
    }
    rest_sum = values.head(n - q).sum() + static_cast<double>(p - n) * kEigenClamp;
  } else {
    const Eigen::MatrixXd cov =
        (centered.transpose() * centered) / static_cast<double>(n);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success)
      fail(ErrorKind::DecompositionFailure,
           "sample covariance eigendecomposition failed");
    // Ascending order; clamp rank-deficient directions.
    const Eigen::VectorXd values = eig.eigenvalues().cwiseMax(kEigenClamp);
    for (int k = 0; k < q; ++k) {
      top(k) = values(p - 1 - k);
      vectors.col(k) = eig.eigenvectors().col(p - 1 - k);
    }
    rest_sum = values.head(p - q).sum();
  }
  const double noise_var = rest_sum / static_cast<double>(p - q);
  const double smallest_kept = top(q - 1);
  if (!(smallest_kept > noise_var)) {
    std::ostringstream os;
    os << "PPCA fit degenerate: eigenvalue " << q << " (" << smallest_kept
       << ") does not exceed the noise variance estimate (" << noise_var
       << "); try a smaller q";
    fail(ErrorKind::ModelDegenerate, os.str());
  }

  FittedModel fit;
  fit.kind = ModelKind::PPCA;
  fit.q = q;
  fit.mean = mu;
  fit.noise_var = noise_var;
  fit.loadings.resize(p, q);
  for (int k = 0; k < q; ++k)
    fit.loadings.col(k) = vectors.col(k) * std::sqrt(top(k) - noise_var);
  return fit;
}

namespace {

Eigen::MatrixXd design_matrix(const Eigen::MatrixXd& covariates) {
  Eigen::MatrixXd design(covariates.rows(), covariates.cols() + 1);
  design.col(0).setOnes();
  design.rightCols(covariates.cols()) = covariates;
  return design;
}

double loglik_centered(const Eigen::MatrixXd& centered,
                       const Eigen::MatrixXd& design,
                       const Eigen::MatrixXd& w, double noise_var,
                       const Eigen::MatrixXd& coeffs) {
  const auto n = static_cast<double>(centered.rows());
  const auto p = static_cast<double>(centered.cols());
  const auto q = w.cols();
  const Eigen::MatrixXd m =
      w.transpose() * w +
      noise_var * Eigen::MatrixXd::Identity(q, q);
  const Eigen::LLT<Eigen::MatrixXd> m_llt(m);
  const double logdet_m =
      2.0 * m_llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const double logdet =
      (p - static_cast<double>(q)) * std::log(noise_var) + logdet_m;

  const Eigen::MatrixXd resid =
      centered - design * coeffs.transpose() * w.transpose();
  const Eigen::MatrixXd proj = resid * w;  // n x q
  const double quad =
      (resid.squaredNorm() - (proj.array() * m_llt.solve(proj.transpose())
                                                 .transpose()
                                                 .array())
                                 .sum()) /
      noise_var;
  return -0.5 * (n * p * std::log(2.0 * std::numbers::pi) + n * logdet + quad);
}

}  // namespace

double ppcca_loglik(const PilotMatrix& pilot, const FittedModel& fit) {
  require(fit.coeffs.has_value(), "PPCCA log-likelihood needs coefficients");
  require(pilot.covariates.has_value(),
          "PPCCA log-likelihood needs covariates");
  const Eigen::MatrixXd centered =
      pilot.data.rowwise() - fit.mean.transpose();
  return loglik_centered(centered, design_matrix(*pilot.covariates),
                         fit.loadings, fit.noise_var, *fit.coeffs);
}

FittedModel fit_ppcca(const PilotMatrix& pilot, int q,
                      const PpccaFitOptions& options) {
  if (!pilot.covariates || pilot.covariates->cols() == 0)
    fail(ErrorKind::InvalidArgument,
         "PPCCA fit requires covariates on the pilot data");
  require(options.max_iter >= 1, "max_iter must be positive");
  require(options.tol > 0.0, "tol must be positive");

  FittedModel fit = fit_ppca(pilot, q);
  fit.kind = ModelKind::PPCCA;
  fit.covariates = *pilot.covariates;

  const auto n = static_cast<double>(pilot.n());
  const auto p = static_cast<double>(pilot.p());
  const Eigen::MatrixXd design = design_matrix(*pilot.covariates);
  const Eigen::MatrixXd centered = pilot.data.rowwise() - fit.mean.transpose();
  const double total_ss = centered.squaredNorm();
  const Eigen::LDLT<Eigen::MatrixXd> design_gram(design.transpose() * design);
  if (design_gram.info() != Eigen::Success || !design_gram.isPositive() ||
      design_gram.vectorD().minCoeff() <= 0.0)
    fail(ErrorKind::ModelDegenerate,
         "covariate design matrix is rank deficient");

  Eigen::MatrixXd w = fit.loadings;
  double noise_var = fit.noise_var;
  Eigen::MatrixXd coeffs = Eigen::MatrixXd::Zero(q, design.cols());
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(q, q);

  double ll = loglik_centered(centered, design, w, noise_var, coeffs);
  fit.loglik_trace = {ll};
  fit.converged = false;
  int iter = 0;
  while (iter < options.max_iter) {
    ++iter;
    // E-step: posterior latent moments.
    const Eigen::MatrixXd m_inv =
        (w.transpose() * w + noise_var * eye).llt().solve(eye);
    const Eigen::MatrixXd eu =
        (centered * w + noise_var * design * coeffs.transpose()) * m_inv;
    const Eigen::MatrixXd euu = n * noise_var * m_inv + eu.transpose() * eu;

    // M-step.
    w = (centered.transpose() * eu) * euu.llt().solve(eye);
    noise_var = (total_ss - 2.0 * (eu.transpose() * centered * w).trace() +
                 (euu * w.transpose() * w).trace()) /
                (n * p);
    if (!(noise_var > 0.0))
      fail(ErrorKind::ModelDegenerate,
           "PPCCA EM drove the noise variance to zero");
    coeffs = design_gram.solve(design.transpose() * eu).transpose();

    const double next = loglik_centered(centered, design, w, noise_var, coeffs);
    fit.loglik_trace.push_back(next);
    const double change = std::abs(next - ll) / std::max(1.0, std::abs(ll));
    ll = next;
    if (change < options.tol) {
      fit.converged = true;
      break;
    }
  }
  fit.iterations = iter;
  fit.loadings = w;
  fit.noise_var = noise_var;
  fit.coeffs = coeffs;
  return fit;
}

PilotMatrix simulate_from_fit(const FittedModel& fit, int n1, int n2,
                              RandomStream& rng) {
  validate(fit);
  require(n1 >= 2 && n2 >= 2, "each group needs at least 2 samples");
  const int n = n1 + n2;
  Eigen::MatrixXd latent_mean = Eigen::MatrixXd::Zero(n, fit.q);
  PilotMatrix out;
  if (fit.kind == ModelKind::PPCCA) {
    if (!fit.covariates || fit.covariates->rows() == 0)
      fail(ErrorKind::InvalidArgument,
           "PPCCA simulation from a fit needs stored covariates");
    require(fit.coeffs.has_value(), "PPCCA fit has no coefficients");
    const auto& source = *fit.covariates;
    Eigen::MatrixXd drawn(n, source.cols());
    RandomStream pick = rng.split();
    for (int i = 0; i < n; ++i)
      drawn.row(i) = source.row(static_cast<Eigen::Index>(
          pick.index(static_cast<std::uint64_t>(source.rows()))));
    latent_mean = design_matrix(drawn) * fit.coeffs->transpose();
    out.covariates = drawn;
  } else {
    rng.split();  // keep stream layout identical across kinds
  }
  RandomStream rows = rng.split();
  out.data = generate_rows(fit.loadings, fit.mean, fit.noise_var, latent_mean,
                           rows);
  out.group = split_labels(n1, n2);
  out.provenance = Provenance::Simulated;
  return out;
}

}  // namespace metsize
