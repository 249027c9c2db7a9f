#include "metsize/model.hpp"

#include <cctype>
#include <cmath>
#include <sstream>

#include "metsize/error.hpp"

namespace metsize {

namespace {

template <typename Derived>
bool same(const Eigen::MatrixBase<Derived>& a,
          const Eigen::MatrixBase<Derived>& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
}

bool same(const std::optional<Eigen::MatrixXd>& a,
          const std::optional<Eigen::MatrixXd>& b) {
  if (a.has_value() != b.has_value()) return false;
  return !a || same(*a, *b);
}

}  // namespace

const char* to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::PPCA: return "ppca";
    case ModelKind::PPCCA: return "ppcca";
    case ModelKind::DPPCA: return "dppca";
  }
  return "?";
}

ModelKind parse_model_kind(const std::string& text) {
  std::string lower;
  for (char c : text) lower += static_cast<char>(std::tolower(c));
  if (lower == "ppca") return ModelKind::PPCA;
  if (lower == "ppcca") return ModelKind::PPCCA;
  if (lower == "dppca") return ModelKind::DPPCA;
  fail(ErrorKind::Validation,
       "unknown model '" + text + "' (expected ppca, ppcca or dppca)");
}

void validate(const AnalysisModel& model) {
  require(model.q >= 1, "latent dimension q must be positive");
  if (model.kind == ModelKind::PPCCA) {
    require(model.n_covariates >= 1,
            "PPCCA requires at least one covariate (n_covariates >= 1)");
  } else {
    require(model.n_covariates == 0,
            std::string("covariates are only used by PPCCA, not ") +
                to_string(model.kind));
  }
}

Eigen::VectorXd PriorSpec::mean_for(int q) const {
  return loadings_mean.size() == 0 ? Eigen::VectorXd::Zero(q) : loadings_mean;
}

Eigen::MatrixXd PriorSpec::cov_for(int q) const {
  return loadings_cov.size() == 0 ? Eigen::MatrixXd::Identity(q, q)
                                  : loadings_cov;
}

bool PriorSpec::operator==(const PriorSpec& o) const {
  return same(loadings_mean, o.loadings_mean) &&
         same(loadings_cov, o.loadings_cov) && ig_shape == o.ig_shape &&
         ig_scale == o.ig_scale && ppcca_coeff_sd == o.ppcca_coeff_sd &&
         dppca_logvol_mean == o.dppca_logvol_mean &&
         dppca_logvol_sd == o.dppca_logvol_sd;
}

void validate(const PriorSpec& prior, int q) {
  require(prior.loadings_mean.size() == 0 || prior.loadings_mean.size() == q,
          "prior loadings_mean must have length q");
  if (prior.loadings_cov.size() != 0) {
    const auto& c = prior.loadings_cov;
    require(c.rows() == q && c.cols() == q,
            "prior loadings_cov must be q x q");
    require(c.isApprox(c.transpose(), 1e-12),
            "prior loadings_cov must be symmetric");
    Eigen::LLT<Eigen::MatrixXd> llt(c);
    if (llt.info() != Eigen::Success)
      fail(ErrorKind::DecompositionFailure,
           "prior loadings_cov is not positive definite");
  }
  require(prior.ig_shape > 2.0, "prior ig_shape must exceed 2");
  require(prior.ig_scale > 0.0, "prior ig_scale must be positive");
  require(prior.ppcca_coeff_sd > 0.0, "prior ppcca_coeff_sd must be positive");
  require(prior.dppca_logvol_sd > 0.0,
          "prior dppca_logvol_sd must be positive");
  require(std::isfinite(prior.dppca_logvol_mean),
          "prior dppca_logvol_mean must be finite");
}

int PilotMatrix::count(int label) const {
  int k = 0;
  for (int g : group) k += (g == label);
  return k;
}

void validate(const PilotMatrix& pilot) {
  const auto n = pilot.n();
  if (static_cast<Eigen::Index>(pilot.group.size()) != n)
    fail(ErrorKind::Validation, "group label count differs from row count");
  for (std::size_t i = 0; i < pilot.group.size(); ++i) {
    if (pilot.group[i] != 1 && pilot.group[i] != 2) {
      std::ostringstream os;
      os << "row " << i << ": group label must be 1 or 2, got "
         << pilot.group[i];
      fail(ErrorKind::Validation, os.str());
    }
  }
  const int n1 = pilot.count(1), n2 = pilot.count(2);
  if (n1 < 2 || n2 < 2) {
    std::ostringstream os;
    os << "each group needs at least 2 samples (group 1: " << n1
       << ", group 2: " << n2 << ")";
    fail(ErrorKind::Validation, os.str());
  }
  if (pilot.p() < 1) fail(ErrorKind::Validation, "pilot data has no columns");
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < pilot.p(); ++j)
      if (!std::isfinite(pilot.data(i, j))) {
        std::ostringstream os;
        os << "non-finite intensity at row " << i << ", column " << j;
        fail(ErrorKind::Validation, os.str());
      }
  if (pilot.covariates && pilot.covariates->rows() != n)
    fail(ErrorKind::Validation, "covariate row count differs from row count");
}

bool FittedModel::operator==(const FittedModel& o) const {
  return kind == o.kind && q == o.q && same(mean, o.mean) &&
         same(loadings, o.loadings) && noise_var == o.noise_var &&
         same(coeffs, o.coeffs) && same(covariates, o.covariates);
}

void validate(const FittedModel& fit) {
  require(fit.q >= 1, "fitted model q must be positive");
  require(fit.loadings.cols() == fit.q,
          "fitted loadings column count must equal q");
  require(fit.mean.size() == fit.loadings.rows(),
          "fitted mean length must equal loadings row count");
  require(fit.noise_var >= 0.0 && std::isfinite(fit.noise_var),
          "fitted noise_var must be finite and non-negative");
  if (fit.coeffs) {
    require(fit.coeffs->rows() == fit.q,
            "fitted coeffs must have q rows");
    if (fit.covariates)
      require(fit.coeffs->cols() == fit.covariates->cols() + 1,
              "fitted coeffs must have one column per covariate plus "
              "intercept");
  }
}

}  // namespace metsize
