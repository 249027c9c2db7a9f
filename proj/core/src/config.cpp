#include "metsize/config.hpp"

#include <cmath>
#include <sstream>

#include "metsize/error.hpp"

namespace metsize {

std::vector<FieldError> check(const EstimationConfig& c) {
  std::vector<FieldError> errors;
  auto add = [&](const char* field, std::string msg) {
    errors.push_back({field, std::move(msg)});
  };

  if (c.model.q < 1) add("q", "must be a positive integer");
  if (c.model.kind == ModelKind::PPCCA && c.model.n_covariates < 1)
    add("covariates", "PPCCA requires at least one covariate");
  if (c.model.kind != ModelKind::PPCCA && c.model.n_covariates != 0)
    add("covariates", "covariates are only valid with the PPCCA model");
  if (c.p < 2) add("p", "must be an integer >= 2");
  if (c.model.q >= 1 && c.p <= c.model.q)
    add("p", "must exceed the latent dimension q");
  if (!(c.m > 0.0 && c.m < 1.0))
    add("m", "must lie in the open interval (0, 1)");
  else if (c.p >= 1 && std::lround(c.m * c.p) < 1)
    add("m", "m * p must round to at least one planted metabolite");
  if (!(c.target_fdr > 0.0 && c.target_fdr < 1.0))
    add("target_fdr", "must lie in the open interval (0, 1)");
  if (c.group_ratio.group1 < 1 || c.group_ratio.group2 < 1)
    add("group_ratio", "both parts must be positive integers");
  if (c.n_min < 4) add("n_min", "must be at least 4");
  if (c.grid_step < 1) add("grid_step", "must be a positive integer");
  if (c.group_ratio.group1 >= 1 && c.group_ratio.group2 >= 1) {
    const int r = c.group_ratio.total();
    if (c.n_min % r != 0)
      add("n_min", "must be divisible by the group ratio total " +
                       std::to_string(r));
    else if (c.n_min / r * std::min(c.group_ratio.group1,
                                    c.group_ratio.group2) < 2)
      add("n_min", "smallest group must have at least 2 samples");
    if (c.grid_step >= 1 && c.grid_step % r != 0)
      add("grid_step", "must be divisible by the group ratio total " +
                           std::to_string(r));
  }
  if (c.grid_step >= 1 && c.n_max < c.n_min + 2 * c.grid_step)
    add("n_max", "must be at least n_min + 2 * grid_step");
  if (c.permutations < 1) add("permutations", "must be a positive integer");
  if (c.simulations < 1) add("simulations", "must be a positive integer");
  if (!(c.delta > 0.0) || !std::isfinite(c.delta))
    add("delta", "must be a positive finite number");
  if (c.threads < 0) add("threads", "must be non-negative");

  if (const auto* draws = std::get_if<PriorDraws>(&c.source)) {
    try {
      validate(draws->prior, c.model.q);
    } catch (const Error& e) {
      add("prior", e.what());
    }
  } else {
    const auto& fit = std::get<FittedPilot>(c.source).fit;
    try {
      validate(fit);
      if (fit.p() != c.p)
        add("p", "must equal the fitted model's variable count " +
                     std::to_string(fit.p()));
      if (fit.kind != c.model.kind)
        add("fitted", "fitted model kind differs from the configured model");
      if (fit.kind == ModelKind::PPCCA && (!fit.coeffs || !fit.covariates))
        add("fitted", "PPCCA fit needs coeffs and covariates");
    } catch (const Error& e) {
      add("fitted", e.what());
    }
  }
  return errors;
}

void validate(const EstimationConfig& config) {
  const auto errors = check(config);
  if (errors.empty()) return;
  std::ostringstream os;
  os << "invalid configuration:";
  for (const auto& e : errors) os << " " << e.field << ": " << e.message << ";";
  fail(ErrorKind::Validation, os.str());
}

int planted_count(double m, int p) {
  const long k = std::lround(m * p);
  require(k >= 1, "m * p rounds to zero planted metabolites");
  return static_cast<int>(k);
}

}  // namespace metsize
