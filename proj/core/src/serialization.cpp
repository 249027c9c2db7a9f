#include "metsize/serialization.hpp"

#include "metsize/error.hpp"

namespace metsize {

using nlohmann::json;

namespace {

json row_major(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out.push_back(m(i, j));
  return out;
}

json nested(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    out.push_back(std::move(row));
  }
  return out;
}

json vector_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

[[noreturn]] void bad_field(const std::string& field, const std::string& why) {
  fail(ErrorKind::Validation, field + ": " + why);
}

const json& member(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key))
    bad_field(key, "required field is missing");
  return j.at(key);
}

double number(const json& v, const std::string& field) {
  if (!v.is_number()) bad_field(field, "expected a number");
  return v.get<double>();
}

long long integer(const json& v, const std::string& field) {
  if (!v.is_number_integer()) bad_field(field, "expected an integer");
  return v.get<long long>();
}

Eigen::VectorXd vector_from(const json& v, const std::string& field) {
  if (!v.is_array()) bad_field(field, "expected an array of numbers");
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i)
    out(static_cast<Eigen::Index>(i)) = number(v[i], field);
  return out;
}

Eigen::MatrixXd row_major_from(const json& v, Eigen::Index cols,
                               const std::string& field) {
  const Eigen::VectorXd flat = vector_from(v, field);
  if (cols <= 0 || flat.size() % cols != 0)
    bad_field(field, "length is not a multiple of the column count");
  const Eigen::Index rows = flat.size() / cols;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = flat(i * cols + j);
  return m;
}

Eigen::MatrixXd nested_from(const json& v, const std::string& field) {
  if (!v.is_array()) bad_field(field, "expected an array of rows");
  if (v.empty()) return {};
  const std::size_t cols = v[0].is_array() ? v[0].size() : 0;
  Eigen::MatrixXd m(static_cast<Eigen::Index>(v.size()),
                    static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_array() || v[i].size() != cols)
      bad_field(field, "rows must be arrays of equal length");
    for (std::size_t j = 0; j < cols; ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          number(v[i][j], field);
  }
  return m;
}

}  // namespace

json to_json(const FittedModel& fit) {
  json j;
  j["kind"] = to_string(fit.kind);
  j["q"] = fit.q;
  j["mean"] = vector_json(fit.mean);
  j["loadings"] = row_major(fit.loadings);
  j["noise_var"] = fit.noise_var;
  j["coeffs"] = fit.coeffs ? row_major(*fit.coeffs) : json(nullptr);
  j["covariates"] = fit.covariates ? nested(*fit.covariates) : json(nullptr);
  return j;
}

FittedModel fitted_model_from_json(const json& j) {
  FittedModel fit;
  const json& kind = member(j, "kind");
  if (!kind.is_string()) bad_field("kind", "expected a model name");
  fit.kind = parse_model_kind(kind.get<std::string>());
  fit.q = static_cast<int>(integer(member(j, "q"), "q"));
  if (fit.q < 1) bad_field("q", "must be positive");
  fit.mean = vector_from(member(j, "mean"), "mean");
  fit.loadings = row_major_from(member(j, "loadings"), fit.q, "loadings");
  if (fit.loadings.rows() != fit.mean.size())
    bad_field("loadings", "must have one row per mean entry");
  fit.noise_var = number(member(j, "noise_var"), "noise_var");
  if (j.contains("coeffs") && !j["coeffs"].is_null()) {
    const Eigen::VectorXd flat = vector_from(j["coeffs"], "coeffs");
    if (flat.size() % fit.q != 0)
      bad_field("coeffs", "length must be a multiple of q");
    fit.coeffs = row_major_from(j["coeffs"], flat.size() / fit.q, "coeffs");
  }
  if (j.contains("covariates") && !j["covariates"].is_null())
    fit.covariates = nested_from(j["covariates"], "covariates");
  validate(fit);
  return fit;
}

json to_json(const PriorSpec& prior) {
  json j;
  j["loadings_mean"] = prior.loadings_mean.size() == 0
                           ? json(nullptr)
                           : vector_json(prior.loadings_mean);
  j["loadings_cov"] = prior.loadings_cov.size() == 0
                          ? json(nullptr)
                          : nested(prior.loadings_cov);
  j["ig_shape"] = prior.ig_shape;
  j["ig_scale"] = prior.ig_scale;
  j["ppcca_coeff_sd"] = prior.ppcca_coeff_sd;
  j["dppca_logvol_mean"] = prior.dppca_logvol_mean;
  j["dppca_logvol_sd"] = prior.dppca_logvol_sd;
  return j;
}

PriorSpec prior_from_json(const json& j) {
  if (!j.is_object()) bad_field("prior", "expected an object");
  PriorSpec prior;
  if (j.contains("loadings_mean") && !j["loadings_mean"].is_null())
    prior.loadings_mean = vector_from(j["loadings_mean"], "prior.loadings_mean");
  if (j.contains("loadings_cov") && !j["loadings_cov"].is_null())
    prior.loadings_cov = nested_from(j["loadings_cov"], "prior.loadings_cov");
  auto opt = [&](const char* key, double& dst) {
    if (j.contains(key)) dst = number(j[key], std::string("prior.") + key);
  };
  opt("ig_shape", prior.ig_shape);
  opt("ig_scale", prior.ig_scale);
  opt("ppcca_coeff_sd", prior.ppcca_coeff_sd);
  opt("dppca_logvol_mean", prior.dppca_logvol_mean);
  opt("dppca_logvol_sd", prior.dppca_logvol_sd);
  return prior;
}

json to_json(const EstimationConfig& c) {
  json j;
  j["model"] = to_string(c.model.kind);
  j["covariates"] = c.model.n_covariates;
  j["q"] = c.model.q;
  j["p"] = c.p;
  j["m"] = c.m;
  j["target_fdr"] = c.target_fdr;
  j["n_min"] = c.n_min;
  j["n_max"] = c.n_max;
  j["grid_step"] = c.grid_step;
  j["group_ratio"] = {c.group_ratio.group1, c.group_ratio.group2};
  j["permutations"] = c.permutations;
  j["simulations"] = c.simulations;
  j["delta"] = c.delta;
  j["seed"] = c.seed;
  j["full_grid"] = c.full_grid;
  if (const auto* draws = std::get_if<PriorDraws>(&c.source)) {
    j["source"] = "prior";
    j["prior"] = to_json(draws->prior);
  } else {
    j["source"] = "fitted";
    j["fitted"] = to_json(std::get<FittedPilot>(c.source).fit);
  }
  return j;
}

EstimationConfig config_from_json(const json& j, EstimationConfig c) {
  if (!j.is_object()) bad_field("config", "expected a JSON object");
  auto get_int = [&](const char* key, int& dst) {
    if (j.contains(key)) dst = static_cast<int>(integer(j[key], key));
  };
  auto get_num = [&](const char* key, double& dst) {
    if (j.contains(key)) dst = number(j[key], key);
  };
  if (j.contains("model")) {
    if (!j["model"].is_string()) bad_field("model", "expected a model name");
    try {
      c.model.kind = parse_model_kind(j["model"].get<std::string>());
    } catch (const Error& e) {
      bad_field("model", e.what());
    }
  }
  get_int("covariates", c.model.n_covariates);
  get_int("q", c.model.q);
  get_int("p", c.p);
  get_num("m", c.m);
  get_num("target_fdr", c.target_fdr);
  get_int("n_min", c.n_min);
  get_int("n_max", c.n_max);
  get_int("grid_step", c.grid_step);
  if (j.contains("group_ratio")) {
    const json& r = j["group_ratio"];
    if (!r.is_array() || r.size() != 2)
      bad_field("group_ratio", "expected [group1, group2]");
    c.group_ratio.group1 = static_cast<int>(integer(r[0], "group_ratio"));
    c.group_ratio.group2 = static_cast<int>(integer(r[1], "group_ratio"));
  }
  get_int("permutations", c.permutations);
  get_int("simulations", c.simulations);
  get_num("delta", c.delta);
  if (j.contains("seed")) {
    const json& s = j["seed"];
    if (s.is_number_unsigned())
      c.seed = s.get<std::uint64_t>();
    else if (s.is_number_integer() && s.get<long long>() >= 0)
      c.seed = static_cast<std::uint64_t>(s.get<long long>());
    else
      bad_field("seed", "expected a non-negative integer");
  }
  if (j.contains("full_grid")) {
    if (!j["full_grid"].is_boolean()) bad_field("full_grid", "expected a boolean");
    c.full_grid = j["full_grid"].get<bool>();
  }
  get_int("threads", c.threads);

  std::string source = std::holds_alternative<FittedPilot>(c.source) ? "fitted"
                                                                      : "prior";
  if (j.contains("source")) {
    if (!j["source"].is_string()) bad_field("source", "expected prior or fitted");
    source = j["source"].get<std::string>();
  } else if (j.contains("fitted")) {
    source = "fitted";
  }
  if (source == "prior") {
    PriorSpec prior = std::holds_alternative<PriorDraws>(c.source)
                          ? std::get<PriorDraws>(c.source).prior
                          : PriorSpec{};
    if (j.contains("prior")) prior = prior_from_json(j["prior"]);
    c.source = PriorDraws{prior};
  } else if (source == "fitted") {
    if (j.contains("fitted")) {
      try {
        c.source = FittedPilot{fitted_model_from_json(j["fitted"])};
      } catch (const Error& e) {
        bad_field("fitted", e.what());
      }
    } else if (!std::holds_alternative<FittedPilot>(c.source)) {
      bad_field("fitted", "source 'fitted' requires a fitted model");
    }
  } else {
    bad_field("source", "expected prior or fitted");
  }
  return c;
}

json to_json(const FdrCurvePoint& pt) {
  return {{"n", pt.n},         {"n1", pt.n1},       {"n2", pt.n2},
          {"fdr10", pt.fdr10}, {"fdr50", pt.fdr50}, {"fdr90", pt.fdr90}};
}

json to_json(const SampleSizeResult& r) {
  json j;
  j["schema_version"] = kSchemaVersion;
  if (r.n_hat) {
    j["n_hat"] = *r.n_hat;
    j["n1_hat"] = r.n1_hat;
    j["n2_hat"] = r.n2_hat;
    j["reason"] = nullptr;
  } else {
    j["n_hat"] = nullptr;
    j["n1_hat"] = nullptr;
    j["n2_hat"] = nullptr;
    j["reason"] = r.reason;
  }
  j["converged"] = r.converged;
  json curve = json::array();
  for (const auto& pt : r.curve) curve.push_back(to_json(pt));
  j["curve"] = std::move(curve);
  const auto& d = r.diagnostics;
  j["diagnostics"] = {{"grid_exhausted", d.grid_exhausted},
                      {"early_stopped", d.early_stopped},
                      {"points_evaluated", d.points_evaluated},
                      {"grid_size", d.grid_size},
                      {"seed", d.seed}};
  j["config"] = to_json(r.config);
  return j;
}

SampleSizeResult result_from_json(const json& j) {
  const long long version = integer(member(j, "schema_version"), "schema_version");
  if (version != kSchemaVersion)
    bad_field("schema_version", "unsupported version " + std::to_string(version));
  SampleSizeResult r;
  const json& n_hat = member(j, "n_hat");
  if (n_hat.is_null()) {
    const json& reason = member(j, "reason");
    if (!reason.is_string()) bad_field("reason", "expected a string");
    r.reason = reason.get<std::string>();
  } else {
    r.n_hat = static_cast<int>(integer(n_hat, "n_hat"));
    r.n1_hat = static_cast<int>(integer(member(j, "n1_hat"), "n1_hat"));
    r.n2_hat = static_cast<int>(integer(member(j, "n2_hat"), "n2_hat"));
  }
  const json& converged = member(j, "converged");
  if (!converged.is_boolean()) bad_field("converged", "expected a boolean");
  r.converged = converged.get<bool>();
  const json& curve = member(j, "curve");
  if (!curve.is_array()) bad_field("curve", "expected an array");
  for (const auto& pt : curve) {
    FdrCurvePoint p;
    p.n = static_cast<int>(integer(member(pt, "n"), "curve.n"));
    p.n1 = static_cast<int>(integer(member(pt, "n1"), "curve.n1"));
    p.n2 = static_cast<int>(integer(member(pt, "n2"), "curve.n2"));
    p.fdr10 = number(member(pt, "fdr10"), "curve.fdr10");
    p.fdr50 = number(member(pt, "fdr50"), "curve.fdr50");
    p.fdr90 = number(member(pt, "fdr90"), "curve.fdr90");
    r.curve.push_back(p);
  }
  const json& d = member(j, "diagnostics");
  r.diagnostics.grid_exhausted = member(d, "grid_exhausted").get<bool>();
  r.diagnostics.early_stopped = member(d, "early_stopped").get<bool>();
  r.diagnostics.points_evaluated =
      static_cast<int>(integer(member(d, "points_evaluated"), "points_evaluated"));
  r.diagnostics.grid_size =
      static_cast<int>(integer(member(d, "grid_size"), "grid_size"));
  r.diagnostics.seed = member(d, "seed").get<std::uint64_t>();
  r.config = config_from_json(member(j, "config"));
  return r;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace metsize
