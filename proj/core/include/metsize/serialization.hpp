#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "metsize/config.hpp"
#include "metsize/model.hpp"
#include "metsize/size_search.hpp"

namespace metsize {

inline constexpr int kSchemaVersion = 1;

// FittedModel: {kind, q, mean, loadings (row-major), noise_var, coeffs,
// covariates}. coeffs/covariates are null when absent.
nlohmann::json to_json(const FittedModel& fit);
FittedModel fitted_model_from_json(const nlohmann::json& j);

nlohmann::json to_json(const PriorSpec& prior);
PriorSpec prior_from_json(const nlohmann::json& j);

nlohmann::json to_json(const EstimationConfig& config);

// Missing keys keep their defaults. Throws Validation naming the field on
// type errors. Range checks are left to check()/validate().
EstimationConfig config_from_json(const nlohmann::json& j,
                                  EstimationConfig base = {});

nlohmann::json to_json(const FdrCurvePoint& point);
nlohmann::json to_json(const SampleSizeResult& result);
SampleSizeResult result_from_json(const nlohmann::json& j);

// Stable text form used for every artifact (2-space indent, trailing
// newline).
std::string dump(const nlohmann::json& j);

}  // namespace metsize
