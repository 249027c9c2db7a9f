#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "metsize/model.hpp"

namespace metsize {

struct GroupRatio {
  int group1 = 1;
  int group2 = 1;

  int total() const { return group1 + group2; }
  bool operator==(const GroupRatio&) const = default;
};

struct PriorDraws {
  PriorSpec prior;
  bool operator==(const PriorDraws&) const = default;
};

struct FittedPilot {
  FittedModel fit;
  bool operator==(const FittedPilot&) const = default;
};

using DataSource = std::variant<PriorDraws, FittedPilot>;

/// Everything a sample-size run depends on.
struct EstimationConfig {
  AnalysisModel model;
  int p = 200;
  double m = 0.2;
  double target_fdr = 0.05;
  int n_min = 4;
  GroupRatio group_ratio;
  int grid_step = 2;
  int n_max = 200;
  int permutations = 20;  // T
  int simulations = 20;   // SIM
  double delta = 2.3;
  std::uint64_t seed = 0;
  bool full_grid = false;
  int threads = 0;  // 0 = hardware concurrency; never affects results
  DataSource source = PriorDraws{};

  bool operator==(const EstimationConfig&) const = default;
};

struct FieldError {
  std::string field;
  std::string message;
};

// Every rule violation, keyed by config field name.
std::vector<FieldError> check(const EstimationConfig& config);

// Throws Validation listing all violations.
void validate(const EstimationConfig& config);

// p_o = round(m p); InvalidArgument when that rounds to zero.
int planted_count(double m, int p);

}  // namespace metsize
