#pragma once

// Data generator for joint longitudinal / competing-risks scenarios.
//
// Subject covariates are x1 ~ Bernoulli(x1_prob) and x2 ~ Uniform(x2_range);
// design terms may use intercept, time, x1 and x2. Biomarkers are measured on
// the grid 0, h, 2h, ... up to the observed time; latent cause-specific times
// are exponential given (x, b) (constant baseline hazards); censoring is
// uniform. Each subject draws from its own Philox stream (seed, subject), so
// output is identical for any thread count.

#include "jointcr/data_model.hpp"
#include "jointcr/params.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace jointcr {

struct BiomarkerTruth {
  std::vector<Term> fixed;
  std::vector<Term> random;
  Eigen::VectorXd beta;  // aligned with fixed
  double sigma2 = 1.0;
};

struct ScenarioConfig {
  int n = 800;
  std::vector<BiomarkerTruth> biomarkers;
  std::vector<Term> survival;
  Eigen::MatrixXd Sigma;
  std::vector<Eigen::VectorXd> gamma;  // per cause, aligned with survival
  std::vector<Eigen::VectorXd> alpha;  // per cause, length q
  std::vector<double> lambda0;         // constant baseline hazard per cause
  double x1_prob = 0.5;
  double x2_low = -5.0, x2_high = 5.0;
  double censor_low = 4.0, censor_high = 8.0;
  double visit_step = 0.7;

  int K() const { return static_cast<int>(lambda0.size()); }
  ModelSpec spec() const;
  // Parametric truth; hazards hold no jumps (the truth is lambda0_k * t).
  Params truth() const;
  void validate() const;

  static ScenarioConfig parse(const std::string& text);
  static ScenarioConfig load(const std::filesystem::path& path);
  std::string to_text() const;
};

// Five biomarkers with fixed terms (intercept, x1, x2, time) and random
// (intercept, time), q = 10, Sigma = I, two causes with hazards 0.05, 0.025.
ScenarioConfig default_scenario();

Dataset generate(const ScenarioConfig& scn, std::uint64_t seed, int threads = 1);

}  // namespace jointcr
