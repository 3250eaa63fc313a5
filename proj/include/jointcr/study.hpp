#pragma once

// Monte Carlo replicate studies: generate -> fit -> summarise bias, empirical
// SD, median SE and Wald coverage for every parametric component.

#include "jointcr/em_driver.hpp"
#include "jointcr/simulate.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace jointcr {

struct ReplicateOutcome {
  int replicate = 0;
  std::uint64_t seed = 0;
  bool ok = false;  // fit converged and produced finite SEs
  std::string error;
  Eigen::VectorXd estimate, se;
  int iterations = 0;
  double wall_ms = 0.0;
};

struct StudyRow {
  std::string parameter;
  double truth = 0.0;
  double bias = 0.0;       // mean(estimate) - truth
  double sd = 0.0;         // empirical SD; NaN with fewer than two replicates
  double median_se = 0.0;
  double coverage = 0.0;   // fraction of 95% Wald intervals containing truth
  double mcse = 0.0;       // Monte Carlo SE of the bias, sd / sqrt(R)
  int replicates = 0;
};

struct StudyOptions {
  int replicates = 100;
  std::uint64_t seed = 1;
  int threads = 1;  // replicates run concurrently; each fit is single-threaded
  FitOptions fit;
};

struct StudyResult {
  std::vector<ReplicateOutcome> outcomes;
  std::vector<StudyRow> rows;
  int failures = 0;
};

// Seed of replicate r, mixed through Philox so nearby study seeds do not share data.
std::uint64_t replicate_seed(std::uint64_t seed, int r);

std::vector<StudyRow> summarize(const std::vector<ReplicateOutcome>& outcomes,
                                const Eigen::VectorXd& truth, const std::vector<std::string>& names);

StudyResult run_study(const ScenarioConfig& scn, const StudyOptions& opts,
                      const std::function<void(const ReplicateOutcome&)>& on_done = {});

// schema_version,parameter,truth,bias,sd,median_se,cp,mcse,replicates,failures
std::string study_csv(const StudyResult& r);

}  // namespace jointcr
