#pragma once

#include "jointcr/data_model.hpp"
#include "jointcr/params.hpp"
#include "jointcr/posterior.hpp"
#include "jointcr/riskset_scan.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace jointcr {

struct FitOptions {
  int max_iter = 500;
  double tol = 1e-4;
  int threads = 1;
  scan::Engine engine = scan::Engine::scan;
  bool freeze_alpha = false;  // keep every alpha_k at its starting value
  bool compute_se = true;
  std::optional<Params> init;  // default: init_params
  ModeOptions mode;
};

struct FitTimings {
  double e_step_ms = 0.0, m_step_ms = 0.0, se_ms = 0.0, total_ms = 0.0;
};

struct FitResult {
  Params params;
  Eigen::VectorXd se;          // packed Omega order; NaN when unavailable
  Eigen::MatrixXd covariance;  // empty when unavailable
  double fisher_min_eigenvalue = 0.0;
  std::string se_error;        // non-empty when the SEs could not be computed
  int iterations = 0;          // completed M-steps
  // Approximate observed log-likelihood at each iterate that went through an
  // E-step (the starting value first).
  std::vector<double> loglik_trace;
  std::vector<double> max_rel_change;  // convergence statistic per iteration
  bool converged = false;
  FitTimings timings;
  std::uint64_t op_count = 0;  // risk-set work of the scan/naive engine
  // Posteriors of the last E-step, i.e. those that produced `params`.
  std::vector<PosteriorApprox> posteriors;
};

// sum_i [log f(Y_i, T_i, D_i, mode_i) + (q/2) log 2pi + (1/2) log det cov_i].
double approx_observed_loglik(const DesignSet& ds, const Params& p,
                              const std::vector<PosteriorApprox>& post,
                              const std::vector<std::vector<double>>& cumhaz);
double approx_observed_loglik(const DesignSet& ds, const Params& p,
                              const std::vector<PosteriorApprox>& post);

// max_j |a_j - b_j| / (|b_j| + 1e-3) over the packed Omega.
double max_relative_change(const Eigen::VectorXd& next, const Eigen::VectorXd& prev);

FitResult fit(const DesignSet& ds, const FitOptions& opts = {});
FitResult fit(const Dataset& data, const ModelSpec& spec, const FitOptions& opts = {});

inline constexpr int kSchemaVersion = 1;

nlohmann::ordered_json fit_result_to_json(const FitResult& r, const ModelSpec& spec);
// schema_version,parameter,estimate,se,ci_lower,ci_upper (95% Wald).
std::string estimates_csv(const FitResult& r, const ModelSpec& spec);

}  // namespace jointcr
