#pragma once

#include "jointcr/data_model.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <string>
#include <vector>

namespace jointcr {

// Cumulative baseline hazard of one cause as a right-continuous step function.
// Event times are the distinct uncensored times of that cause, stored in
// strictly decreasing order (the order the risk-set scans walk them).
struct BaselineHazard {
  std::vector<double> times;  // t_1 > t_2 > ... > t_m
  std::vector<double> jumps;  // hazard increment at each time, > 0
  std::vector<int> ties;      // number of failures at each time

  std::size_t size() const { return times.size(); }
  bool empty() const { return times.empty(); }
  // Lambda(t_l) for every event time, same (decreasing) order.
  std::vector<double> cumulative() const;
  void validate() const;
};

// Sum of jumps at event times <= t.
double cum_hazard_at(const BaselineHazard& h, double t);

// Distinct event times (decreasing) and tie counts of cause k (1-based) with
// all jumps zero-initialised.
BaselineHazard event_structure(const DesignSet& ds, int cause);

struct Params {
  Eigen::VectorXd beta;               // stacked beta_1..beta_G
  Eigen::VectorXd sigma2;             // per-biomarker residual variances
  Eigen::MatrixXd Sigma;              // q x q random-effects covariance
  std::vector<Eigen::VectorXd> gamma; // K survival coefficient vectors
  std::vector<Eigen::VectorXd> alpha; // K association vectors, length q each
  std::vector<BaselineHazard> hazards;

  // Throws DataError when dimensions disagree with spec or sigma2/Sigma are not
  // positive (definite).
  void validate(const ModelSpec& spec) const;
};

inline constexpr double kSigma2Floor = 1e-8;
inline constexpr double kEigenFloor = 1e-10;

// Symmetrises and raises eigenvalues below kEigenFloor to kEigenFloor.
Eigen::MatrixXd floor_eigenvalues(const Eigen::MatrixXd& m, double floor = kEigenFloor);

// Packed layout of the parametric component Omega, in this order:
//   beta (p_total), sigma2 (G), gamma_1..gamma_K (w_dim each),
//   alpha_1..alpha_K (q each), Sigma lower triangle column by column
//   ((0,0),(1,0),...,(q-1,0),(1,1),...) with q(q+1)/2 entries.
std::size_t omega_size(const ModelSpec& spec);
Eigen::VectorXd pack_omega(const Params& p, const ModelSpec& spec);
// Fills every component except the baseline hazards.
Params unpack_omega(const Eigen::VectorXd& v, const ModelSpec& spec);
// Human-readable names in packed order (beta_1_intercept, Sigma_2_1, ...).
std::vector<std::string> omega_names(const ModelSpec& spec);
// Offsets of each block inside the packed vector.
struct OmegaLayout {
  int beta = 0, sigma2 = 0, gamma = 0, alpha = 0, Sigma = 0, size = 0;
  int w_dim = 0, q = 0;
  int gamma_at(int k) const { return gamma + k * w_dim; }
  int alpha_at(int k) const { return alpha + k * q; }
};
OmegaLayout omega_layout(const ModelSpec& spec);

// Per-biomarker pooled OLS for beta and sigma2, Sigma = pooled residual
// variance times identity, gamma = alpha = 0, Nelson-Aalen hazards.
Params init_params(const DesignSet& ds);

nlohmann::ordered_json params_to_json(const Params& p);
Params params_from_json(const nlohmann::json& j);

}  // namespace jointcr
