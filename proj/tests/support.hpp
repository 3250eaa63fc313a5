#pragma once

// Independent numerical oracles and random instance builders shared by the
// unit and acceptance tests. Nothing here calls the estimation code it is
// used to check.

#include "jointcr/data_model.hpp"
#include "jointcr/params.hpp"
#include "jointcr/posterior.hpp"
#include "jointcr/simulate.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

namespace testsupport {

using Fn = std::function<double(const Eigen::VectorXd&)>;

// Gauss-Hermite rule for the weight exp(-x^2) by Golub-Welsch.
struct Rule {
  Eigen::VectorXd nodes, weights;
};
Rule gauss_hermite(int m);

// E[f(b)] for b ~ N(mean, cov) with an m-point tensor Gauss-Hermite rule.
double gh_expect(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& mean,
                 const Eigen::MatrixXd& cov, int m = 20);

Eigen::VectorXd fd_gradient(const Fn& f, const Eigen::VectorXd& x, double h = 1e-5);
Eigen::MatrixXd fd_hessian(const Fn& f, const Eigen::VectorXd& x, double h = 1e-4);
// Jacobian of a vector function by central differences.
Eigen::MatrixXd fd_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& x, double h = 1e-5);

// Maximiser of a unimodal function on [a, b].
double golden_section_max(const std::function<double(double)>& f, double a, double b,
                          double tol = 1e-12);

// Nelder-Mead minimiser with restarts.
Eigen::VectorXd nelder_mead(const Fn& f, Eigen::VectorXd x0, double step = 0.1,
                            double ftol = 1e-14, int max_eval = 200000);

// Adaptive Simpson integral of f on [a, b].
double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double tol = 1e-12, int depth = 50);

// Relative error |a - b| / max(|b|, floor).
double rel_err(double a, double b, double floor = 1e-12);
double max_rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double floor = 1e-12);

// Dense-matrix quantities for one subject.
Eigen::MatrixXd dense_V(const jointcr::SubjectDesign& s, const Eigen::VectorXd& sigma2);

// log f(Y_i, T_i, D_i, b | Psi) from dense stacked matrices; Lambda and the
// hazard jump are looked up by brute force.
double dense_log_joint(const jointcr::SubjectDesign& s, const jointcr::Params& p,
                       const Eigen::VectorXd& b);

// Expected complete-data log-likelihood of one subject under N(mode, cov),
// built from dense matrices (survival part uses the Gaussian MGF directly).
double dense_expected_loglik(const jointcr::SubjectDesign& s, const jointcr::Params& p,
                             const jointcr::PosteriorApprox& pa);

// Exact marginal log-likelihood of the longitudinal data under the LMM.
double lmm_marginal_loglik(const jointcr::DesignSet& ds, const Eigen::VectorXd& beta,
                           const Eigen::VectorXd& sigma2, const Eigen::MatrixXd& Sigma);

// Per-subject profile expected survival log-likelihood of cause k with the
// baseline hazard profiled out by the Breslow formula, computed by direct
// double loops:
//   I(D_i=k){W'g + a'mode_i + log dLambda(T_i)} - Lambda(T_i) w_i.
double profile_survival_loglik_subject(const jointcr::DesignSet& ds,
                                       const std::vector<jointcr::PosteriorApprox>& post,
                                       std::size_t i, int k, const Eigen::VectorXd& gamma,
                                       const Eigen::VectorXd& alpha);

// Breslow-tie Cox partial likelihood MLE by Newton iterations with naive
// risk sets (cause k, 1-based).
Eigen::VectorXd cox_partial_mle(const jointcr::DesignSet& ds, int cause);

// Random small scenario: G biomarkers with (intercept, x1, time) fixed and
// (intercept[, time]) random terms, K causes.
jointcr::ScenarioConfig small_scenario(std::mt19937_64& rng, int n, int G, int K, bool slopes);

// Designs from a small scenario; with `ties` survival times are rounded up
// to a grid of 0.5 so events and censorings tie.
jointcr::DesignSet small_designs(std::uint64_t seed, int n, int G = 2, int K = 2,
                                 bool slopes = true, bool ties = false);

// Random parameters compatible with ds.spec; hazards get random positive
// jumps on the event structure of ds.
jointcr::Params random_params(std::mt19937_64& rng, const jointcr::DesignSet& ds,
                              double alpha_scale = 0.3);

// Random PosteriorApprox per subject.
std::vector<jointcr::PosteriorApprox> random_posteriors(std::mt19937_64& rng, std::size_t n, int q);

// Random SPD matrix with eigenvalues in [lo, hi].
Eigen::MatrixXd random_spd(std::mt19937_64& rng, int q, double lo = 0.2, double hi = 2.0);

}  // namespace testsupport
