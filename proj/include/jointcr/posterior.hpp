#pragma once

// E-step: Gaussian approximation N(mode, cov) of each subject's random-effects
// posterior and the closed-form exponential moments taken under it.

#include "jointcr/data_model.hpp"
#include "jointcr/params.hpp"

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace jointcr {

struct PosteriorApprox {
  Eigen::VectorXd mode;
  Eigen::MatrixXd cov;
  int newton_steps = 0;
};

struct LogDensity {
  double value = 0.0;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;
};

// b-dependent part of log f(Y_i, T_i, D_i, b | Psi) for one subject:
//   -1/2 sum_g |r_g - Z_g b_g|^2 / sigma2_g + sum_k I(D_i = k) alpha_k'b
//   - sum_k Lambda_k(T_i) exp(W_i'gamma_k + alpha_k'b) - 1/2 b'Sigma^{-1} b
// with r_g = y_g - X_g beta_g. Everything independent of b is folded in at
// construction; the quadratic part is kept as b'Ab, a'b.
class ConditionalDensity {
 public:
  // cumhaz holds Lambda_k(T_i) for k = 1..K.
  ConditionalDensity(const SubjectDesign& s, const Params& p, const Eigen::MatrixXd& Sigma_inv,
                     std::span<const double> cumhaz);

  // Throws OverflowError when some W'gamma_k + alpha_k'b with Lambda_k > 0
  // exceeds kMaxExponent.
  LogDensity evaluate(const Eigen::VectorXd& b) const;
  double value(const Eigen::VectorXd& b) const;
  Eigen::Index dim() const { return precision_.rows(); }

 private:
  Eigen::MatrixXd precision_;  // Z'V^{-1}Z + Sigma^{-1}
  Eigen::VectorXd linear_;     // Z'V^{-1}r + sum_k I(D=k) alpha_k
  double constant_ = 0.0;      // -1/2 r'V^{-1}r
  std::vector<Eigen::VectorXd> alpha_;
  std::vector<double> cumhaz_;
  std::vector<double> w_gamma_;
};

LogDensity complete_logdensity_in_b(const SubjectDesign& s, const Params& p,
                                    std::span<const double> cumhaz, const Eigen::VectorXd& b);
// Same, with Lambda_k(T_i) looked up directly in p.hazards.
LogDensity complete_logdensity_in_b(const SubjectDesign& s, const Params& p,
                                    const Eigen::VectorXd& b);

struct ModeOptions {
  double grad_tol = 1e-8;
  int max_iter = 100;
  int max_halvings = 30;
  double ridge = 1e-8;
};

// Damped Newton ascent from b_init; cov is the inverse negated Hessian at the mode.
PosteriorApprox posterior_mode(const ConditionalDensity& f, const Eigen::VectorXd& b_init,
                               const ModeOptions& opts = {});

// E[exp(alpha'b)] = exp(alpha'mode + alpha'cov alpha / 2).
double mgf_exp(const PosteriorApprox& pa, const Eigen::VectorXd& alpha);
// E[b exp(alpha'b)] = mgf * (cov alpha + mode).
Eigen::VectorXd mgf_exp_b(const PosteriorApprox& pa, const Eigen::VectorXd& alpha);
// E[b b' exp(alpha'b)] = mgf * ((cov alpha + mode)(cov alpha + mode)' + cov).
Eigen::MatrixXd mgf_exp_bbT(const PosteriorApprox& pa, const Eigen::VectorXd& alpha);

// log f(Y_i, T_i, D_i, b | Psi) including every constant; jump_at_T is
// Delta Lambda_{D_i}(T_i) (ignored when censored).
double full_log_density(const SubjectDesign& s, const Params& p, const Eigen::MatrixXd& Sigma_inv,
                        double log_det_Sigma, std::span<const double> cumhaz, double jump_at_T,
                        const Eigen::VectorXd& b);

// Posterior approximations for every subject, warm-started from `previous`
// (pass an empty vector to start at zero). cumhaz is n x K by subject.
std::vector<PosteriorApprox> run_e_step(const DesignSet& ds, const Params& p,
                                        const std::vector<std::vector<double>>& cumhaz,
                                        const std::vector<PosteriorApprox>& previous,
                                        int threads = 1, const ModeOptions& opts = {});

}  // namespace jointcr
