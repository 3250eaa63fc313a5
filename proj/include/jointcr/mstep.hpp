#pragma once

// M-step: closed-form updates for beta, sigma2, Sigma and the Breslow-type
// baseline hazards, plus one damped Newton step for phi_k = (gamma_k, alpha_k).
// Expectations over b_i use the Gaussian posterior approximation.

#include "jointcr/data_model.hpp"
#include "jointcr/params.hpp"
#include "jointcr/posterior.hpp"
#include "jointcr/riskset_scan.hpp"

#include <Eigen/Dense>

#include <vector>

namespace jointcr {

// Subject ordering by observed time and the per-cause event structure; fixed
// for a dataset, shared by every iteration.
struct RiskStructure {
  scan::RiskSetIndex index;
  std::vector<BaselineHazard> events;  // per cause, jumps zero

  static RiskStructure build(const DesignSet& ds);
  int K() const { return static_cast<int>(events.size()); }
};

// Lambda_k(T_i) for every subject (outer index) and cause (inner index).
std::vector<std::vector<double>> cumhaz_by_subject(const RiskStructure& rs,
                                                   const std::vector<BaselineHazard>& hazards,
                                                   scan::Engine engine = scan::Engine::scan,
                                                   scan::OpCounter* counter = nullptr);

// exp(W'gamma + alpha'mode + alpha'cov alpha / 2) = exp(W'gamma) E_i[exp(alpha'b)].
double risk_weight(const SubjectDesign& s, const PosteriorApprox& pa, const Eigen::VectorXd& gamma,
                   const Eigen::VectorXd& alpha);

Eigen::VectorXd update_beta(const DesignSet& ds, const std::vector<PosteriorApprox>& post);
// Uses p.beta as the current fixed effects.
Eigen::VectorXd update_sigma2(const DesignSet& ds, const Params& p,
                              const std::vector<PosteriorApprox>& post);
Eigen::MatrixXd update_Sigma(const std::vector<PosteriorApprox>& post);
// Cause k is 0-based. Uses p.gamma[k], p.alpha[k].
BaselineHazard update_baseline_hazard(const DesignSet& ds, const RiskStructure& rs, const Params& p,
                                      const std::vector<PosteriorApprox>& post, int k,
                                      scan::Engine engine = scan::Engine::scan,
                                      scan::OpCounter* counter = nullptr);

// Expected survival log-likelihood summand of cause k with the cumulative
// hazard values held fixed:
//   sum_i I(D_i=k)(W_i'gamma + alpha'mode_i) - Lambda_k(T_i) exp(W_i'gamma) M_i(alpha).
double expected_survival_loglik(const DesignSet& ds, const std::vector<PosteriorApprox>& post,
                                std::span<const double> cumhaz_k, int k,
                                const Eigen::VectorXd& gamma, const Eigen::VectorXd& alpha);

struct PhiSystem {
  Eigen::VectorXd score;        // (S_gamma, S_alpha)
  Eigen::MatrixXd information;  // [[I_gamma, I_gamma_alpha], [., I_alpha]]
};
PhiSystem phi_system(const DesignSet& ds, const std::vector<PosteriorApprox>& post,
                     std::span<const double> cumhaz_k, int k, const Eigen::VectorXd& gamma,
                     const Eigen::VectorXd& alpha);

struct PhiUpdate {
  Eigen::VectorXd gamma, alpha;
  PhiSystem system;  // at the starting point
  int halvings = 0;
  bool ridged = false;
};

// One Newton step from (p.gamma[k], p.alpha[k]) using p.hazards[k]. With
// freeze_alpha only gamma moves.
PhiUpdate update_phi(const DesignSet& ds, const RiskStructure& rs, const Params& p,
                     const std::vector<PosteriorApprox>& post, int k, bool freeze_alpha = false,
                     scan::Engine engine = scan::Engine::scan, scan::OpCounter* counter = nullptr);

struct MStepOptions {
  bool freeze_alpha = false;
  scan::Engine engine = scan::Engine::scan;
};

// beta -> sigma2 -> Sigma -> Lambda_k -> phi_k, each step seeing the fresh values.
Params m_step(const DesignSet& ds, const RiskStructure& rs, const Params& p,
              const std::vector<PosteriorApprox>& post, const MStepOptions& opts = {},
              scan::OpCounter* counter = nullptr);

}  // namespace jointcr
