#pragma once

// Standard errors for Omega from per-subject profile scores and the
// empirical Fisher information sum_i s_i s_i'.

#include "jointcr/data_model.hpp"
#include "jointcr/mstep.hpp"
#include "jointcr/params.hpp"
#include "jointcr/posterior.hpp"
#include "jointcr/riskset_scan.hpp"

#include <Eigen/Dense>

#include <vector>

namespace jointcr {

// Risk-set aggregates of one cause, already mapped back to subjects.
//   weight(i)   = exp(W_i'gamma) M_i(alpha)
//   at_T.row(i) = (S0, S1_W, S1_b) over R(T_i), only used when D_i = k
//   B.row(i)    = sum_{t_l <= T_i} d_l (1/S0_l, S1_W,l/S0_l^2, S1_b,l/S0_l^2)
// with S1_b,l = sum_{R(t_l)} exp(W_r'gamma) M_r (cov_r alpha + mode_r).
struct CauseScoreTables {
  Eigen::VectorXd weight;
  scan::RowMatrix at_T;
  scan::RowMatrix B;
};

struct ScoreTables {
  std::vector<CauseScoreTables> causes;
};

ScoreTables build_score_tables(const DesignSet& ds, const RiskStructure& rs, const Params& p,
                               const std::vector<PosteriorApprox>& post,
                               scan::Engine engine = scan::Engine::scan,
                               scan::OpCounter* counter = nullptr);

// Packed Omega-length score of subject i (same layout as pack_omega).
Eigen::VectorXd score_vector(std::size_t i, const DesignSet& ds, const Params& p,
                             const std::vector<PosteriorApprox>& post, const ScoreTables& tables);

// n x |Omega|, one row per subject.
Eigen::MatrixXd score_matrix(const DesignSet& ds, const Params& p,
                             const std::vector<PosteriorApprox>& post, const ScoreTables& tables,
                             int threads = 1);

struct FisherResult {
  Eigen::MatrixXd information;  // sum_i s_i s_i'
  Eigen::MatrixXd covariance;
  Eigen::VectorXd se;
  double min_eigenvalue = 0.0;
};

// Throws NumericError (quoting the minimum eigenvalue) when the Gram matrix
// is singular or not finite.
FisherResult empirical_fisher(const Eigen::MatrixXd& scores);

}  // namespace jointcr
