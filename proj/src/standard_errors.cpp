#include "jointcr/standard_errors.hpp"

#include "jointcr/error.hpp"
#include "jointcr/parallel.hpp"

#include <cmath>
#include <sstream>

namespace jointcr {

ScoreTables build_score_tables(const DesignSet& ds, const RiskStructure& rs, const Params& p,
                               const std::vector<PosteriorApprox>& post, scan::Engine engine,
                               scan::OpCounter* counter) {
  const auto n = static_cast<Eigen::Index>(ds.n());
  const Eigen::Index pw = ds.spec.w_dim(), q = ds.spec.q_total();
  const Eigen::Index cols = 1 + pw + q;
  ScoreTables out;
  for (int k = 0; k < ds.spec.K(); ++k) {
    CauseScoreTables t;
    t.weight.resize(n);
    scan::RowMatrix a(n, cols);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& s = ds.subjects[static_cast<std::size_t>(i)];
      const auto& pa = post[static_cast<std::size_t>(i)];
      const double w = risk_weight(s, pa, p.gamma[k], p.alpha[k]);
      t.weight(i) = w;
      a(i, 0) = w;
      a.row(i).segment(1, pw) = w * s.W.transpose();
      a.row(i).segment(1 + pw, q) = w * (pa.cov * p.alpha[k] + pa.mode).transpose();
    }
    const BaselineHazard& ev = rs.events[static_cast<std::size_t>(k)];
    if (ev.empty()) {
      t.at_T = scan::RowMatrix::Zero(n, cols);
      t.B = scan::RowMatrix::Zero(n, cols);
      out.causes.push_back(std::move(t));
      continue;
    }
    const auto& sorted = rs.index.sorted_times;
    const scan::RowMatrix S =
        scan::riskset_sums(engine, rs.index.to_sorted(a), sorted, ev.times, counter);
    scan::RowMatrix per_event(S.rows(), cols);
    for (Eigen::Index l = 0; l < S.rows(); ++l) {
      const double s0 = S(l, 0);
      if (!(s0 > 0.0)) throw NumericError("zero risk-set denominator for cause " + std::to_string(k + 1));
      const double d = static_cast<double>(ev.ties[static_cast<std::size_t>(l)]);
      per_event(l, 0) = d / s0;
      per_event.row(l).tail(cols - 1) = (d / (s0 * s0)) * S.row(l).tail(cols - 1);
    }
    t.at_T = rs.index.to_subject(scan::step_lookup(engine, ev.times, S, sorted, counter));
    t.B = rs.index.to_subject(scan::B_lookup(engine, per_event, ev.times, sorted, counter));
    out.causes.push_back(std::move(t));
  }
  return out;
}

Eigen::VectorXd score_vector(std::size_t i, const DesignSet& ds, const Params& p,
                             const std::vector<PosteriorApprox>& post, const ScoreTables& tables) {
  const ModelSpec& spec = ds.spec;
  if (tables.causes.size() != static_cast<std::size_t>(spec.K()))
    throw DataError("score tables missing for some cause");
  const auto lay = omega_layout(spec);
  const auto& s = ds.subjects[i];
  const auto& pa = post[i];
  Eigen::VectorXd out = Eigen::VectorXd::Zero(lay.size);

  for (int g = 0; g < spec.G(); ++g) {
    const auto& blk = s.blocks[g];
    if (blk.n() == 0) continue;
    const int po = spec.p_offset(g), pg = spec.p(g), qo = spec.q_offset(g), qg = spec.q(g);
    const double s2 = p.sigma2(g);
    const Eigen::VectorXd e =
        blk.y - blk.X * p.beta.segment(po, pg) - blk.Z * pa.mode.segment(qo, qg);
    out.segment(lay.beta + po, pg) = blk.X.transpose() * e / s2;
    const double ss = e.squaredNorm() + (blk.ZtZ * pa.cov.block(qo, qo, qg, qg)).trace();
    out(lay.sigma2 + g) = ss / (2.0 * s2 * s2) - static_cast<double>(blk.n()) / (2.0 * s2);
  }

  const Eigen::Index pw = lay.w_dim, q = lay.q;
  for (int k = 0; k < spec.K(); ++k) {
    const auto& t = tables.causes[static_cast<std::size_t>(k)];
    const auto ii = static_cast<Eigen::Index>(i);
    const double w = t.weight(ii);
    const Eigen::VectorXd m = pa.cov * p.alpha[k] + pa.mode;
    Eigen::VectorXd sg = w * (t.B.row(ii).segment(1, pw).transpose() - t.B(ii, 0) * s.W);
    Eigen::VectorXd sa = w * (t.B.row(ii).segment(1 + pw, q).transpose() - t.B(ii, 0) * m);
    if (s.cause == k + 1) {
      const double s0 = t.at_T(ii, 0);
      sg += s.W - t.at_T.row(ii).segment(1, pw).transpose() / s0;
      sa += pa.mode - t.at_T.row(ii).segment(1 + pw, q).transpose() / s0;
    }
    out.segment(lay.gamma_at(k), pw) = sg;
    out.segment(lay.alpha_at(k), q) = sa;
  }

  Eigen::LLT<Eigen::MatrixXd> llt(p.Sigma);
  if (llt.info() != Eigen::Success) throw NumericError("Sigma is not positive definite");
  const Eigen::MatrixXd Si = llt.solve(Eigen::MatrixXd::Identity(q, q));
  const Eigen::MatrixXd A = Si * (pa.cov + pa.mode * pa.mode.transpose()) * Si;
  // (2A - A o I - 2S + S o I)/2: the derivative with respect to the free
  // lower-triangle entries of a symmetric matrix.
  const Eigen::MatrixXd G = 0.5 * (2.0 * A - Eigen::MatrixXd(A.diagonal().asDiagonal()) - 2.0 * Si +
                                   Eigen::MatrixXd(Si.diagonal().asDiagonal()));
  int pos = lay.Sigma;
  for (Eigen::Index c = 0; c < q; ++c)
    for (Eigen::Index r = c; r < q; ++r) out(pos++) = G(r, c);
  return out;
}

Eigen::MatrixXd score_matrix(const DesignSet& ds, const Params& p,
                             const std::vector<PosteriorApprox>& post, const ScoreTables& tables,
                             int threads) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(ds.n()), omega_size(ds.spec));
  parallel_for(ds.n(), threads, [&](std::size_t i) {
    out.row(static_cast<Eigen::Index>(i)) = score_vector(i, ds, p, post, tables).transpose();
  });
  return out;
}

FisherResult empirical_fisher(const Eigen::MatrixXd& scores) {
  if (!scores.allFinite()) throw NumericError("score matrix contains non-finite entries");
  FisherResult f;
  const Eigen::Index d = scores.cols();
  f.information = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index i = 0; i < scores.rows(); ++i)
    f.information.selfadjointView<Eigen::Lower>().rankUpdate(scores.row(i).transpose());
  f.information = f.information.selfadjointView<Eigen::Lower>();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(f.information);
  f.min_eigenvalue = es.eigenvalues().minCoeff();
  const double max_eig = es.eigenvalues().maxCoeff();
  if (!(f.min_eigenvalue > 1e-12 * std::max(max_eig, 1e-300))) {
    std::ostringstream msg;
    msg << "singular empirical Fisher information (min eigenvalue " << f.min_eigenvalue << ")";
    throw NumericError(msg.str());
  }
  f.covariance = es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() *
                 es.eigenvectors().transpose();
  f.covariance = 0.5 * (f.covariance + f.covariance.transpose());
  f.se = f.covariance.diagonal().cwiseSqrt();
  return f;
}

}  // namespace jointcr
