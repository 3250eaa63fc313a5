#include "jointcr/mstep.hpp"

#include "jointcr/error.hpp"

#include <cmath>
#include <limits>

namespace jointcr {

namespace {

constexpr double kPhiRidge = 1e-8;
constexpr double kPhiMinEig = 1e-10;
constexpr int kPhiHalvings = 10;

scan::RowMatrix column(const std::vector<double>& v) {
  scan::RowMatrix m(static_cast<Eigen::Index>(v.size()), 1);
  for (std::size_t i = 0; i < v.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = v[i];
  return m;
}

std::vector<double> cumhaz_for_cause(const RiskStructure& rs, const BaselineHazard& h,
                                     scan::Engine engine, scan::OpCounter* counter) {
  return rs.index.to_subject(scan::cumhazard(engine, h, rs.index.sorted_times, counter));
}

}  // namespace

RiskStructure RiskStructure::build(const DesignSet& ds) {
  RiskStructure rs;
  const auto times = ds.times();
  rs.index = scan::RiskSetIndex::build(times);
  for (int k = 1; k <= ds.spec.K(); ++k) rs.events.push_back(event_structure(ds, k));
  return rs;
}

std::vector<std::vector<double>> cumhaz_by_subject(const RiskStructure& rs,
                                                   const std::vector<BaselineHazard>& hazards,
                                                   scan::Engine engine, scan::OpCounter* counter) {
  std::vector<std::vector<double>> out(rs.index.n(), std::vector<double>(hazards.size(), 0.0));
  for (std::size_t k = 0; k < hazards.size(); ++k) {
    const auto lam = cumhaz_for_cause(rs, hazards[k], engine, counter);
    for (std::size_t i = 0; i < lam.size(); ++i) out[i][k] = lam[i];
  }
  return out;
}

double risk_weight(const SubjectDesign& s, const PosteriorApprox& pa, const Eigen::VectorXd& gamma,
                   const Eigen::VectorXd& alpha) {
  const double e = s.W.dot(gamma) + alpha.dot(pa.mode) + 0.5 * alpha.dot(pa.cov * alpha);
  if (e > kMaxExponent) throw OverflowError(e);
  return std::exp(e);
}

Eigen::VectorXd update_beta(const DesignSet& ds, const std::vector<PosteriorApprox>& post) {
  const ModelSpec& spec = ds.spec;
  Eigen::VectorXd beta(spec.p_total());
  for (int g = 0; g < spec.G(); ++g) {
    const int pg = spec.p(g), qo = spec.q_offset(g), qg = spec.q(g);
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(pg, pg);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(pg);
    for (std::size_t i = 0; i < ds.n(); ++i) {
      const auto& blk = ds.subjects[i].blocks[g];
      if (blk.n() == 0) continue;
      A.noalias() += blk.X.transpose() * blk.X;
      rhs.noalias() += blk.X.transpose() * (blk.y - blk.Z * post[i].mode.segment(qo, qg));
    }
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() != Eigen::Success)
      throw NumericError("singular normal equations for beta of biomarker " + std::to_string(g + 1));
    beta.segment(spec.p_offset(g), pg) = llt.solve(rhs);
  }
  return beta;
}

Eigen::VectorXd update_sigma2(const DesignSet& ds, const Params& p,
                              const std::vector<PosteriorApprox>& post) {
  const ModelSpec& spec = ds.spec;
  Eigen::VectorXd s2(spec.G());
  for (int g = 0; g < spec.G(); ++g) {
    const int qo = spec.q_offset(g), qg = spec.q(g);
    const Eigen::VectorXd beta_g = p.beta.segment(spec.p_offset(g), spec.p(g));
    double num = 0.0, n = 0.0;
    for (std::size_t i = 0; i < ds.n(); ++i) {
      const auto& blk = ds.subjects[i].blocks[g];
      if (blk.n() == 0) continue;
      const Eigen::VectorXd e = blk.y - blk.X * beta_g - blk.Z * post[i].mode.segment(qo, qg);
      num += e.squaredNorm() + (blk.ZtZ * post[i].cov.block(qo, qo, qg, qg)).trace();
      n += static_cast<double>(blk.n());
    }
    if (n == 0.0)
      throw NumericError("biomarker " + std::to_string(g + 1) + " has no observations");
    s2(g) = std::max(num / n, kSigma2Floor);
  }
  return s2;
}

Eigen::MatrixXd update_Sigma(const std::vector<PosteriorApprox>& post) {
  if (post.empty()) throw NumericError("no subjects");
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(post[0].cov.rows(), post[0].cov.cols());
  for (const auto& pa : post) acc.noalias() += pa.cov + pa.mode * pa.mode.transpose();
  return floor_eigenvalues(acc / static_cast<double>(post.size()));
}

BaselineHazard update_baseline_hazard(const DesignSet& ds, const RiskStructure& rs, const Params& p,
                                      const std::vector<PosteriorApprox>& post, int k,
                                      scan::Engine engine, scan::OpCounter* counter) {
  BaselineHazard h = rs.events[static_cast<std::size_t>(k)];
  if (h.empty()) return h;
  std::vector<double> w(ds.n());
  for (std::size_t i = 0; i < ds.n(); ++i)
    w[i] = risk_weight(ds.subjects[i], post[i], p.gamma[k], p.alpha[k]);
  const scan::RowMatrix den = scan::riskset_sums(engine, rs.index.to_sorted(column(w)),
                                                 rs.index.sorted_times, h.times, counter);
  for (std::size_t l = 0; l < h.size(); ++l) {
    const double d = den(static_cast<Eigen::Index>(l), 0);
    if (!(d > 0.0) || !std::isfinite(d))
      throw NumericError("zero risk-set denominator for cause " + std::to_string(k + 1));
    h.jumps[l] = static_cast<double>(h.ties[l]) / d;
  }
  return h;
}

double expected_survival_loglik(const DesignSet& ds, const std::vector<PosteriorApprox>& post,
                                std::span<const double> cumhaz_k, int k,
                                const Eigen::VectorXd& gamma, const Eigen::VectorXd& alpha) {
  double v = 0.0;
  for (std::size_t i = 0; i < ds.n(); ++i) {
    const auto& s = ds.subjects[i];
    if (s.cause == k + 1) v += s.W.dot(gamma) + alpha.dot(post[i].mode);
    if (cumhaz_k[i] != 0.0) v -= cumhaz_k[i] * risk_weight(s, post[i], gamma, alpha);
  }
  return v;
}

PhiSystem phi_system(const DesignSet& ds, const std::vector<PosteriorApprox>& post,
                     std::span<const double> cumhaz_k, int k, const Eigen::VectorXd& gamma,
                     const Eigen::VectorXd& alpha) {
  const Eigen::Index pw = gamma.size(), q = alpha.size();
  PhiSystem sys;
  sys.score = Eigen::VectorXd::Zero(pw + q);
  sys.information = Eigen::MatrixXd::Zero(pw + q, pw + q);
  auto Sg = sys.score.head(pw);
  auto Sa = sys.score.tail(q);
  for (std::size_t i = 0; i < ds.n(); ++i) {
    const auto& s = ds.subjects[i];
    const auto& pa = post[i];
    if (s.cause == k + 1) {
      Sg += s.W;
      Sa += pa.mode;
    }
    if (cumhaz_k[i] == 0.0) continue;
    const double w = cumhaz_k[i] * risk_weight(s, pa, gamma, alpha);
    const Eigen::VectorXd m = pa.cov * alpha + pa.mode;
    Sg -= w * s.W;
    Sa -= w * m;
    sys.information.topLeftCorner(pw, pw).noalias() += w * s.W * s.W.transpose();
    sys.information.bottomRightCorner(q, q).noalias() += w * (m * m.transpose() + pa.cov);
    sys.information.topRightCorner(pw, q).noalias() += w * s.W * m.transpose();
  }
  sys.information.bottomLeftCorner(q, pw) = sys.information.topRightCorner(pw, q).transpose();
  return sys;
}

PhiUpdate update_phi(const DesignSet& ds, const RiskStructure& rs, const Params& p,
                     const std::vector<PosteriorApprox>& post, int k, bool freeze_alpha,
                     scan::Engine engine, scan::OpCounter* counter) {
  PhiUpdate out;
  out.gamma = p.gamma[k];
  out.alpha = p.alpha[k];
  const BaselineHazard& h = p.hazards[static_cast<std::size_t>(k)];
  const auto lam = cumhaz_for_cause(rs, h, engine, counter);
  out.system = phi_system(ds, post, lam, k, out.gamma, out.alpha);
  if (h.empty()) return out;  // no cause-k events: phi_k is not identified, keep it
  if (!out.system.score.allFinite() || !out.system.information.allFinite())
    throw NumericError("non-finite score for cause " + std::to_string(k + 1));

  const Eigen::Index pw = out.gamma.size();
  const Eigen::Index dim = freeze_alpha ? pw : out.system.score.size();
  Eigen::MatrixXd info = out.system.information.topLeftCorner(dim, dim);
  const Eigen::VectorXd score = out.system.score.head(dim);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(info, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < kPhiMinEig) {
    info += kPhiRidge * Eigen::MatrixXd::Identity(dim, dim);
    out.ridged = true;
  }
  Eigen::LLT<Eigen::MatrixXd> llt(info);
  if (llt.info() != Eigen::Success)
    throw NumericError("singular information matrix for cause " + std::to_string(k + 1));
  const Eigen::VectorXd delta = llt.solve(score);

  const double q0 = expected_survival_loglik(ds, post, lam, k, out.gamma, out.alpha);
  double step = 1.0;
  for (int hv = 0; hv <= kPhiHalvings; ++hv, step *= 0.5) {
    Eigen::VectorXd g = out.gamma + step * delta.head(pw);
    Eigen::VectorXd a = out.alpha;
    if (!freeze_alpha) a += step * delta.tail(a.size());
    double q1 = -std::numeric_limits<double>::infinity();
    try {
      q1 = expected_survival_loglik(ds, post, lam, k, g, a);
    } catch (const OverflowError&) {
    }
    if (std::isfinite(q1) && q1 >= q0 - 1e-12 * (1.0 + std::abs(q0))) {
      out.gamma = std::move(g);
      out.alpha = std::move(a);
      out.halvings = hv;
      return out;
    }
  }
  // Every damped step lowered the objective: stay put.
  out.halvings = kPhiHalvings;
  return out;
}

Params m_step(const DesignSet& ds, const RiskStructure& rs, const Params& p,
              const std::vector<PosteriorApprox>& post, const MStepOptions& opts,
              scan::OpCounter* counter) {
  Params next = p;
  next.beta = update_beta(ds, post);
  next.sigma2 = update_sigma2(ds, next, post);
  next.Sigma = update_Sigma(post);
  for (int k = 0; k < ds.spec.K(); ++k) {
    next.hazards[static_cast<std::size_t>(k)] =
        update_baseline_hazard(ds, rs, next, post, k, opts.engine, counter);
    PhiUpdate u = update_phi(ds, rs, next, post, k, opts.freeze_alpha, opts.engine, counter);
    next.gamma[k] = std::move(u.gamma);
    next.alpha[k] = std::move(u.alpha);
  }
  return next;
}

}  // namespace jointcr
