#include "jointcr/posterior.hpp"

#include "jointcr/error.hpp"
#include "jointcr/parallel.hpp"

#include <cmath>
#include <numbers>

namespace jointcr {

namespace {

double guarded_exp(double exponent) {
  if (exponent > kMaxExponent) throw OverflowError(exponent);
  return std::exp(exponent);
}

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& m) { return 0.5 * (m + m.transpose()); }

// Inverse of a symmetric positive-definite matrix, retrying with a ridge.
Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& m, double ridge, const char* what) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) {
    llt.compute(m + ridge * Eigen::MatrixXd::Identity(m.rows(), m.cols()));
    if (llt.info() != Eigen::Success)
      throw NumericError(std::string(what) + " is not positive definite");
  }
  return symmetrize(llt.solve(Eigen::MatrixXd::Identity(m.rows(), m.cols())));
}

}  // namespace

ConditionalDensity::ConditionalDensity(const SubjectDesign& s, const Params& p,
                                       const Eigen::MatrixXd& Sigma_inv,
                                       std::span<const double> cumhaz)
    : precision_(Sigma_inv), linear_(Eigen::VectorXd::Zero(Sigma_inv.rows())) {
  Eigen::Index q_off = 0, p_off = 0;
  for (std::size_t g = 0; g < s.blocks.size(); ++g) {
    const auto& blk = s.blocks[g];
    const auto qg = blk.Z.cols();
    const auto pg = blk.X.cols();
    if (blk.n() > 0) {
      const double inv = 1.0 / p.sigma2(static_cast<Eigen::Index>(g));
      const Eigen::VectorXd r = blk.y - blk.X * p.beta.segment(p_off, pg);
      precision_.block(q_off, q_off, qg, qg) += inv * blk.ZtZ;
      linear_.segment(q_off, qg).noalias() += inv * (blk.Z.transpose() * r);
      constant_ -= 0.5 * inv * r.squaredNorm();
    }
    q_off += qg;
    p_off += pg;
  }
  const auto K = p.alpha.size();
  if (cumhaz.size() != K) throw DataError("need one cumulative hazard per cause");
  for (std::size_t k = 0; k < K; ++k) {
    if (s.cause == static_cast<int>(k) + 1) linear_ += p.alpha[k];
    alpha_.push_back(p.alpha[k]);
    cumhaz_.push_back(cumhaz[k]);
    w_gamma_.push_back(s.W.dot(p.gamma[k]));
  }
}

LogDensity ConditionalDensity::evaluate(const Eigen::VectorXd& b) const {
  LogDensity out;
  const Eigen::VectorXd Pb = precision_ * b;
  out.value = constant_ + linear_.dot(b) - 0.5 * b.dot(Pb);
  out.gradient = linear_ - Pb;
  out.hessian = -precision_;
  for (std::size_t k = 0; k < alpha_.size(); ++k) {
    if (cumhaz_[k] == 0.0) continue;
    const double w = cumhaz_[k] * guarded_exp(w_gamma_[k] + alpha_[k].dot(b));
    out.value -= w;
    out.gradient -= w * alpha_[k];
    out.hessian.noalias() -= w * alpha_[k] * alpha_[k].transpose();
  }
  return out;
}

double ConditionalDensity::value(const Eigen::VectorXd& b) const {
  double v = constant_ + linear_.dot(b) - 0.5 * b.dot(precision_ * b);
  for (std::size_t k = 0; k < alpha_.size(); ++k)
    if (cumhaz_[k] != 0.0) v -= cumhaz_[k] * guarded_exp(w_gamma_[k] + alpha_[k].dot(b));
  return v;
}

LogDensity complete_logdensity_in_b(const SubjectDesign& s, const Params& p,
                                    std::span<const double> cumhaz, const Eigen::VectorXd& b) {
  const Eigen::MatrixXd Sigma_inv = spd_inverse(p.Sigma, 0.0, "Sigma");
  return ConditionalDensity(s, p, Sigma_inv, cumhaz).evaluate(b);
}

LogDensity complete_logdensity_in_b(const SubjectDesign& s, const Params& p,
                                    const Eigen::VectorXd& b) {
  std::vector<double> cumhaz;
  for (const auto& h : p.hazards) cumhaz.push_back(cum_hazard_at(h, s.T));
  return complete_logdensity_in_b(s, p, cumhaz, b);
}

PosteriorApprox posterior_mode(const ConditionalDensity& f, const Eigen::VectorXd& b_init,
                               const ModeOptions& opts) {
  const Eigen::Index q = f.dim();
  Eigen::VectorXd b = b_init.size() == q ? b_init : Eigen::VectorXd::Zero(q);
  LogDensity cur;
  try {
    cur = f.evaluate(b);
  } catch (const OverflowError&) {
    b.setZero();
    cur = f.evaluate(b);
  }

  PosteriorApprox out;
  bool converged = false;
  for (int it = 0; it <= opts.max_iter; ++it) {
    if (cur.gradient.lpNorm<Eigen::Infinity>() < opts.grad_tol) {
      converged = true;
      break;
    }
    if (it == opts.max_iter) break;
    Eigen::MatrixXd neg_h = -cur.hessian;
    Eigen::LLT<Eigen::MatrixXd> llt(neg_h);
    if (llt.info() != Eigen::Success) {
      llt.compute(neg_h + opts.ridge * Eigen::MatrixXd::Identity(q, q));
      if (llt.info() != Eigen::Success)
        throw NumericError("posterior Hessian is not negative definite");
    }
    const Eigen::VectorXd dir = llt.solve(cur.gradient);
    // The step is below floating-point resolution of b: nothing left to gain.
    if (dir.lpNorm<Eigen::Infinity>() <= 1e-14 * (1.0 + b.lpNorm<Eigen::Infinity>())) {
      converged = true;
      break;
    }
    double step = 1.0;
    bool accepted = false;
    Eigen::VectorXd cand;
    for (int h = 0; h <= opts.max_halvings; ++h, step *= 0.5) {
      cand = b + step * dir;
      double v;
      try {
        v = f.value(cand);
      } catch (const OverflowError&) {
        continue;
      }
      if (std::isfinite(v) && v >= cur.value - 1e-12 * (1.0 + std::abs(cur.value))) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      // Concave objective: failure to ascend along the Newton direction only
      // happens at round-off level around the maximiser.
      converged = true;
      break;
    }
    b = cand;
    cur = f.evaluate(b);
    ++out.newton_steps;
  }
  if (!converged)
    throw NumericError("posterior mode did not converge in " + std::to_string(opts.max_iter) +
                       " Newton iterations");
  if (!b.allFinite()) throw NumericError("posterior mode is not finite");
  out.mode = b;
  out.cov = spd_inverse(-cur.hessian, opts.ridge, "negated posterior Hessian");
  return out;
}

double mgf_exp(const PosteriorApprox& pa, const Eigen::VectorXd& alpha) {
  return guarded_exp(alpha.dot(pa.mode) + 0.5 * alpha.dot(pa.cov * alpha));
}

Eigen::VectorXd mgf_exp_b(const PosteriorApprox& pa, const Eigen::VectorXd& alpha) {
  return mgf_exp(pa, alpha) * (pa.cov * alpha + pa.mode);
}

Eigen::MatrixXd mgf_exp_bbT(const PosteriorApprox& pa, const Eigen::VectorXd& alpha) {
  const Eigen::VectorXd m = pa.cov * alpha + pa.mode;
  return mgf_exp(pa, alpha) * (m * m.transpose() + pa.cov);
}

double full_log_density(const SubjectDesign& s, const Params& p, const Eigen::MatrixXd& Sigma_inv,
                        double log_det_Sigma, std::span<const double> cumhaz, double jump_at_T,
                        const Eigen::VectorXd& b) {
  constexpr double log_2pi = 1.8378770664093454836;  // log(2 pi)
  double v = 0.0;
  Eigen::Index q_off = 0, p_off = 0;
  for (std::size_t g = 0; g < s.blocks.size(); ++g) {
    const auto& blk = s.blocks[g];
    const double s2 = p.sigma2(static_cast<Eigen::Index>(g));
    const Eigen::VectorXd e = blk.y - blk.X * p.beta.segment(p_off, blk.X.cols()) -
                              blk.Z * b.segment(q_off, blk.Z.cols());
    v += -0.5 * static_cast<double>(blk.n()) * (log_2pi + std::log(s2)) - 0.5 * e.squaredNorm() / s2;
    q_off += blk.Z.cols();
    p_off += blk.X.cols();
  }
  for (std::size_t k = 0; k < p.alpha.size(); ++k) {
    const double eta = s.W.dot(p.gamma[k]) + p.alpha[k].dot(b);
    if (s.cause == static_cast<int>(k) + 1) {
      if (!(jump_at_T > 0.0)) throw NumericError("event time without a baseline hazard jump");
      v += std::log(jump_at_T) + eta;
    }
    if (cumhaz[k] != 0.0) v -= cumhaz[k] * guarded_exp(eta);
  }
  const double q = static_cast<double>(b.size());
  v += -0.5 * q * log_2pi - 0.5 * log_det_Sigma - 0.5 * b.dot(Sigma_inv * b);
  return v;
}

std::vector<PosteriorApprox> run_e_step(const DesignSet& ds, const Params& p,
                                        const std::vector<std::vector<double>>& cumhaz,
                                        const std::vector<PosteriorApprox>& previous, int threads,
                                        const ModeOptions& opts) {
  const Eigen::MatrixXd Sigma_inv = spd_inverse(p.Sigma, 0.0, "Sigma");
  std::vector<PosteriorApprox> out(ds.n());
  const bool warm = previous.size() == ds.n();
  parallel_for(ds.n(), threads, [&](std::size_t i) {
    const ConditionalDensity f(ds.subjects[i], p, Sigma_inv, cumhaz[i]);
    const Eigen::VectorXd start =
        warm ? previous[i].mode : Eigen::VectorXd::Zero(ds.spec.q_total());
    out[i] = posterior_mode(f, start, opts);
  });
  return out;
}

}  // namespace jointcr
