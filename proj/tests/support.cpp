#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

namespace testsupport {

using namespace jointcr;

Rule gauss_hermite(int m) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(m, m);
  for (int k = 1; k < m; ++k) J(k, k - 1) = J(k - 1, k) = std::sqrt(k / 2.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  Rule r;
  r.nodes = es.eigenvalues();
  r.weights = std::sqrt(std::numbers::pi) * es.eigenvectors().row(0).transpose().array().square();
  return r;
}

double gh_expect(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& mean,
                 const Eigen::MatrixXd& cov, int m) {
  const int q = static_cast<int>(mean.size());
  const Rule r = gauss_hermite(m);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  const Eigen::MatrixXd L = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  std::vector<int> idx(q, 0);
  double total = 0.0;
  while (true) {
    Eigen::VectorXd x(q);
    double w = 1.0;
    for (int j = 0; j < q; ++j) {
      x(j) = r.nodes(idx[j]);
      w *= r.weights(idx[j]);
    }
    total += w * f(mean + std::sqrt(2.0) * L * x);
    int j = 0;
    while (j < q && ++idx[j] == m) idx[j++] = 0;
    if (j == q) break;
  }
  return total / std::pow(std::numbers::pi, q / 2.0);
}

Eigen::VectorXd fd_gradient(const Fn& f, const Eigen::VectorXd& x, double h) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    Eigen::VectorXd a = x, b = x;
    const double s = h * std::max(1.0, std::abs(x(j)));
    a(j) += s;
    b(j) -= s;
    // Fourth-order central difference.
    Eigen::VectorXd a2 = x, b2 = x;
    a2(j) += 2 * s;
    b2(j) -= 2 * s;
    g(j) = (8.0 * (f(a) - f(b)) - (f(a2) - f(b2))) / (12.0 * s);
  }
  return g;
}

Eigen::MatrixXd fd_hessian(const Fn& f, const Eigen::VectorXd& x, double h) {
  const auto d = x.size();
  Eigen::MatrixXd H(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) {
      auto at = [&](double si, double sj) {
        Eigen::VectorXd y = x;
        y(i) += si;
        y(j) += sj;
        return f(y);
      };
      H(i, j) = (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4.0 * h * h);
    }
  return 0.5 * (H + H.transpose());
}

Eigen::MatrixXd fd_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& x, double h) {
  const Eigen::VectorXd f0 = f(x);
  Eigen::MatrixXd J(f0.size(), x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    Eigen::VectorXd a = x, b = x, a2 = x, b2 = x;
    const double s = h * std::max(1.0, std::abs(x(j)));
    a(j) += s;
    b(j) -= s;
    a2(j) += 2 * s;
    b2(j) -= 2 * s;
    J.col(j) = (8.0 * (f(a) - f(b)) - (f(a2) - f(b2))) / (12.0 * s);
  }
  return J;
}

double golden_section_max(const std::function<double(double)>& f, double a, double b, double tol) {
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - r * (b - a), d = a + r * (b - a);
  double fc = f(c), fd = f(d);
  while (std::abs(b - a) > tol * (1.0 + std::abs(a) + std::abs(b))) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - r * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + r * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

Eigen::VectorXd nelder_mead(const Fn& f, Eigen::VectorXd x0, double step, double ftol, int max_eval) {
  const auto d = x0.size();
  int evals = 0;
  for (int restart = 0; restart < 6; ++restart) {
    std::vector<Eigen::VectorXd> s(d + 1, x0);
    std::vector<double> fv(d + 1);
    for (Eigen::Index j = 0; j < d; ++j) s[j + 1](j) += step;
    for (Eigen::Index j = 0; j <= d; ++j) fv[j] = f(s[j]), ++evals;
    while (evals < max_eval) {
      std::vector<Eigen::Index> o(d + 1);
      for (Eigen::Index j = 0; j <= d; ++j) o[j] = j;
      std::sort(o.begin(), o.end(), [&](auto a, auto b) { return fv[a] < fv[b]; });
      std::vector<Eigen::VectorXd> s2;
      std::vector<double> f2;
      for (auto j : o) s2.push_back(s[j]), f2.push_back(fv[j]);
      s = s2;
      fv = f2;
      if (std::abs(fv[d] - fv[0]) <= ftol * (std::abs(fv[0]) + 1e-300)) break;
      Eigen::VectorXd c = Eigen::VectorXd::Zero(d);
      for (Eigen::Index j = 0; j < d; ++j) c += s[j];
      c /= static_cast<double>(d);
      const Eigen::VectorXd xr = c + (c - s[d]);
      const double fr = f(xr);
      ++evals;
      if (fr < fv[0]) {
        const Eigen::VectorXd xe = c + 2.0 * (c - s[d]);
        const double fe = f(xe);
        ++evals;
        if (fe < fr) s[d] = xe, fv[d] = fe;
        else s[d] = xr, fv[d] = fr;
      } else if (fr < fv[d - 1]) {
        s[d] = xr, fv[d] = fr;
      } else {
        const Eigen::VectorXd xc = fr < fv[d] ? c + 0.5 * (xr - c) : c + 0.5 * (s[d] - c);
        const double fc = f(xc);
        ++evals;
        if (fc < std::min(fr, fv[d])) {
          s[d] = xc, fv[d] = fc;
        } else {
          for (Eigen::Index j = 1; j <= d; ++j) {
            s[j] = s[0] + 0.5 * (s[j] - s[0]);
            fv[j] = f(s[j]);
            ++evals;
          }
        }
      }
    }
    x0 = s[0];
    step *= 0.1;
  }
  return x0;
}

namespace {
double simpson_rec(const std::function<double(double)>& f, double a, double b, double fa, double fm,
                   double fb, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b), lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol)
    return left + right + (left + right - whole) / 15.0;
  return simpson_rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) +
         simpson_rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1);
}
}  // namespace

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol,
                        int depth) {
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return simpson_rec(f, a, b, fa, fm, fb, whole, tol, depth);
}

double rel_err(double a, double b, double floor) {
  return std::abs(a - b) / std::max(std::abs(b), floor);
}

double max_rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double floor) {
  double m = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) m = std::max(m, rel_err(a(i, j), b(i, j), floor));
  return m;
}

Eigen::MatrixXd dense_V(const SubjectDesign& s, const Eigen::VectorXd& sigma2) {
  Eigen::VectorXd v(s.n_obs());
  Eigen::Index o = 0;
  for (std::size_t g = 0; g < s.blocks.size(); ++g)
    for (Eigen::Index j = 0; j < s.blocks[g].n(); ++j) v(o++) = sigma2(static_cast<Eigen::Index>(g));
  return v.asDiagonal();
}

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;

double brute_cumhaz(const BaselineHazard& h, double t) {
  double s = 0.0;
  for (std::size_t l = 0; l < h.size(); ++l)
    if (h.times[l] <= t) s += h.jumps[l];
  return s;
}
double brute_jump(const BaselineHazard& h, double t) {
  for (std::size_t l = 0; l < h.size(); ++l)
    if (h.times[l] == t) return h.jumps[l];
  return 0.0;
}
double log_mvn(const Eigen::VectorXd& x, const Eigen::MatrixXd& S) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(S);
  return -0.5 * static_cast<double>(x.size()) * kLog2Pi -
         0.5 * ldlt.vectorD().array().log().sum() - 0.5 * x.dot(ldlt.solve(x));
}
}  // namespace

double dense_log_joint(const SubjectDesign& s, const Params& p, const Eigen::VectorXd& b) {
  const Eigen::MatrixXd X = s.stacked_X(), Z = s.stacked_Z();
  const Eigen::VectorXd y = s.stacked_y();
  double v = 0.0;
  if (y.size() > 0) v += log_mvn(y - X * p.beta - Z * b, dense_V(s, p.sigma2));
  for (std::size_t k = 0; k < p.alpha.size(); ++k) {
    const double eta = s.W.dot(p.gamma[k]) + p.alpha[k].dot(b);
    if (s.cause == static_cast<int>(k) + 1) v += std::log(brute_jump(p.hazards[k], s.T)) + eta;
    v -= brute_cumhaz(p.hazards[k], s.T) * std::exp(eta);
  }
  return v + log_mvn(b, p.Sigma);
}

double dense_expected_loglik(const SubjectDesign& s, const Params& p, const PosteriorApprox& pa) {
  const Eigen::MatrixXd X = s.stacked_X(), Z = s.stacked_Z();
  const Eigen::VectorXd y = s.stacked_y();
  const Eigen::MatrixXd V = dense_V(s, p.sigma2);
  double v = 0.0;
  if (y.size() > 0) {
    const Eigen::MatrixXd Vi = V.inverse();
    const Eigen::VectorXd e = y - X * p.beta - Z * pa.mode;
    v += -0.5 * static_cast<double>(y.size()) * kLog2Pi - 0.5 * std::log(V.determinant()) -
         0.5 * (e.dot(Vi * e) + (Z.transpose() * Vi * Z * pa.cov).trace());
  }
  for (std::size_t k = 0; k < p.alpha.size(); ++k) {
    const Eigen::VectorXd& a = p.alpha[k];
    const double wg = s.W.dot(p.gamma[k]);
    if (s.cause == static_cast<int>(k) + 1)
      v += std::log(brute_jump(p.hazards[k], s.T)) + wg + a.dot(pa.mode);
    v -= brute_cumhaz(p.hazards[k], s.T) * std::exp(wg + a.dot(pa.mode) + 0.5 * a.dot(pa.cov * a));
  }
  const auto q = static_cast<double>(pa.mode.size());
  const Eigen::MatrixXd Si = p.Sigma.inverse();
  v += -0.5 * q * kLog2Pi - 0.5 * std::log(p.Sigma.determinant()) -
       0.5 * (Si * (pa.cov + pa.mode * pa.mode.transpose())).trace();
  return v;
}

double lmm_marginal_loglik(const DesignSet& ds, const Eigen::VectorXd& beta,
                           const Eigen::VectorXd& sigma2, const Eigen::MatrixXd& Sigma) {
  double v = 0.0;
  for (const auto& s : ds.subjects) {
    const Eigen::MatrixXd X = s.stacked_X(), Z = s.stacked_Z();
    if (X.rows() == 0) continue;
    const Eigen::MatrixXd V = Z * Sigma * Z.transpose() + dense_V(s, sigma2);
    v += log_mvn(s.stacked_y() - X * beta, V);
  }
  return v;
}

double profile_survival_loglik_subject(const DesignSet& ds, const std::vector<PosteriorApprox>& post,
                                       std::size_t i, int k, const Eigen::VectorXd& gamma,
                                       const Eigen::VectorXd& alpha) {
  const std::size_t n = ds.n();
  std::vector<double> w(n);
  for (std::size_t r = 0; r < n; ++r)
    w[r] = std::exp(ds.subjects[r].W.dot(gamma) + alpha.dot(post[r].mode) +
                    0.5 * alpha.dot(post[r].cov * alpha));
  std::map<double, int> d;
  for (const auto& s : ds.subjects)
    if (s.cause == k + 1) ++d[s.T];
  const double Ti = ds.subjects[i].T;
  double lam = 0.0, jump = 0.0;
  for (const auto& [t, dl] : d) {
    double s0 = 0.0;
    for (std::size_t r = 0; r < n; ++r)
      if (ds.subjects[r].T >= t) s0 += w[r];
    if (t <= Ti) lam += dl / s0;
    if (t == Ti) jump = dl / s0;
  }
  double v = -lam * w[i];
  if (ds.subjects[i].cause == k + 1)
    v += ds.subjects[i].W.dot(gamma) + alpha.dot(post[i].mode) + std::log(jump);
  return v;
}

Eigen::VectorXd cox_partial_mle(const DesignSet& ds, int cause) {
  const auto pw = ds.subjects[0].W.size();
  Eigen::VectorXd g = Eigen::VectorXd::Zero(pw);
  std::map<double, std::vector<std::size_t>> events;
  for (std::size_t i = 0; i < ds.n(); ++i)
    if (ds.subjects[i].cause == cause) events[ds.subjects[i].T].push_back(i);
  for (int it = 0; it < 100; ++it) {
    Eigen::VectorXd U = Eigen::VectorXd::Zero(pw);
    Eigen::MatrixXd I = Eigen::MatrixXd::Zero(pw, pw);
    for (const auto& [t, who] : events) {
      double s0 = 0.0;
      Eigen::VectorXd s1 = Eigen::VectorXd::Zero(pw);
      Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(pw, pw);
      for (const auto& s : ds.subjects)
        if (s.T >= t) {
          const double w = std::exp(s.W.dot(g));
          s0 += w;
          s1 += w * s.W;
          s2 += w * s.W * s.W.transpose();
        }
      const double dl = static_cast<double>(who.size());
      for (auto i : who) U += ds.subjects[i].W;
      U -= dl * s1 / s0;
      I += dl * (s2 / s0 - s1 * s1.transpose() / (s0 * s0));
    }
    const Eigen::VectorXd step = I.ldlt().solve(U);
    g += step;
    if (step.lpNorm<Eigen::Infinity>() < 1e-13) break;
  }
  return g;
}

Eigen::MatrixXd random_spd(std::mt19937_64& rng, int q, double lo, double hi) {
  std::normal_distribution<double> N;
  std::uniform_real_distribution<double> U(lo, hi);
  Eigen::MatrixXd A(q, q);
  for (int i = 0; i < q; ++i)
    for (int j = 0; j < q; ++j) A(i, j) = N(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(A);
  const Eigen::MatrixXd Q = qr.householderQ();
  Eigen::VectorXd ev(q);
  for (int i = 0; i < q; ++i) ev(i) = U(rng);
  Eigen::MatrixXd S = Q * ev.asDiagonal() * Q.transpose();
  return 0.5 * (S + S.transpose());
}

ScenarioConfig small_scenario(std::mt19937_64& rng, int n, int G, int K, bool slopes) {
  std::normal_distribution<double> N;
  std::uniform_real_distribution<double> U(0.0, 1.0);
  ScenarioConfig c;
  c.n = n;
  for (int g = 0; g < G; ++g) {
    BiomarkerTruth b;
    b.fixed = {Term::parse("intercept"), Term::parse("x1"), Term::parse("time")};
    b.random = {Term::parse("intercept")};
    if (slopes) b.random.push_back(Term::parse("time"));
    b.beta = Eigen::Vector3d(N(rng) * 2, N(rng), N(rng) * 0.5);
    b.sigma2 = 0.3 + 0.7 * U(rng);
    c.biomarkers.push_back(b);
  }
  const int q = G * (slopes ? 2 : 1);
  c.Sigma = random_spd(rng, q, 0.1, 0.6);
  c.survival = {Term::parse("x1"), Term::parse("x2")};
  for (int k = 0; k < K; ++k) {
    c.gamma.push_back(Eigen::Vector2d(0.5 * N(rng), 0.2 * N(rng)));
    Eigen::VectorXd a(q);
    for (int j = 0; j < q; ++j) a(j) = 0.4 * N(rng);
    c.alpha.push_back(a);
    c.lambda0.push_back(0.1 + 0.1 * U(rng));
  }
  c.censor_low = 2.0;
  c.censor_high = 6.0;
  c.visit_step = 0.5;
  return c;
}

DesignSet small_designs(std::uint64_t seed, int n, int G, int K, bool slopes, bool ties) {
  std::mt19937_64 rng(seed);
  const ScenarioConfig scn = small_scenario(rng, n, G, K, slopes);
  Dataset ds = generate(scn, seed);
  if (ties)
    for (auto& s : ds.subjects) s.surv.time = std::ceil(s.surv.time * 2.0) / 2.0;
  return build_designs(ds, scn.spec());
}

Params random_params(std::mt19937_64& rng, const DesignSet& ds, double alpha_scale) {
  std::normal_distribution<double> N;
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const ModelSpec& spec = ds.spec;
  Params p;
  p.beta.resize(spec.p_total());
  for (Eigen::Index j = 0; j < p.beta.size(); ++j) p.beta(j) = N(rng);
  p.sigma2.resize(spec.G());
  for (Eigen::Index g = 0; g < p.sigma2.size(); ++g) p.sigma2(g) = 0.3 + U(rng);
  p.Sigma = random_spd(rng, spec.q_total(), 0.2, 1.0);
  for (int k = 0; k < spec.K(); ++k) {
    Eigen::VectorXd g(spec.w_dim()), a(spec.q_total());
    for (Eigen::Index j = 0; j < g.size(); ++j) g(j) = 0.3 * N(rng);
    for (Eigen::Index j = 0; j < a.size(); ++j) a(j) = alpha_scale * N(rng);
    p.gamma.push_back(g);
    p.alpha.push_back(a);
    BaselineHazard h = event_structure(ds, k + 1);
    for (auto& j : h.jumps) j = 0.01 + 0.1 * U(rng);
    p.hazards.push_back(h);
  }
  return p;
}

std::vector<PosteriorApprox> random_posteriors(std::mt19937_64& rng, std::size_t n, int q) {
  std::normal_distribution<double> N;
  std::vector<PosteriorApprox> out(n);
  for (auto& pa : out) {
    pa.mode.resize(q);
    for (int j = 0; j < q; ++j) pa.mode(j) = 0.5 * N(rng);
    pa.cov = random_spd(rng, q, 0.05, 0.5);
  }
  return out;
}

}  // namespace testsupport
