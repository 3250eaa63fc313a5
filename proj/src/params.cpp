#include "jointcr/params.hpp"

#include "jointcr/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace jointcr {

std::vector<double> BaselineHazard::cumulative() const {
  std::vector<double> out(times.size());
  double acc = 0.0;
  for (std::size_t l = times.size(); l-- > 0;) {
    acc += jumps[l];
    out[l] = acc;
  }
  return out;
}

void BaselineHazard::validate() const {
  if (jumps.size() != times.size() || ties.size() != times.size())
    throw DataError("baseline hazard arrays have different lengths");
  for (std::size_t l = 0; l < times.size(); ++l) {
    if (!(jumps[l] > 0.0) || !std::isfinite(jumps[l]))
      throw DataError("baseline hazard jumps must be positive and finite");
    if (ties[l] < 1) throw DataError("baseline hazard tie counts must be positive");
    if (l > 0 && !(times[l] < times[l - 1]))
      throw DataError("baseline hazard times must be strictly decreasing");
  }
}

double cum_hazard_at(const BaselineHazard& h, double t) {
  // Accumulate from the earliest event time, the order the scans use.
  double acc = 0.0;
  for (std::size_t l = h.times.size(); l-- > 0;)
    if (h.times[l] <= t) acc += h.jumps[l];
  return acc;
}

BaselineHazard event_structure(const DesignSet& ds, int cause) {
  std::map<double, int, std::greater<>> counts;
  for (const auto& s : ds.subjects)
    if (s.cause == cause) ++counts[s.T];
  BaselineHazard h;
  for (const auto& [t, d] : counts) {
    h.times.push_back(t);
    h.ties.push_back(d);
    h.jumps.push_back(0.0);
  }
  return h;
}

void Params::validate(const ModelSpec& spec) const {
  const int q = spec.q_total();
  if (beta.size() != spec.p_total()) throw DataError("beta has wrong length");
  if (sigma2.size() != spec.G()) throw DataError("sigma2 has wrong length");
  for (Eigen::Index g = 0; g < sigma2.size(); ++g)
    if (!(sigma2(g) > 0.0)) throw DataError("sigma2 must be positive");
  if (Sigma.rows() != q || Sigma.cols() != q) throw DataError("Sigma has wrong shape");
  if ((Sigma - Sigma.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + Sigma.cwiseAbs().maxCoeff()))
    throw DataError("Sigma is not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Sigma, Eigen::EigenvaluesOnly);
  if (!(es.eigenvalues().minCoeff() > 0.0))
    throw DataError("Sigma is not positive definite (min eigenvalue " +
                    std::to_string(es.eigenvalues().minCoeff()) + ")");
  if (static_cast<int>(gamma.size()) != spec.K() || static_cast<int>(alpha.size()) != spec.K())
    throw DataError("gamma/alpha need one vector per cause");
  for (int k = 0; k < spec.K(); ++k) {
    if (gamma[k].size() != spec.w_dim()) throw DataError("gamma has wrong length");
    if (alpha[k].size() != q) throw DataError("alpha has wrong length");
  }
  if (!hazards.empty()) {
    if (static_cast<int>(hazards.size()) != spec.K())
      throw DataError("need one baseline hazard per cause");
    for (const auto& h : hazards) h.validate();
  }
}

Eigen::MatrixXd floor_eigenvalues(const Eigen::MatrixXd& m, double floor) {
  const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  if (es.eigenvalues().minCoeff() >= floor) return sym;
  const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(floor);
  Eigen::MatrixXd out = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

OmegaLayout omega_layout(const ModelSpec& spec) {
  OmegaLayout l;
  l.w_dim = spec.w_dim();
  l.q = spec.q_total();
  l.beta = 0;
  l.sigma2 = spec.p_total();
  l.gamma = l.sigma2 + spec.G();
  l.alpha = l.gamma + spec.K() * l.w_dim;
  l.Sigma = l.alpha + spec.K() * l.q;
  l.size = l.Sigma + l.q * (l.q + 1) / 2;
  return l;
}

std::size_t omega_size(const ModelSpec& spec) {
  return static_cast<std::size_t>(omega_layout(spec).size);
}

Eigen::VectorXd pack_omega(const Params& p, const ModelSpec& spec) {
  const auto l = omega_layout(spec);
  Eigen::VectorXd v(l.size);
  v.segment(l.beta, spec.p_total()) = p.beta;
  v.segment(l.sigma2, spec.G()) = p.sigma2;
  for (int k = 0; k < spec.K(); ++k) {
    v.segment(l.gamma_at(k), l.w_dim) = p.gamma[k];
    v.segment(l.alpha_at(k), l.q) = p.alpha[k];
  }
  int pos = l.Sigma;
  for (int c = 0; c < l.q; ++c)
    for (int r = c; r < l.q; ++r) v(pos++) = p.Sigma(r, c);
  return v;
}

Params unpack_omega(const Eigen::VectorXd& v, const ModelSpec& spec) {
  const auto l = omega_layout(spec);
  if (v.size() != l.size)
    throw DataError("packed parameter vector has length " + std::to_string(v.size()) +
                    ", expected " + std::to_string(l.size));
  Params p;
  p.beta = v.segment(l.beta, spec.p_total());
  p.sigma2 = v.segment(l.sigma2, spec.G());
  for (int k = 0; k < spec.K(); ++k) {
    p.gamma.push_back(v.segment(l.gamma_at(k), l.w_dim));
    p.alpha.push_back(v.segment(l.alpha_at(k), l.q));
  }
  p.Sigma.resize(l.q, l.q);
  int pos = l.Sigma;
  for (int c = 0; c < l.q; ++c)
    for (int r = c; r < l.q; ++r) {
      p.Sigma(r, c) = v(pos);
      p.Sigma(c, r) = v(pos);
      ++pos;
    }
  return p;
}

std::vector<std::string> omega_names(const ModelSpec& spec) {
  std::vector<std::string> names;
  for (int g = 0; g < spec.G(); ++g)
    for (const auto& t : spec.biomarker(g).fixed)
      names.push_back("beta_" + std::to_string(g + 1) + "_" + t.name());
  for (int g = 0; g < spec.G(); ++g) names.push_back("sigma2_" + std::to_string(g + 1));
  for (int k = 0; k < spec.K(); ++k)
    for (const auto& t : spec.survival())
      names.push_back("gamma_" + std::to_string(k + 1) + "_" + t.name());
  for (int k = 0; k < spec.K(); ++k)
    for (int g = 0; g < spec.G(); ++g)
      for (const auto& t : spec.biomarker(g).random)
        names.push_back("alpha_" + std::to_string(k + 1) + "_" + std::to_string(g + 1) + "_" +
                        t.name());
  const int q = spec.q_total();
  for (int c = 0; c < q; ++c)
    for (int r = c; r < q; ++r)
      names.push_back("Sigma_" + std::to_string(r + 1) + "_" + std::to_string(c + 1));
  return names;
}

Params init_params(const DesignSet& ds) {
  const ModelSpec& spec = ds.spec;
  Params p;
  p.beta.resize(spec.p_total());
  p.sigma2.resize(spec.G());
  double pooled_rss = 0.0;
  double pooled_n = 0.0;
  for (int g = 0; g < spec.G(); ++g) {
    const int pg = spec.p(g);
    Eigen::MatrixXd XtX = Eigen::MatrixXd::Zero(pg, pg);
    Eigen::VectorXd Xty = Eigen::VectorXd::Zero(pg);
    double n = 0.0;
    for (const auto& s : ds.subjects) {
      const auto& b = s.blocks[g];
      XtX.noalias() += b.X.transpose() * b.X;
      Xty.noalias() += b.X.transpose() * b.y;
      n += static_cast<double>(b.n());
    }
    if (n == 0.0)
      throw NumericError("biomarker " + std::to_string(g + 1) + " has no observations");
    Eigen::FullPivLU<Eigen::MatrixXd> lu(XtX);
    lu.setThreshold(1e-12);
    if (lu.rank() < pg)
      throw NumericError("singular OLS normal equations for biomarker " + std::to_string(g + 1) +
                         " (collinear design)");
    const Eigen::VectorXd beta_g = lu.solve(Xty);
    double rss = 0.0;
    for (const auto& s : ds.subjects) {
      const auto& b = s.blocks[g];
      rss += (b.y - b.X * beta_g).squaredNorm();
    }
    p.beta.segment(spec.p_offset(g), pg) = beta_g;
    p.sigma2(g) = std::max(rss / n, kSigma2Floor);
    pooled_rss += rss;
    pooled_n += n;
  }
  const double pooled = std::max(pooled_rss / pooled_n, kSigma2Floor);
  const int q = spec.q_total();
  p.Sigma = Eigen::MatrixXd::Identity(q, q) * pooled;
  for (int k = 0; k < spec.K(); ++k) {
    p.gamma.push_back(Eigen::VectorXd::Zero(spec.w_dim()));
    p.alpha.push_back(Eigen::VectorXd::Zero(q));
  }

  // Nelson-Aalen: d_l / |R(t_l)| with R(t) = {r : T_r >= t}.
  std::vector<double> sorted = ds.times();
  std::sort(sorted.begin(), sorted.end());
  for (int k = 1; k <= spec.K(); ++k) {
    BaselineHazard h = event_structure(ds, k);
    for (std::size_t l = 0; l < h.size(); ++l) {
      const auto at_risk = sorted.end() - std::lower_bound(sorted.begin(), sorted.end(), h.times[l]);
      h.jumps[l] = static_cast<double>(h.ties[l]) / static_cast<double>(at_risk);
    }
    p.hazards.push_back(std::move(h));
  }
  return p;
}

nlohmann::ordered_json params_to_json(const Params& p) {
  using nlohmann::ordered_json;
  auto vec = [](const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
  };
  ordered_json j;
  j["beta"] = vec(p.beta);
  j["sigma2"] = vec(p.sigma2);
  ordered_json rows = ordered_json::array();
  for (Eigen::Index r = 0; r < p.Sigma.rows(); ++r) {
    std::vector<double> row(p.Sigma.cols());
    for (Eigen::Index c = 0; c < p.Sigma.cols(); ++c) row[c] = p.Sigma(r, c);
    rows.push_back(row);
  }
  j["Sigma"] = rows;
  ordered_json gam = ordered_json::array(), alp = ordered_json::array();
  for (const auto& g : p.gamma) gam.push_back(vec(g));
  for (const auto& a : p.alpha) alp.push_back(vec(a));
  j["gamma"] = gam;
  j["alpha"] = alp;
  ordered_json haz = ordered_json::array();
  for (const auto& h : p.hazards) {
    ordered_json e;
    e["times"] = h.times;
    e["jumps"] = h.jumps;
    e["ties"] = h.ties;
    haz.push_back(e);
  }
  j["hazards"] = haz;
  return j;
}

Params params_from_json(const nlohmann::json& j) {
  auto vec = [](const nlohmann::json& a) {
    const auto v = a.get<std::vector<double>>();
    return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
  };
  try {
    Params p;
    p.beta = vec(j.at("beta"));
    p.sigma2 = vec(j.at("sigma2"));
    const auto& rows = j.at("Sigma");
    const auto q = static_cast<Eigen::Index>(rows.size());
    p.Sigma.resize(q, q);
    for (Eigen::Index r = 0; r < q; ++r) {
      const auto row = rows[r].get<std::vector<double>>();
      if (static_cast<Eigen::Index>(row.size()) != q) throw DataError("Sigma row has wrong length");
      for (Eigen::Index c = 0; c < q; ++c) p.Sigma(r, c) = row[c];
    }
    for (const auto& g : j.at("gamma")) p.gamma.push_back(vec(g));
    for (const auto& a : j.at("alpha")) p.alpha.push_back(vec(a));
    for (const auto& e : j.at("hazards")) {
      BaselineHazard h;
      h.times = e.at("times").get<std::vector<double>>();
      h.jumps = e.at("jumps").get<std::vector<double>>();
      h.ties = e.at("ties").get<std::vector<int>>();
      p.hazards.push_back(std::move(h));
    }
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed parameter JSON: ") + e.what());
  }
}

}  // namespace jointcr
