#include "jointcr/em_driver.hpp"

#include "jointcr/error.hpp"
#include "jointcr/mstep.hpp"
#include "jointcr/standard_errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <limits>
#include <sstream>

namespace jointcr {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

// Delta Lambda_k(T) when T is one of the event times, else 0.
double jump_at(const BaselineHazard& h, double t) {
  const auto it = std::lower_bound(h.times.begin(), h.times.end(), t, std::greater<>());
  if (it == h.times.end() || *it != t) return 0.0;
  return h.jumps[static_cast<std::size_t>(it - h.times.begin())];
}

std::string fmt(double v) {
  if (!std::isfinite(v)) return "NA";
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

}  // namespace

double approx_observed_loglik(const DesignSet& ds, const Params& p,
                              const std::vector<PosteriorApprox>& post,
                              const std::vector<std::vector<double>>& cumhaz) {
  constexpr double log_2pi = 1.8378770664093454836;
  Eigen::LLT<Eigen::MatrixXd> llt(p.Sigma);
  if (llt.info() != Eigen::Success) throw NumericError("Sigma is not positive definite");
  const Eigen::Index q = p.Sigma.rows();
  const Eigen::MatrixXd Sigma_inv = llt.solve(Eigen::MatrixXd::Identity(q, q));
  const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  double total = 0.0;
  for (std::size_t i = 0; i < ds.n(); ++i) {
    const auto& s = ds.subjects[i];
    const double jump =
        s.cause > 0 ? jump_at(p.hazards[static_cast<std::size_t>(s.cause - 1)], s.T) : 0.0;
    Eigen::LLT<Eigen::MatrixXd> c(post[i].cov);
    if (c.info() != Eigen::Success)
      throw NumericError("posterior covariance of subject " + s.id + " is not positive definite");
    const double log_det_i = 2.0 * c.matrixLLT().diagonal().array().log().sum();
    total += full_log_density(s, p, Sigma_inv, log_det, cumhaz[i], jump, post[i].mode) +
             0.5 * static_cast<double>(q) * log_2pi + 0.5 * log_det_i;
  }
  return total;
}

double approx_observed_loglik(const DesignSet& ds, const Params& p,
                              const std::vector<PosteriorApprox>& post) {
  std::vector<std::vector<double>> cumhaz(ds.n());
  for (std::size_t i = 0; i < ds.n(); ++i)
    for (const auto& h : p.hazards) cumhaz[i].push_back(cum_hazard_at(h, ds.subjects[i].T));
  return approx_observed_loglik(ds, p, post, cumhaz);
}

double max_relative_change(const Eigen::VectorXd& next, const Eigen::VectorXd& prev) {
  return ((next - prev).array().abs() / (prev.array().abs() + 1e-3)).maxCoeff();
}

FitResult fit(const DesignSet& ds, const FitOptions& opts) {
  const auto t_start = Clock::now();
  const ModelSpec& spec = ds.spec;
  if (opts.max_iter < 1) throw DataError("max_iter must be at least 1");
  bool any_event = false;
  for (const auto& s : ds.subjects) any_event = any_event || s.cause > 0;
  if (!any_event) throw DataError("no uncensored events in the data");

  Params p = opts.init ? *opts.init : init_params(ds);
  p.validate(spec);
  const RiskStructure rs = RiskStructure::build(ds);
  scan::OpCounter counter;
  const MStepOptions mopts{opts.freeze_alpha, opts.engine};

  FitResult res;
  std::vector<PosteriorApprox> post;
  double best_ll = -std::numeric_limits<double>::infinity();
  Params best_params = p;
  std::vector<PosteriorApprox> best_post;

  auto e_step = [&](const Params& at) {
    const auto t0 = Clock::now();
    const auto cumhaz = cumhaz_by_subject(rs, at.hazards, opts.engine, &counter);
    post = run_e_step(ds, at, cumhaz, post, opts.threads, opts.mode);
    const double ll = approx_observed_loglik(ds, at, post, cumhaz);
    if (!std::isfinite(ll)) throw NumericError("approximate log-likelihood is not finite");
    res.loglik_trace.push_back(ll);
    if (ll > best_ll) {
      best_ll = ll;
      best_params = at;
      best_post = post;
    }
    res.timings.e_step_ms += ms_since(t0);
  };

  for (int it = 1; it <= opts.max_iter; ++it) {
    e_step(p);
    const auto t0 = Clock::now();
    Params next = m_step(ds, rs, p, post, mopts, &counter);
    res.timings.m_step_ms += ms_since(t0);
    const double change = max_relative_change(pack_omega(next, spec), pack_omega(p, spec));
    res.max_rel_change.push_back(change);
    res.iterations = it;
    p = std::move(next);
    if (change < opts.tol) {
      res.converged = true;
      break;
    }
  }

  if (res.converged) {
    res.params = p;
    res.posteriors = post;
  } else {
    e_step(p);  // score the last iterate too before picking the best one
    res.params = best_params;
    res.posteriors = best_post;
  }

  res.se = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(omega_size(spec)),
                                     std::numeric_limits<double>::quiet_NaN());
  if (opts.compute_se) {
    const auto t0 = Clock::now();
    try {
      const ScoreTables tables =
          build_score_tables(ds, rs, res.params, res.posteriors, opts.engine, &counter);
      const FisherResult f =
          empirical_fisher(score_matrix(ds, res.params, res.posteriors, tables, opts.threads));
      res.se = f.se;
      res.covariance = f.covariance;
      res.fisher_min_eigenvalue = f.min_eigenvalue;
    } catch (const NumericError& e) {
      res.se_error = e.what();
    }
    res.timings.se_ms = ms_since(t0);
  }
  res.op_count = counter.ops;
  res.timings.total_ms = ms_since(t_start);
  return res;
}

FitResult fit(const Dataset& data, const ModelSpec& spec, const FitOptions& opts) {
  return fit(build_designs(data, spec), opts);
}

nlohmann::ordered_json fit_result_to_json(const FitResult& r, const ModelSpec& spec) {
  nlohmann::ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["converged"] = r.converged;
  j["iterations"] = r.iterations;
  j["loglik_trace"] = r.loglik_trace;
  j["max_rel_change"] = r.max_rel_change;
  j["params"] = params_to_json(r.params);
  const auto names = omega_names(spec);
  const Eigen::VectorXd est = pack_omega(r.params, spec);
  nlohmann::ordered_json omega = nlohmann::ordered_json::array();
  for (std::size_t k = 0; k < names.size(); ++k) {
    const auto e = static_cast<Eigen::Index>(k);
    nlohmann::ordered_json row;
    row["parameter"] = names[k];
    row["estimate"] = est(e);
    if (std::isfinite(r.se(e)))
      row["se"] = r.se(e);
    else
      row["se"] = nullptr;
    omega.push_back(row);
  }
  j["omega"] = omega;
  j["fisher_min_eigenvalue"] = r.fisher_min_eigenvalue;
  if (!r.se_error.empty()) j["se_error"] = r.se_error;
  j["timings_ms"] = {{"e_step", r.timings.e_step_ms},
                     {"m_step", r.timings.m_step_ms},
                     {"standard_errors", r.timings.se_ms},
                     {"total", r.timings.total_ms}};
  j["op_count"] = r.op_count;
  return j;
}

std::string estimates_csv(const FitResult& r, const ModelSpec& spec) {
  const auto names = omega_names(spec);
  const Eigen::VectorXd est = pack_omega(r.params, spec);
  std::ostringstream os;
  os << "schema_version,parameter,estimate,se,ci_lower,ci_upper\n";
  for (std::size_t k = 0; k < names.size(); ++k) {
    const auto e = static_cast<Eigen::Index>(k);
    const double se = r.se(e);
    os << kSchemaVersion << ',' << names[k] << ',' << fmt(est(e)) << ',' << fmt(se) << ','
       << fmt(est(e) - 1.96 * se) << ',' << fmt(est(e) + 1.96 * se) << '\n';
  }
  return os.str();
}

}  // namespace jointcr
