#include "jointcr/study.hpp"

#include "jointcr/error.hpp"
#include "jointcr/parallel.hpp"
#include "jointcr/philox.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <mutex>
#include <sstream>

namespace jointcr {

namespace {

std::string fmt(double v) {
  if (!std::isfinite(v)) return "NA";
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace

std::uint64_t replicate_seed(std::uint64_t seed, int r) {
  return Philox4x64::generate({static_cast<std::uint64_t>(r), 0, 0, 0}, {seed, 0x5eedULL})[0];
}

std::vector<StudyRow> summarize(const std::vector<ReplicateOutcome>& outcomes,
                                const Eigen::VectorXd& truth, const std::vector<std::string>& names) {
  std::vector<const ReplicateOutcome*> ok;
  for (const auto& o : outcomes)
    if (o.ok) ok.push_back(&o);
  const double R = static_cast<double>(ok.size());
  std::vector<StudyRow> rows;
  for (Eigen::Index j = 0; j < truth.size(); ++j) {
    StudyRow row;
    row.parameter = names[static_cast<std::size_t>(j)];
    row.truth = truth(j);
    row.replicates = static_cast<int>(ok.size());
    double sum = 0.0, hits = 0.0;
    std::vector<double> ses;
    for (const auto* o : ok) {
      sum += o->estimate(j);
      ses.push_back(o->se(j));
      if (std::abs(o->estimate(j) - truth(j)) <= 1.96 * o->se(j)) hits += 1.0;
    }
    const double mean = ok.empty() ? std::numeric_limits<double>::quiet_NaN() : sum / R;
    row.bias = mean - truth(j);
    if (ok.size() >= 2) {
      double ss = 0.0;
      for (const auto* o : ok) ss += (o->estimate(j) - mean) * (o->estimate(j) - mean);
      row.sd = std::sqrt(ss / (R - 1.0));
      row.mcse = row.sd / std::sqrt(R);
    } else {
      row.sd = row.mcse = std::numeric_limits<double>::quiet_NaN();
    }
    row.median_se = median(ses);
    row.coverage = ok.empty() ? std::numeric_limits<double>::quiet_NaN() : hits / R;
    rows.push_back(row);
  }
  return rows;
}

StudyResult run_study(const ScenarioConfig& scn, const StudyOptions& opts,
                      const std::function<void(const ReplicateOutcome&)>& on_done) {
  if (opts.replicates < 1) throw DataError("replicates must be at least 1");
  const ModelSpec spec = scn.spec();
  StudyResult res;
  res.outcomes.resize(static_cast<std::size_t>(opts.replicates));
  std::mutex report;
  FitOptions fo = opts.fit;
  fo.threads = 1;
  parallel_for(res.outcomes.size(), opts.threads, [&](std::size_t r) {
    ReplicateOutcome& o = res.outcomes[r];
    o.replicate = static_cast<int>(r) + 1;
    o.seed = replicate_seed(opts.seed, static_cast<int>(r));
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const FitResult f = fit(generate(scn, o.seed), spec, fo);
      o.estimate = pack_omega(f.params, spec);
      o.se = f.se;
      o.iterations = f.iterations;
      if (!f.converged)
        o.error = "EM did not converge in " + std::to_string(f.iterations) + " iterations";
      else if (!f.se_error.empty())
        o.error = f.se_error;
      else if (!o.se.allFinite())
        o.error = "non-finite standard errors";
      o.ok = o.error.empty();
    } catch (const Error& e) {
      o.error = e.what();
    }
    o.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    if (on_done) {
      std::lock_guard lock(report);
      on_done(o);
    }
  });
  for (const auto& o : res.outcomes) res.failures += o.ok ? 0 : 1;
  res.rows = summarize(res.outcomes, pack_omega(scn.truth(), spec), omega_names(spec));
  return res;
}

std::string study_csv(const StudyResult& r) {
  std::ostringstream os;
  os << "schema_version,parameter,truth,bias,sd,median_se,cp,mcse,replicates,failures\n";
  for (const auto& row : r.rows)
    os << kSchemaVersion << ',' << row.parameter << ',' << fmt(row.truth) << ',' << fmt(row.bias)
       << ',' << fmt(row.sd) << ',' << fmt(row.median_se) << ',' << fmt(row.coverage) << ','
       << fmt(row.mcse) << ',' << row.replicates << ',' << r.failures << '\n';
  return os.str();
}

}  // namespace jointcr
