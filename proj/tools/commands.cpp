#include "commands.hpp"

#include "jointcr/em_driver.hpp"
#include "jointcr/error.hpp"
#include "jointcr/simulate.hpp"
#include "jointcr/study.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

namespace jointcr::cli {

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

ScenarioConfig scenario_from(const std::string& file, int n) {
  ScenarioConfig scn = file.empty() ? default_scenario() : ScenarioConfig::load(file);
  if (n > 0) scn.n = n;
  scn.validate();
  return scn;
}

struct FitArgs {
  std::string long_file, surv_file, spec_file, out = "fit_out";
  int max_iter = 500, threads = 1;
  double tol = 1e-4;
  std::string engine = "scan";
  bool drop_post_event = true;
};

int cmd_fit(const FitArgs& a, std::ostream& out) {
  for (const auto& f : {a.long_file, a.surv_file, a.spec_file})
    if (!fs::exists(f)) throw IoError("file not found: " + f);
  const ModelSpec spec = ModelSpec::load(a.spec_file);
  const Dataset data = load_dataset(a.long_file, a.surv_file, spec, a.drop_post_event);
  FitOptions fo;
  fo.max_iter = a.max_iter;
  fo.tol = a.tol;
  fo.threads = a.threads;
  fo.engine = scan::parse_engine(a.engine);
  const FitResult r = fit(data, spec, fo);
  const fs::path dir(a.out);
  write_text(dir / "fit.json", fit_result_to_json(r, spec).dump(2) + "\n");
  write_text(dir / "estimates.csv", estimates_csv(r, spec));
  out << "subjects: " << data.n() << " (dropped post-event rows: " << data.dropped_rows << ")\n"
      << "converged: " << (r.converged ? "yes" : "no") << " after " << r.iterations
      << " iterations\n"
      << "approximate log-likelihood: " << std::setprecision(10)
      << (r.loglik_trace.empty() ? 0.0 : r.loglik_trace.back()) << "\n"
      << "wall time: " << std::setprecision(4) << r.timings.total_ms / 1000.0 << " s\n";
  if (!r.se_error.empty()) out << "standard errors unavailable: " << r.se_error << "\n";
  out << "wrote " << (dir / "fit.json").string() << " and " << (dir / "estimates.csv").string()
      << "\n";
  return kOk;
}

struct SimArgs {
  std::string scenario, out = "sim_out";
  int n = 0, threads = 1;
  std::uint64_t seed = 1;
};

int cmd_simulate(const SimArgs& a, std::ostream& out) {
  const ScenarioConfig scn = scenario_from(a.scenario, a.n);
  const Dataset ds = generate(scn, a.seed, a.threads);
  const fs::path dir(a.out);
  fs::create_directories(dir);
  write_dataset(ds, dir / "long.csv", dir / "surv.csv");
  write_text(dir / "spec.txt", scn.spec().to_text());
  write_text(dir / "scenario.txt", scn.to_text());
  std::vector<int> counts(static_cast<std::size_t>(scn.K()) + 1, 0);
  std::size_t rows = 0;
  for (const auto& s : ds.subjects) {
    ++counts[static_cast<std::size_t>(s.surv.cause)];
    for (const auto& b : s.biomarkers) rows += b.size();
  }
  out << "subjects: " << ds.n() << ", longitudinal rows: " << rows << "\n"
      << "censored: " << counts[0];
  for (int k = 1; k <= scn.K(); ++k) out << ", cause " << k << ": " << counts[k];
  out << "\nwrote " << dir.string() << "/{long.csv,surv.csv,spec.txt,scenario.txt}\n";
  return kOk;
}

struct StudyArgs {
  std::string scenario, out = "study_out";
  int n = 300, replicates = 100, threads = 1, max_iter = 5000;
  double tol = 1e-4;
  std::uint64_t seed = 1;
};

int cmd_replicate_study(const StudyArgs& a, std::ostream& out, std::ostream& err) {
  const ScenarioConfig scn = scenario_from(a.scenario, a.n);
  StudyOptions so;
  so.replicates = a.replicates;
  so.seed = a.seed;
  so.threads = a.threads;
  so.fit.max_iter = a.max_iter;
  so.fit.tol = a.tol;
  const StudyResult r = run_study(scn, so, [&](const ReplicateOutcome& o) {
    if (!o.ok) err << "replicate " << o.replicate << " failed: " << o.error << "\n";
  });
  const fs::path dir(a.out);
  write_text(dir / "study.csv", study_csv(r));
  std::ostringstream reps;
  reps << "schema_version,replicate,seed,ok,iterations,wall_ms,error\n";
  for (const auto& o : r.outcomes)
    reps << kSchemaVersion << ',' << o.replicate << ',' << o.seed << ',' << (o.ok ? 1 : 0) << ','
         << o.iterations << ',' << o.wall_ms << ",\"" << o.error << "\"\n";
  write_text(dir / "replicates.csv", reps.str());
  out << "replicates: " << a.replicates << ", failures: " << r.failures << "\n"
      << "wrote " << (dir / "study.csv").string() << "\n";
  return kOk;
}

struct BenchArgs {
  std::vector<int> n{1000, 2000, 4000, 8000};
  std::string engine = "both", out = "benchmark.csv";
  int max_iter = 3, threads = 1;
  std::uint64_t seed = 1;
};

int cmd_benchmark(const BenchArgs& a, std::ostream& out) {
  std::vector<scan::Engine> engines;
  if (a.engine == "both")
    engines = {scan::Engine::scan, scan::Engine::naive};
  else
    engines = {scan::parse_engine(a.engine)};
  std::ostringstream csv;
  csv << "schema_version,n,engine,wall_ms,op_count\n";
  for (int n : a.n) {
    ScenarioConfig scn = default_scenario();
    scn.n = n;
    const Dataset ds = generate(scn, a.seed);
    const DesignSet designs = build_designs(ds, scn.spec());
    for (auto e : engines) {
      FitOptions fo;
      fo.max_iter = a.max_iter;
      fo.threads = a.threads;
      fo.engine = e;
      const FitResult r = fit(designs, fo);
      csv << kSchemaVersion << ',' << n << ',' << scan::to_string(e) << ','
          << r.timings.total_ms << ',' << r.op_count << '\n';
      out << "n=" << n << " engine=" << scan::to_string(e) << " wall_ms=" << r.timings.total_ms
          << " op_count=" << r.op_count << "\n";
    }
  }
  write_text(a.out, csv.str());
  out << "wrote " << a.out << "\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Joint models of longitudinal biomarkers and competing risks"};
  app.require_subcommand(1);
  const std::vector<std::string> engines{"scan", "naive"};

  FitArgs fa;
  auto* fit_cmd = app.add_subcommand("fit", "Fit a joint model to CSV data");
  fit_cmd->add_option("--long", fa.long_file, "Longitudinal CSV")->required();
  fit_cmd->add_option("--surv", fa.surv_file, "Survival CSV")->required();
  fit_cmd->add_option("--spec", fa.spec_file, "Model specification file")->required();
  fit_cmd->add_option("--out", fa.out, "Output directory")->capture_default_str();
  fit_cmd->add_option("--max-iter", fa.max_iter, "Maximum EM iterations")->capture_default_str()
      ->check(CLI::PositiveNumber);
  fit_cmd->add_option("--tol", fa.tol, "Relative convergence tolerance")->capture_default_str()
      ->check(CLI::PositiveNumber);
  fit_cmd->add_option("--threads", fa.threads, "Worker threads")->capture_default_str()
      ->check(CLI::PositiveNumber);
  fit_cmd->add_option("--engine", fa.engine, "Risk-set engine")->capture_default_str()
      ->check(CLI::IsMember(engines));
  fit_cmd->add_flag("--drop-post-event,!--keep-post-event", fa.drop_post_event,
                    "Drop longitudinal rows after the survival time (otherwise reject them)")
      ->capture_default_str();

  SimArgs sa;
  auto* sim_cmd = app.add_subcommand("simulate", "Generate a dataset from a scenario");
  sim_cmd->add_option("--scenario", sa.scenario, "Scenario file (default: built-in five-biomarker scenario)");
  sim_cmd->add_option("--n", sa.n, "Number of subjects (overrides the scenario)");
  sim_cmd->add_option("--seed", sa.seed, "Random seed")->capture_default_str();
  sim_cmd->add_option("--threads", sa.threads, "Worker threads")->capture_default_str()
      ->check(CLI::PositiveNumber);
  sim_cmd->add_option("--out", sa.out, "Output directory")->capture_default_str();

  StudyArgs st;
  auto* study_cmd = app.add_subcommand("replicate-study", "Repeated simulate/fit parameter-recovery study");
  study_cmd->add_option("--scenario", st.scenario, "Scenario file (default: built-in)");
  study_cmd->add_option("--n", st.n, "Subjects per replicate")->capture_default_str();
  study_cmd->add_option("--replicates", st.replicates, "Number of replicates")->capture_default_str()
      ->check(CLI::PositiveNumber);
  study_cmd->add_option("--seed", st.seed, "Study seed")->capture_default_str();
  study_cmd->add_option("--threads", st.threads, "Replicates run concurrently")->capture_default_str()
      ->check(CLI::PositiveNumber);
  study_cmd->add_option("--max-iter", st.max_iter, "Maximum EM iterations")->capture_default_str();
  study_cmd->add_option("--tol", st.tol, "Relative convergence tolerance")->capture_default_str();
  study_cmd->add_option("--out", st.out, "Output directory")->capture_default_str();

  BenchArgs ba;
  auto* bench_cmd = app.add_subcommand("benchmark", "Scan vs naive risk-set engine timings");
  bench_cmd->add_option("--n", ba.n, "Sample sizes")->capture_default_str();
  bench_cmd->add_option("--engine", ba.engine, "scan, naive or both")->capture_default_str()
      ->check(CLI::IsMember({"scan", "naive", "both"}));
  bench_cmd->add_option("--max-iter", ba.max_iter, "EM iterations per fit")->capture_default_str();
  bench_cmd->add_option("--threads", ba.threads, "Worker threads (default 1)")->capture_default_str();
  bench_cmd->add_option("--seed", ba.seed, "Random seed")->capture_default_str();
  bench_cmd->add_option("--out", ba.out, "Output CSV")->capture_default_str();

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kUsageFailure;
  }

  try {
    if (*fit_cmd) return cmd_fit(fa, out);
    if (*sim_cmd) return cmd_simulate(sa, out);
    if (*study_cmd) return cmd_replicate_study(st, out, err);
    if (*bench_cmd) return cmd_benchmark(ba, out);
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kNumericFailure;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kUsageFailure;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kUsageFailure;
  }
  return kUsageFailure;
}

}  // namespace jointcr::cli
