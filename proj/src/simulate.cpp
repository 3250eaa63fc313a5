#include "jointcr/simulate.hpp"

#include "jointcr/error.hpp"
#include "jointcr/parallel.hpp"
#include "jointcr/philox.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace jointcr {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::vector<std::string> words(const std::string& s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  for (std::string w; is >> w;) out.push_back(w);
  return out;
}

Eigen::VectorXd numbers(const std::string& key, const std::string& s) {
  const auto w = words(s);
  Eigen::VectorXd v(static_cast<Eigen::Index>(w.size()));
  for (std::size_t i = 0; i < w.size(); ++i) {
    double x = 0.0;
    const auto r = std::from_chars(w[i].data(), w[i].data() + w[i].size(), x);
    if (r.ec != std::errc{} || r.ptr != w[i].data() + w[i].size())
      throw DataError("scenario: non-numeric value '" + w[i] + "' for " + key);
    v(static_cast<Eigen::Index>(i)) = x;
  }
  return v;
}

std::vector<Term> terms(const std::string& s) {
  std::vector<Term> out;
  for (const auto& w : words(s)) out.push_back(Term::parse(w));
  return out;
}

std::string join(const std::vector<Term>& t) {
  std::string s;
  for (std::size_t i = 0; i < t.size(); ++i) s += (i ? " " : "") + t[i].name();
  return s;
}

std::string join(const Eigen::VectorXd& v) {
  std::ostringstream os;
  os.precision(17);
  for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? " " : "") << v(i);
  return os.str();
}

double term_value(const Term& t, double x1, double x2, double time) {
  switch (t.kind) {
    case Term::Kind::intercept: return 1.0;
    case Term::Kind::time: return time;
    case Term::Kind::column:
      if (t.column == "x1") return x1;
      if (t.column == "x2") return x2;
  }
  throw DataError("scenario: unknown covariate '" + t.column + "' (expected x1 or x2)");
}

// Lower-triangular L with L L' = Sigma; PSD Sigma allowed.
Eigen::MatrixXd sqrt_factor(const Eigen::MatrixXd& Sigma) {
  Eigen::LLT<Eigen::MatrixXd> llt(Sigma);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Sigma);
  const double lo = es.eigenvalues().minCoeff();
  if (lo < -1e-12 * std::max(1.0, es.eigenvalues().maxCoeff()))
    throw DataError("scenario: Sigma is not positive semi-definite");
  return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

}  // namespace

ModelSpec ScenarioConfig::spec() const {
  std::vector<BiomarkerSpec> bs;
  for (const auto& b : biomarkers) bs.push_back({b.fixed, b.random});
  return ModelSpec(bs, survival, K());
}

Params ScenarioConfig::truth() const {
  Params p;
  const ModelSpec s = spec();
  p.beta.resize(s.p_total());
  p.sigma2.resize(s.G());
  for (int g = 0; g < s.G(); ++g) {
    p.beta.segment(s.p_offset(g), s.p(g)) = biomarkers[g].beta;
    p.sigma2(g) = biomarkers[g].sigma2;
  }
  p.Sigma = Sigma;
  p.gamma = gamma;
  p.alpha = alpha;
  p.hazards.resize(lambda0.size());
  return p;
}

void ScenarioConfig::validate() const {
  if (n < 1) throw DataError("scenario: n must be positive");
  if (biomarkers.empty()) throw DataError("scenario: no biomarkers");
  if (lambda0.empty()) throw DataError("scenario: no causes");
  const ModelSpec s = spec();
  for (std::size_t g = 0; g < biomarkers.size(); ++g) {
    if (biomarkers[g].beta.size() != static_cast<Eigen::Index>(biomarkers[g].fixed.size()))
      throw DataError("scenario: beta of biomarker " + std::to_string(g + 1) + " has wrong length");
    if (!(biomarkers[g].sigma2 > 0.0))
      throw DataError("scenario: sigma2 of biomarker " + std::to_string(g + 1) + " must be positive");
  }
  const int q = s.q_total();
  if (Sigma.rows() != q || Sigma.cols() != q) throw DataError("scenario: Sigma must be q x q");
  if (!Sigma.isApprox(Sigma.transpose(), 1e-12)) throw DataError("scenario: Sigma is not symmetric");
  sqrt_factor(Sigma);
  if (static_cast<int>(gamma.size()) != K() || static_cast<int>(alpha.size()) != K())
    throw DataError("scenario: need gamma and alpha for every cause");
  for (int k = 0; k < K(); ++k) {
    if (gamma[k].size() != s.w_dim()) throw DataError("scenario: gamma has wrong length");
    if (alpha[k].size() != q) throw DataError("scenario: alpha has wrong length");
    if (!(lambda0[k] >= 0.0)) throw DataError("scenario: baseline hazards must be non-negative");
  }
  if (!(censor_low > 0.0 && censor_high >= censor_low))
    throw DataError("scenario: censoring range must be positive and ordered");
  if (!(visit_step > 0.0)) throw DataError("scenario: visit step must be positive");
  if (!(x1_prob >= 0.0 && x1_prob <= 1.0)) throw DataError("scenario: x1_prob outside [0, 1]");
}

ScenarioConfig ScenarioConfig::parse(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  for (std::string line; std::getline(is, line);) {
    if (const auto h = line.find('#'); h != std::string::npos) line.resize(h);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError("scenario: expected key = value, got '" + line + "'");
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  auto take = [&](const std::string& key) -> std::string {
    const auto it = kv.find(key);
    if (it == kv.end()) throw DataError("scenario: missing key '" + key + "'");
    std::string v = it->second;
    kv.erase(it);
    return v;
  };
  auto scalar = [&](const std::string& key, double& out) {
    if (kv.count(key)) {
      const auto v = numbers(key, take(key));
      if (v.size() != 1) throw DataError("scenario: " + key + " needs one value");
      out = v(0);
    }
  };
  auto pair = [&](const std::string& key, double& lo, double& hi) {
    if (kv.count(key)) {
      const auto v = numbers(key, take(key));
      if (v.size() != 2) throw DataError("scenario: " + key + " needs two values");
      lo = v(0);
      hi = v(1);
    }
  };

  ScenarioConfig c;
  double n = c.n;
  scalar("n", n);
  c.n = static_cast<int>(n);
  scalar("x1_prob", c.x1_prob);
  pair("x2_range", c.x2_low, c.x2_high);
  pair("censoring", c.censor_low, c.censor_high);
  scalar("visit_step", c.visit_step);
  for (int g = 1; kv.count("biomarker." + std::to_string(g) + ".beta"); ++g) {
    const std::string pre = "biomarker." + std::to_string(g) + ".";
    BiomarkerTruth b;
    b.fixed = terms(take(pre + "fixed"));
    b.random = terms(take(pre + "random"));
    b.beta = numbers(pre + "beta", take(pre + "beta"));
    double s2 = 0.0;
    scalar(pre + "sigma2", s2);
    b.sigma2 = s2;
    c.biomarkers.push_back(std::move(b));
  }
  c.survival = terms(take("survival"));
  const auto lam = numbers("lambda0", take("lambda0"));
  c.lambda0.assign(lam.data(), lam.data() + lam.size());
  for (int k = 1; k <= c.K(); ++k) {
    c.gamma.push_back(numbers("gamma", take("gamma." + std::to_string(k))));
    c.alpha.push_back(numbers("alpha", take("alpha." + std::to_string(k))));
  }
  int q = 0;
  for (const auto& b : c.biomarkers) q += static_cast<int>(b.random.size());
  c.Sigma.resize(q, q);
  for (int r = 1; r <= q; ++r) {
    const auto row = numbers("Sigma", take("Sigma.row." + std::to_string(r)));
    if (row.size() != q) throw DataError("scenario: Sigma row " + std::to_string(r) + " needs q values");
    c.Sigma.row(r - 1) = row.transpose();
  }
  if (!kv.empty()) throw DataError("scenario: unknown key '" + kv.begin()->first + "'");
  c.validate();
  return c;
}

ScenarioConfig ScenarioConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("file not found: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string ScenarioConfig::to_text() const {
  std::ostringstream os;
  os.precision(17);
  os << "n = " << n << "\n"
     << "x1_prob = " << x1_prob << "\n"
     << "x2_range = " << x2_low << " " << x2_high << "\n"
     << "censoring = " << censor_low << " " << censor_high << "\n"
     << "visit_step = " << visit_step << "\n";
  for (std::size_t g = 0; g < biomarkers.size(); ++g) {
    const std::string pre = "biomarker." + std::to_string(g + 1) + ".";
    os << pre << "fixed = " << join(biomarkers[g].fixed) << "\n"
       << pre << "random = " << join(biomarkers[g].random) << "\n"
       << pre << "beta = " << join(biomarkers[g].beta) << "\n"
       << pre << "sigma2 = " << biomarkers[g].sigma2 << "\n";
  }
  os << "survival = " << join(survival) << "\n";
  os << "lambda0 =";
  for (double l : lambda0) os << " " << l;
  os << "\n";
  for (int k = 0; k < K(); ++k) {
    os << "gamma." << k + 1 << " = " << join(gamma[k]) << "\n";
    os << "alpha." << k + 1 << " = " << join(alpha[k]) << "\n";
  }
  for (Eigen::Index r = 0; r < Sigma.rows(); ++r)
    os << "Sigma.row." << r + 1 << " = " << join(Eigen::VectorXd(Sigma.row(r).transpose())) << "\n";
  return os.str();
}

ScenarioConfig default_scenario() {
  ScenarioConfig c;
  c.n = 800;
  const std::vector<Term> fixed = {Term::parse("intercept"), Term::parse("x1"), Term::parse("x2"),
                                   Term::parse("time")};
  const std::vector<Term> random = {Term::parse("intercept"), Term::parse("time")};
  const double betas[5][4] = {
      {5, 1.5, 2, 1}, {10, 1, 2, 1}, {10, -2, 1, 0.5}, {7, -2, 2, 1}, {5, 1, 2, 2}};
  for (const auto& b : betas) c.biomarkers.push_back({fixed, random, Eigen::Vector4d(b[0], b[1], b[2], b[3]), 0.5});
  c.survival = {Term::parse("x1"), Term::parse("x2")};
  c.Sigma = Eigen::MatrixXd::Identity(10, 10);
  c.gamma = {Eigen::Vector2d(1.0, 0.5), Eigen::Vector2d(-0.5, 0.5)};
  Eigen::VectorXd a(10);
  a << 0.5, 0.7, -0.5, 0.5, 0.1, 0.5, -0.1, 0.4, 0.2, 0.3;
  c.alpha = {a, a};
  c.lambda0 = {0.05, 0.025};
  return c;
}

Dataset generate(const ScenarioConfig& scn, std::uint64_t seed, int threads) {
  scn.validate();
  const ModelSpec spec = scn.spec();
  const Eigen::MatrixXd L = sqrt_factor(scn.Sigma);
  const int q = spec.q_total(), G = spec.G(), K = scn.K();

  Dataset ds;
  ds.G = G;
  ds.K = K;
  ds.long_columns = spec.long_columns();
  ds.surv_columns = spec.surv_columns();
  ds.subjects.resize(static_cast<std::size_t>(scn.n));

  auto columns = [](const std::vector<std::string>& names, double x1, double x2) {
    std::vector<double> v;
    for (const auto& c : names) v.push_back(term_value(Term::parse(c), x1, x2, 0.0));
    return v;
  };

  parallel_for(ds.subjects.size(), threads, [&](std::size_t i) {
    PhiloxStream rng(seed, i);
    SubjectRecord& sub = ds.subjects[i];
    sub.id = std::to_string(i + 1);
    const double x1 = rng.bernoulli(scn.x1_prob) ? 1.0 : 0.0;
    const double x2 = rng.uniform(scn.x2_low, scn.x2_high);
    Eigen::VectorXd z(q);
    for (int j = 0; j < q; ++j) z(j) = rng.normal();
    const Eigen::VectorXd b = L * z;

    Eigen::VectorXd W(spec.w_dim());
    for (int j = 0; j < spec.w_dim(); ++j) W(j) = term_value(scn.survival[j], x1, x2, 0.0);
    double T = std::numeric_limits<double>::infinity();
    int cause = 0;
    for (int k = 0; k < K; ++k) {
      const double rate = scn.lambda0[k] * std::exp(W.dot(scn.gamma[k]) + scn.alpha[k].dot(b));
      const double u = rng.uniform();
      const double tk = rate > 0.0 ? -std::log(u) / rate : std::numeric_limits<double>::infinity();
      if (tk < T) {
        T = tk;
        cause = k + 1;
      }
    }
    const double C = rng.uniform(scn.censor_low, scn.censor_high);
    if (C <= T) {
      T = C;
      cause = 0;
    }
    sub.surv = {T, cause, columns(ds.surv_columns, x1, x2)};

    const std::vector<double> covs = columns(ds.long_columns, x1, x2);
    sub.biomarkers.resize(static_cast<std::size_t>(G));
    for (int g = 0; g < G; ++g) {
      const auto& bt = scn.biomarkers[g];
      const Eigen::VectorXd bg = b.segment(spec.q_offset(g), spec.q(g));
      for (int j = 0;; ++j) {
        const double t = j * scn.visit_step;
        if (t > T) break;
        double mean = 0.0;
        for (std::size_t f = 0; f < bt.fixed.size(); ++f)
          mean += bt.beta(static_cast<Eigen::Index>(f)) * term_value(bt.fixed[f], x1, x2, t);
        for (std::size_t r = 0; r < bt.random.size(); ++r)
          mean += bg(static_cast<Eigen::Index>(r)) * term_value(bt.random[r], x1, x2, t);
        sub.biomarkers[g].push_back({t, mean + std::sqrt(bt.sigma2) * rng.normal(), covs});
      }
    }
  });
  ds.validate();
  return ds;
}

}  // namespace jointcr
