#include "jointcr/data_model.hpp"

#include "jointcr/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

namespace jointcr {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string tok;
  while (in >> tok) {
    // allow "a, b" as well as "a b"
    for (auto& part : split(tok, ','))
      if (!part.empty()) out.push_back(part);
  }
  return out;
}

double parse_double(const std::string& cell, const std::string& where) {
  double v = 0.0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  if (!cell.empty() && *begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc{} || ptr != end || cell.empty())
    throw DataError("non-numeric cell '" + cell + "' at " + where);
  return v;
}

long parse_int(const std::string& cell, const std::string& where) {
  long v = 0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc{} || ptr != cell.data() + cell.size() || cell.empty()) {
    // accept integral floats such as "1.0"
    const double d = parse_double(cell, where);
    if (d != std::floor(d)) throw DataError("non-integer cell '" + cell + "' at " + where);
    return static_cast<long>(d);
  }
  return v;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("file not found: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;

  std::size_t column(const std::string& name, const std::string& file) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError("missing column '" + name + "' in " + file);
    return static_cast<std::size_t>(it - header.begin());
  }
};

CsvTable parse_csv(const std::string& text, const std::string& file) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto cells = split(line, ',');
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size())
      throw DataError(file + " line " + std::to_string(lineno) + ": expected " +
                      std::to_string(t.header.size()) + " cells, got " +
                      std::to_string(cells.size()));
    t.rows.push_back(std::move(cells));
    t.line_numbers.push_back(lineno);
  }
  if (t.header.empty()) throw DataError(file + " is empty");
  return t;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

double term_value(const Term& term, double time, const std::vector<double>& covariates,
                  const std::vector<std::size_t>& column_index, std::size_t term_pos) {
  switch (term.kind) {
    case Term::Kind::intercept: return 1.0;
    case Term::Kind::time: return time;
    case Term::Kind::column: return covariates[column_index[term_pos]];
  }
  return 0.0;
}

}  // namespace

Term Term::parse(const std::string& token) {
  if (token == "intercept" || token == "1") return {Kind::intercept, {}};
  if (token == "time") return {Kind::time, {}};
  if (token.empty()) throw DataError("empty design term");
  return {Kind::column, token};
}

std::string Term::name() const {
  switch (kind) {
    case Kind::intercept: return "intercept";
    case Kind::time: return "time";
    case Kind::column: return column;
  }
  return {};
}

ModelSpec::ModelSpec(std::vector<BiomarkerSpec> biomarkers, std::vector<Term> survival,
                     int causes)
    : biomarkers_(std::move(biomarkers)), survival_(std::move(survival)), causes_(causes) {
  validate();
  for (const auto& b : biomarkers_) {
    p_offset_.push_back(p_offset_.back() + static_cast<int>(b.fixed.size()));
    q_offset_.push_back(q_offset_.back() + static_cast<int>(b.random.size()));
  }
}

void ModelSpec::validate() const {
  if (biomarkers_.empty()) throw DataError("model spec declares no biomarkers");
  if (causes_ < 1) throw DataError("model spec needs at least one cause");
  for (std::size_t g = 0; g < biomarkers_.size(); ++g) {
    if (biomarkers_[g].fixed.empty())
      throw DataError("biomarker " + std::to_string(g + 1) + " has no fixed terms");
    if (biomarkers_[g].random.empty())
      throw DataError("biomarker " + std::to_string(g + 1) + " has no random terms");
  }
  for (const auto& t : survival_)
    if (t.kind != Term::Kind::column)
      throw DataError("survival terms must be covariate columns, got '" + t.name() + "'");
}

ModelSpec ModelSpec::parse(const std::string& text) {
  std::map<int, BiomarkerSpec> markers;
  std::map<int, std::pair<bool, bool>> seen;
  std::vector<Term> survival;
  int causes = -1;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw DataError("model spec line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    std::vector<Term> terms;
    for (const auto& tok : split_ws(value)) terms.push_back(Term::parse(tok));

    if (key == "causes") {
      causes = static_cast<int>(parse_int(value, "model spec line " + std::to_string(lineno)));
    } else if (key == "survival") {
      survival = std::move(terms);
    } else if (key.rfind("biomarker.", 0) == 0) {
      const auto parts = split(key, '.');
      if (parts.size() != 3 || (parts[2] != "fixed" && parts[2] != "random"))
        throw DataError("model spec line " + std::to_string(lineno) + ": bad key '" + key + "'");
      const int g = static_cast<int>(parse_int(parts[1], "model spec key " + key));
      if (g < 1) throw DataError("biomarker indices start at 1");
      if (parts[2] == "fixed") {
        markers[g].fixed = std::move(terms);
        seen[g].first = true;
      } else {
        markers[g].random = std::move(terms);
        seen[g].second = true;
      }
    } else {
      throw DataError("model spec line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
  }
  if (causes < 0) throw DataError("model spec is missing 'causes'");
  std::vector<BiomarkerSpec> list;
  for (int g = 1; g <= static_cast<int>(markers.size()); ++g) {
    const auto it = markers.find(g);
    if (it == markers.end())
      throw DataError("model spec skips biomarker " + std::to_string(g));
    if (!seen[g].first || !seen[g].second)
      throw DataError("biomarker " + std::to_string(g) + " needs both fixed and random terms");
    list.push_back(it->second);
  }
  return ModelSpec(std::move(list), std::move(survival), causes);
}

ModelSpec ModelSpec::load(const std::filesystem::path& path) { return parse(read_file(path)); }

std::string ModelSpec::to_text() const {
  std::ostringstream out;
  out << "causes = " << causes_ << "\n";
  auto join = [](const std::vector<Term>& terms) {
    std::string s;
    for (const auto& t : terms) s += (s.empty() ? "" : " ") + t.name();
    return s;
  };
  for (int g = 0; g < G(); ++g) {
    out << "biomarker." << g + 1 << ".fixed = " << join(biomarkers_[g].fixed) << "\n";
    out << "biomarker." << g + 1 << ".random = " << join(biomarkers_[g].random) << "\n";
  }
  out << "survival = " << join(survival_) << "\n";
  return out.str();
}

std::vector<std::string> ModelSpec::long_columns() const {
  std::vector<std::string> cols;
  auto add = [&](const std::vector<Term>& terms) {
    for (const auto& t : terms)
      if (t.kind == Term::Kind::column &&
          std::find(cols.begin(), cols.end(), t.column) == cols.end())
        cols.push_back(t.column);
  };
  for (const auto& b : biomarkers_) {
    add(b.fixed);
    add(b.random);
  }
  return cols;
}

std::vector<std::string> ModelSpec::surv_columns() const {
  std::vector<std::string> cols;
  for (const auto& t : survival_) cols.push_back(t.column);
  return cols;
}

bool subject_id_less(const std::string& a, const std::string& b) {
  long ia = 0, ib = 0;
  const auto ra = std::from_chars(a.data(), a.data() + a.size(), ia);
  const auto rb = std::from_chars(b.data(), b.data() + b.size(), ib);
  const bool na = ra.ec == std::errc{} && ra.ptr == a.data() + a.size() && !a.empty();
  const bool nb = rb.ec == std::errc{} && rb.ptr == b.data() + b.size() && !b.empty();
  if (na && nb) return ia != ib ? ia < ib : a < b;
  if (na != nb) return na;  // numeric ids first
  return a < b;
}

void Dataset::validate() const {
  if (G < 1 || K < 1) throw DataError("dataset needs G >= 1 and K >= 1");
  for (std::size_t s = 0; s < subjects.size(); ++s) {
    const auto& sub = subjects[s];
    if (s > 0 && !subject_id_less(subjects[s - 1].id, sub.id))
      throw DataError("subjects not sorted / duplicate id at '" + sub.id + "'");
    const auto& sv = sub.surv;
    if (!std::isfinite(sv.time) || !(sv.time > 0.0))
      throw DataError("subject " + sub.id + ": survival time must be positive and finite");
    if (sv.cause < 0 || sv.cause > K)
      throw DataError("subject " + sub.id + ": unknown cause index " + std::to_string(sv.cause));
    if (sv.covariates.size() != surv_columns.size())
      throw DataError("subject " + sub.id + ": survival covariate length mismatch");
    for (double v : sv.covariates)
      if (!std::isfinite(v)) throw DataError("subject " + sub.id + ": non-finite survival covariate");
    if (static_cast<int>(sub.biomarkers.size()) != G)
      throw DataError("subject " + sub.id + ": wrong number of biomarker lists");
    for (const auto& rows : sub.biomarkers) {
      for (const auto& o : rows) {
        if (!std::isfinite(o.time) || o.time < 0.0)
          throw DataError("subject " + sub.id + ": measurement time must be finite and >= 0");
        if (!std::isfinite(o.value)) throw DataError("subject " + sub.id + ": non-finite value");
        if (o.time > sv.time)
          throw DataError("subject " + sub.id + ": longitudinal time after survival time");
        if (o.covariates.size() != long_columns.size())
          throw DataError("subject " + sub.id + ": longitudinal covariate length mismatch");
        for (double v : o.covariates)
          if (!std::isfinite(v)) throw DataError("subject " + sub.id + ": non-finite covariate");
      }
    }
  }
}

Dataset parse_dataset(const std::string& long_csv, const std::string& surv_csv,
                      const ModelSpec& spec, bool drop_post_event) {
  const CsvTable lt = parse_csv(long_csv, "longitudinal file");
  const CsvTable st = parse_csv(surv_csv, "survival file");

  Dataset ds;
  ds.G = spec.G();
  ds.K = spec.K();

  const std::size_t l_subject = lt.column("subject", "longitudinal file");
  const std::size_t l_marker = lt.column("biomarker", "longitudinal file");
  const std::size_t l_time = lt.column("time", "longitudinal file");
  const std::size_t l_value = lt.column("value", "longitudinal file");
  std::vector<std::size_t> l_cov;
  for (std::size_t c = 0; c < lt.header.size(); ++c) {
    if (c == l_subject || c == l_marker || c == l_time || c == l_value) continue;
    ds.long_columns.push_back(lt.header[c]);
    l_cov.push_back(c);
  }
  const std::size_t s_subject = st.column("subject", "survival file");
  const std::size_t s_time = st.column("time", "survival file");
  const std::size_t s_cause = st.column("cause", "survival file");
  std::vector<std::size_t> s_cov;
  for (std::size_t c = 0; c < st.header.size(); ++c) {
    if (c == s_subject || c == s_time || c == s_cause) continue;
    ds.surv_columns.push_back(st.header[c]);
    s_cov.push_back(c);
  }
  for (const auto& name : spec.long_columns()) lt.column(name, "longitudinal file");
  for (const auto& name : spec.surv_columns()) st.column(name, "survival file");

  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t r = 0; r < st.rows.size(); ++r) {
    const auto& row = st.rows[r];
    const std::string where = "survival file line " + std::to_string(st.line_numbers[r]);
    SubjectRecord rec;
    rec.id = row[s_subject];
    if (rec.id.empty()) throw DataError("empty subject id at " + where);
    rec.surv.time = parse_double(row[s_time], where);
    const long cause = parse_int(row[s_cause], where);
    if (cause < 0 || cause > spec.K())
      throw DataError("unknown cause index " + std::to_string(cause) + " at " + where);
    rec.surv.cause = static_cast<int>(cause);
    for (auto c : s_cov) rec.surv.covariates.push_back(parse_double(row[c], where));
    rec.biomarkers.resize(spec.G());
    if (!index.emplace(rec.id, ds.subjects.size()).second)
      throw DataError("duplicate survival record for subject '" + rec.id + "'");
    ds.subjects.push_back(std::move(rec));
  }

  for (std::size_t r = 0; r < lt.rows.size(); ++r) {
    const auto& row = lt.rows[r];
    const std::string where = "longitudinal file line " + std::to_string(lt.line_numbers[r]);
    const auto it = index.find(row[l_subject]);
    if (it == index.end())
      throw DataError("no survival record for subject '" + row[l_subject] + "' at " + where);
    auto& rec = ds.subjects[it->second];
    const long g = parse_int(row[l_marker], where);
    if (g < 1 || g > spec.G())
      throw DataError("biomarker index " + std::to_string(g) + " out of range at " + where);
    LongObs obs;
    obs.time = parse_double(row[l_time], where);
    obs.value = parse_double(row[l_value], where);
    for (auto c : l_cov) obs.covariates.push_back(parse_double(row[c], where));
    if (obs.time > rec.surv.time) {
      if (!drop_post_event)
        throw DataError("longitudinal time " + row[l_time] + " after survival time of subject '" +
                        rec.id + "' at " + where);
      ++ds.dropped_rows;
      continue;
    }
    rec.biomarkers[static_cast<std::size_t>(g - 1)].push_back(std::move(obs));
  }

  for (auto& rec : ds.subjects)
    for (auto& rows : rec.biomarkers)
      std::stable_sort(rows.begin(), rows.end(),
                       [](const LongObs& a, const LongObs& b) { return a.time < b.time; });
  std::sort(ds.subjects.begin(), ds.subjects.end(),
            [](const SubjectRecord& a, const SubjectRecord& b) { return subject_id_less(a.id, b.id); });
  ds.validate();
  return ds;
}

Dataset load_dataset(const std::filesystem::path& long_file,
                     const std::filesystem::path& surv_file, const ModelSpec& spec,
                     bool drop_post_event) {
  const std::string long_csv = read_file(long_file);
  const std::string surv_csv = read_file(surv_file);
  return parse_dataset(long_csv, surv_csv, spec, drop_post_event);
}

void write_dataset(const Dataset& ds, const std::filesystem::path& long_file,
                   const std::filesystem::path& surv_file) {
  std::ofstream lo(long_file);
  if (!lo) throw IoError("cannot write " + long_file.string());
  lo << "subject,biomarker,time,value";
  for (const auto& c : ds.long_columns) lo << ',' << c;
  lo << '\n';
  for (const auto& rec : ds.subjects)
    for (std::size_t g = 0; g < rec.biomarkers.size(); ++g)
      for (const auto& o : rec.biomarkers[g]) {
        lo << rec.id << ',' << g + 1 << ',' << format_double(o.time) << ','
           << format_double(o.value);
        for (double v : o.covariates) lo << ',' << format_double(v);
        lo << '\n';
      }

  std::ofstream so(surv_file);
  if (!so) throw IoError("cannot write " + surv_file.string());
  so << "subject,time,cause";
  for (const auto& c : ds.surv_columns) so << ',' << c;
  so << '\n';
  for (const auto& rec : ds.subjects) {
    so << rec.id << ',' << format_double(rec.surv.time) << ',' << rec.surv.cause;
    for (double v : rec.surv.covariates) so << ',' << format_double(v);
    so << '\n';
  }
  if (!lo || !so) throw IoError("write failed for dataset files");
}

Eigen::Index SubjectDesign::n_obs() const {
  Eigen::Index n = 0;
  for (const auto& b : blocks) n += b.n();
  return n;
}

Eigen::MatrixXd SubjectDesign::stacked_X() const {
  Eigen::Index rows = n_obs(), cols = 0;
  for (const auto& b : blocks) cols += b.X.cols();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(rows, cols);
  Eigen::Index r = 0, c = 0;
  for (const auto& b : blocks) {
    out.block(r, c, b.X.rows(), b.X.cols()) = b.X;
    r += b.X.rows();
    c += b.X.cols();
  }
  return out;
}

Eigen::MatrixXd SubjectDesign::stacked_Z() const {
  Eigen::Index rows = n_obs(), cols = 0;
  for (const auto& b : blocks) cols += b.Z.cols();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(rows, cols);
  Eigen::Index r = 0, c = 0;
  for (const auto& b : blocks) {
    out.block(r, c, b.Z.rows(), b.Z.cols()) = b.Z;
    r += b.Z.rows();
    c += b.Z.cols();
  }
  return out;
}

Eigen::VectorXd SubjectDesign::stacked_y() const {
  Eigen::VectorXd out(n_obs());
  Eigen::Index r = 0;
  for (const auto& b : blocks) {
    out.segment(r, b.n()) = b.y;
    r += b.n();
  }
  return out;
}

Eigen::VectorXd SubjectDesign::Xt_times(const Eigen::VectorXd& v) const {
  Eigen::Index cols = 0;
  for (const auto& b : blocks) cols += b.X.cols();
  Eigen::VectorXd out(cols);
  Eigen::Index r = 0, c = 0;
  for (const auto& b : blocks) {
    out.segment(c, b.X.cols()).noalias() = b.X.transpose() * v.segment(r, b.n());
    r += b.n();
    c += b.X.cols();
  }
  return out;
}

Eigen::VectorXd SubjectDesign::Zt_times(const Eigen::VectorXd& v) const {
  Eigen::Index cols = 0;
  for (const auto& b : blocks) cols += b.Z.cols();
  Eigen::VectorXd out(cols);
  Eigen::Index r = 0, c = 0;
  for (const auto& b : blocks) {
    out.segment(c, b.Z.cols()).noalias() = b.Z.transpose() * v.segment(r, b.n());
    r += b.n();
    c += b.Z.cols();
  }
  return out;
}

std::vector<double> DesignSet::times() const {
  std::vector<double> t;
  t.reserve(subjects.size());
  for (const auto& s : subjects) t.push_back(s.T);
  return t;
}

std::vector<int> DesignSet::causes() const {
  std::vector<int> d;
  d.reserve(subjects.size());
  for (const auto& s : subjects) d.push_back(s.cause);
  return d;
}

DesignSet build_designs(const Dataset& ds, const ModelSpec& spec) {
  if (ds.G != spec.G() || ds.K != spec.K())
    throw DataError("dataset dimensions do not match model spec");

  auto resolve = [](const std::vector<Term>& terms, const std::vector<std::string>& columns,
                    const char* file) {
    std::vector<std::size_t> idx(terms.size(), 0);
    for (std::size_t j = 0; j < terms.size(); ++j) {
      if (terms[j].kind != Term::Kind::column) continue;
      const auto it = std::find(columns.begin(), columns.end(), terms[j].column);
      if (it == columns.end())
        throw DataError(std::string("dimension mismatch: column '") + terms[j].column +
                        "' not present in " + file + " data");
      idx[j] = static_cast<std::size_t>(it - columns.begin());
    }
    return idx;
  };

  std::vector<std::vector<std::size_t>> fixed_idx, random_idx;
  for (int g = 0; g < spec.G(); ++g) {
    fixed_idx.push_back(resolve(spec.biomarker(g).fixed, ds.long_columns, "longitudinal"));
    random_idx.push_back(resolve(spec.biomarker(g).random, ds.long_columns, "longitudinal"));
  }
  const auto w_idx = resolve(spec.survival(), ds.surv_columns, "survival");

  DesignSet out;
  out.spec = spec;
  out.subjects.reserve(ds.n());
  for (const auto& rec : ds.subjects) {
    SubjectDesign sd;
    sd.id = rec.id;
    sd.T = rec.surv.time;
    sd.cause = rec.surv.cause;
    sd.W.resize(spec.w_dim());
    for (int j = 0; j < spec.w_dim(); ++j) sd.W(j) = rec.surv.covariates[w_idx[j]];
    for (int g = 0; g < spec.G(); ++g) {
      const auto& rows = rec.biomarkers[g];
      const auto n = static_cast<Eigen::Index>(rows.size());
      BlockDesign b;
      b.X.resize(n, spec.p(g));
      b.Z.resize(n, spec.q(g));
      b.y.resize(n);
      b.times.resize(n);
      for (Eigen::Index j = 0; j < n; ++j) {
        const auto& o = rows[j];
        for (int c = 0; c < spec.p(g); ++c)
          b.X(j, c) = term_value(spec.biomarker(g).fixed[c], o.time, o.covariates, fixed_idx[g], c);
        for (int c = 0; c < spec.q(g); ++c)
          b.Z(j, c) = term_value(spec.biomarker(g).random[c], o.time, o.covariates, random_idx[g], c);
        b.y(j) = o.value;
        b.times(j) = o.time;
      }
      b.ZtZ = b.Z.transpose() * b.Z;
      b.XtZ = b.X.transpose() * b.Z;
      sd.blocks.push_back(std::move(b));
    }
    out.subjects.push_back(std::move(sd));
  }
  return out;
}

}  // namespace jointcr
