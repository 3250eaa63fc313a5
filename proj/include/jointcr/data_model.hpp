#pragma once

// Longitudinal + competing-risks survival data: model specification, CSV
// ingestion and per-subject design matrices.
//
// Design matrices use the row convention: X_ig is n_ig x p_g and the mean of
// Y_ig is X_ig * beta_g (the transpose of the column-vector notation X_ig(t)).

#include <Eigen/Dense>

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace jointcr {

// A design term: the constant 1, the observation time, or a named numeric column.
struct Term {
  enum class Kind { intercept, time, column };
  Kind kind = Kind::intercept;
  std::string column;  // set when kind == column

  static Term parse(const std::string& token);
  std::string name() const;
  bool operator==(const Term&) const = default;
};

struct BiomarkerSpec {
  std::vector<Term> fixed;
  std::vector<Term> random;
};

class ModelSpec {
 public:
  ModelSpec() = default;
  ModelSpec(std::vector<BiomarkerSpec> biomarkers, std::vector<Term> survival, int causes);

  // Parses the plain-text spec format:
  //   causes = 2
  //   biomarker.1.fixed = intercept x1 x2 time
  //   biomarker.1.random = intercept time
  //   survival = x1 x2
  // Blank lines and '#' comments are ignored.
  static ModelSpec parse(const std::string& text);
  static ModelSpec load(const std::filesystem::path& path);
  std::string to_text() const;

  int G() const { return static_cast<int>(biomarkers_.size()); }
  int K() const { return causes_; }
  int p(int g) const { return static_cast<int>(biomarkers_[g].fixed.size()); }
  int q(int g) const { return static_cast<int>(biomarkers_[g].random.size()); }
  int p_offset(int g) const { return p_offset_[g]; }
  int q_offset(int g) const { return q_offset_[g]; }
  int p_total() const { return p_offset_.back(); }
  int q_total() const { return q_offset_.back(); }
  int w_dim() const { return static_cast<int>(survival_.size()); }

  const BiomarkerSpec& biomarker(int g) const { return biomarkers_[g]; }
  const std::vector<Term>& survival() const { return survival_; }

  // Column names referenced by the longitudinal designs, in first-use order.
  std::vector<std::string> long_columns() const;
  std::vector<std::string> surv_columns() const;

 private:
  void validate() const;

  std::vector<BiomarkerSpec> biomarkers_;
  std::vector<Term> survival_;
  int causes_ = 1;
  std::vector<int> p_offset_{0};
  std::vector<int> q_offset_{0};
};

struct LongObs {
  double time = 0.0;
  double value = 0.0;
  std::vector<double> covariates;  // aligned with Dataset::long_columns
};

struct SurvRecord {
  double time = 0.0;
  int cause = 0;  // 0 = censored
  std::vector<double> covariates;  // aligned with Dataset::surv_columns
};

struct SubjectRecord {
  std::string id;
  std::vector<std::vector<LongObs>> biomarkers;  // G lists, sorted by time
  SurvRecord surv;
};

struct Dataset {
  int G = 0;
  int K = 0;
  std::vector<std::string> long_columns;
  std::vector<std::string> surv_columns;
  std::vector<SubjectRecord> subjects;  // sorted by id
  std::size_t dropped_rows = 0;

  std::size_t n() const { return subjects.size(); }
  // Checks every invariant (finite values, causes in range, t <= T, ...).
  void validate() const;
};

// Reads the two CSV files. Header of the longitudinal file is
// subject,biomarker,time,value,<covariates...>; of the survival file
// subject,time,cause,<covariates...>. Biomarker indices are 1-based.
// Rows with time > T_i are dropped (and counted) when drop_post_event is set,
// otherwise they are an error.
Dataset load_dataset(const std::filesystem::path& long_file,
                     const std::filesystem::path& surv_file, const ModelSpec& spec,
                     bool drop_post_event = true);

// Parses CSV text already in memory; used by load_dataset.
Dataset parse_dataset(const std::string& long_csv, const std::string& surv_csv,
                      const ModelSpec& spec, bool drop_post_event = true);

void write_dataset(const Dataset& ds, const std::filesystem::path& long_file,
                   const std::filesystem::path& surv_file);

// Stable ordering for subject ids: integer ids numerically, others lexically.
bool subject_id_less(const std::string& a, const std::string& b);

struct BlockDesign {
  Eigen::MatrixXd X;  // n_ig x p_g
  Eigen::MatrixXd Z;  // n_ig x q_g
  Eigen::VectorXd y;
  Eigen::VectorXd times;
  Eigen::MatrixXd ZtZ;  // Z^T Z, cached
  Eigen::MatrixXd XtZ;  // X^T Z, cached

  Eigen::Index n() const { return y.size(); }
};

struct SubjectDesign {
  std::string id;
  std::vector<BlockDesign> blocks;
  Eigen::VectorXd W;
  double T = 0.0;
  int cause = 0;

  Eigen::Index n_obs() const;
  // Dense direct sums; only for diagnostics and tests.
  Eigen::MatrixXd stacked_X() const;
  Eigen::MatrixXd stacked_Z() const;
  Eigen::VectorXd stacked_y() const;
  // X_i^T v and Z_i^T v for a stacked n_i-vector v, block by block.
  Eigen::VectorXd Xt_times(const Eigen::VectorXd& v) const;
  Eigen::VectorXd Zt_times(const Eigen::VectorXd& v) const;
};

struct DesignSet {
  ModelSpec spec;
  std::vector<SubjectDesign> subjects;

  std::size_t n() const { return subjects.size(); }
  std::vector<double> times() const;
  std::vector<int> causes() const;
};

DesignSet build_designs(const Dataset& ds, const ModelSpec& spec);

}  // namespace jointcr
