#pragma once

// Linear-scan risk-set algorithms and their quadratic reference versions.
//
// Conventions shared by every routine here:
//   * event_times are the distinct event times of one cause, strictly
//     decreasing (t_0 > t_1 > ... > t_{m-1});
//   * sorted_times are the subjects' observed times T, non-increasing,
//     i.e. subjects already permuted into RiskSetIndex order;
//   * the risk set of t_l is {r : T_r >= t_l}.
// Per-subject or per-event quantities are rows of a row-major matrix, so
// scalar, vector and (flattened) matrix quantities share one code path.

#include "jointcr/params.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace jointcr::scan {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Counts elementary visits (one per subject or event time touched).
struct OpCounter {
  std::uint64_t ops = 0;
  void add(std::uint64_t n = 1) { ops += n; }
};

enum class Engine { scan, naive };
Engine parse_engine(const std::string& name);
std::string to_string(Engine e);

// Subjects ordered by observed time, decreasing; equal times keep subject order.
struct RiskSetIndex {
  std::vector<std::size_t> order;     // order[pos] = subject index
  std::vector<std::size_t> position;  // position[subject] = pos
  std::vector<double> sorted_times;

  static RiskSetIndex build(std::span<const double> times);
  std::size_t n() const { return order.size(); }
  RowMatrix to_sorted(const RowMatrix& by_subject) const;
  RowMatrix to_subject(const RowMatrix& sorted) const;
  std::vector<double> to_subject(const std::vector<double>& sorted) const;
};

// f(T) for the right-continuous step function equal to values.row(l) on
// [t_l, t_{l-1}) (and on [t_0, inf) for l = 0), zero below t_{m-1}.
RowMatrix step_lookup(std::span<const double> event_times, const RowMatrix& values,
                      std::span<const double> sorted_times, OpCounter* counter = nullptr);

// Lambda(T_(i)) for every sorted subject.
std::vector<double> scan_cumhazard(const BaselineHazard& h, std::span<const double> sorted_times,
                                   OpCounter* counter = nullptr);

// Row l of the result is the sum of quantities over the risk set of t_l.
// quantities rows follow sorted_times.
RowMatrix scan_riskset_sums(const RowMatrix& quantities, std::span<const double> sorted_times,
                            std::span<const double> event_times, OpCounter* counter = nullptr);

// B(T_(i)) = sum of per_event rows over event times t_l <= T_(i).
RowMatrix scan_B_lookup(const RowMatrix& per_event, std::span<const double> event_times,
                        std::span<const double> sorted_times, OpCounter* counter = nullptr);

// Reference implementations: explicit double loops, same results.
namespace naive {
RowMatrix step_lookup(std::span<const double> event_times, const RowMatrix& values,
                      std::span<const double> sorted_times, OpCounter* counter = nullptr);
std::vector<double> scan_cumhazard(const BaselineHazard& h, std::span<const double> sorted_times,
                                   OpCounter* counter = nullptr);
RowMatrix scan_riskset_sums(const RowMatrix& quantities, std::span<const double> sorted_times,
                            std::span<const double> event_times, OpCounter* counter = nullptr);
RowMatrix scan_B_lookup(const RowMatrix& per_event, std::span<const double> event_times,
                        std::span<const double> sorted_times, OpCounter* counter = nullptr);
}  // namespace naive

// Engine-dispatching wrappers used by the estimation code.
RowMatrix step_lookup(Engine e, std::span<const double> event_times, const RowMatrix& values,
                      std::span<const double> sorted_times, OpCounter* counter = nullptr);
std::vector<double> cumhazard(Engine e, const BaselineHazard& h,
                              std::span<const double> sorted_times, OpCounter* counter = nullptr);
RowMatrix riskset_sums(Engine e, const RowMatrix& quantities, std::span<const double> sorted_times,
                       std::span<const double> event_times, OpCounter* counter = nullptr);
RowMatrix B_lookup(Engine e, const RowMatrix& per_event, std::span<const double> event_times,
                   std::span<const double> sorted_times, OpCounter* counter = nullptr);

}  // namespace jointcr::scan
