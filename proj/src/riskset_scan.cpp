#include "jointcr/riskset_scan.hpp"

#include "jointcr/error.hpp"

#include <algorithm>
#include <numeric>

namespace jointcr::scan {

namespace {

void require_nonincreasing(std::span<const double> t, const char* what) {
  for (std::size_t i = 1; i < t.size(); ++i)
    if (t[i] > t[i - 1])
      throw DataError(std::string("unsorted input: ") + what + " must be non-increasing");
}

void require_decreasing(std::span<const double> t) {
  for (std::size_t i = 1; i < t.size(); ++i)
    if (!(t[i] < t[i - 1]))
      throw DataError("unsorted input: event times must be strictly decreasing");
}

void count(OpCounter* c, std::uint64_t n = 1) {
  if (c) c->add(n);
}

RowMatrix as_column(const std::vector<double>& v) {
  RowMatrix m(static_cast<Eigen::Index>(v.size()), 1);
  for (std::size_t i = 0; i < v.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = v[i];
  return m;
}

std::vector<double> column_to_vector(const RowMatrix& m) {
  std::vector<double> v(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) v[static_cast<std::size_t>(i)] = m(i, 0);
  return v;
}

// Suffix sums over increasing time: out.row(l) = sum_{l' >= l} per_event.row(l').
RowMatrix cumulate_upward(const RowMatrix& per_event, OpCounter* counter) {
  RowMatrix out(per_event.rows(), per_event.cols());
  Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(per_event.cols());
  for (Eigen::Index l = per_event.rows(); l-- > 0;) {
    acc += per_event.row(l);
    out.row(l) = acc;
    count(counter);
  }
  return out;
}

}  // namespace

Engine parse_engine(const std::string& name) {
  if (name == "scan") return Engine::scan;
  if (name == "naive") return Engine::naive;
  throw DataError("unknown engine '" + name + "' (expected scan or naive)");
}

std::string to_string(Engine e) { return e == Engine::scan ? "scan" : "naive"; }

RiskSetIndex RiskSetIndex::build(std::span<const double> times) {
  RiskSetIndex idx;
  idx.order.resize(times.size());
  std::iota(idx.order.begin(), idx.order.end(), std::size_t{0});
  std::stable_sort(idx.order.begin(), idx.order.end(),
                   [&](std::size_t a, std::size_t b) { return times[a] > times[b]; });
  idx.position.resize(times.size());
  idx.sorted_times.resize(times.size());
  for (std::size_t pos = 0; pos < idx.order.size(); ++pos) {
    idx.position[idx.order[pos]] = pos;
    idx.sorted_times[pos] = times[idx.order[pos]];
  }
  return idx;
}

RowMatrix RiskSetIndex::to_sorted(const RowMatrix& by_subject) const {
  RowMatrix out(by_subject.rows(), by_subject.cols());
  for (std::size_t pos = 0; pos < order.size(); ++pos)
    out.row(static_cast<Eigen::Index>(pos)) = by_subject.row(static_cast<Eigen::Index>(order[pos]));
  return out;
}

RowMatrix RiskSetIndex::to_subject(const RowMatrix& sorted) const {
  RowMatrix out(sorted.rows(), sorted.cols());
  for (std::size_t pos = 0; pos < order.size(); ++pos)
    out.row(static_cast<Eigen::Index>(order[pos])) = sorted.row(static_cast<Eigen::Index>(pos));
  return out;
}

std::vector<double> RiskSetIndex::to_subject(const std::vector<double>& sorted) const {
  std::vector<double> out(sorted.size());
  for (std::size_t pos = 0; pos < order.size(); ++pos) out[order[pos]] = sorted[pos];
  return out;
}

RowMatrix step_lookup(std::span<const double> event_times, const RowMatrix& values,
                      std::span<const double> sorted_times, OpCounter* counter) {
  require_decreasing(event_times);
  require_nonincreasing(sorted_times, "observed times");
  const auto m = event_times.size();
  RowMatrix out = RowMatrix::Zero(static_cast<Eigen::Index>(sorted_times.size()), values.cols());
  // l advances monotonically: it is the first knot with t_l <= T_(pos).
  std::size_t l = 0;
  for (std::size_t pos = 0; pos < sorted_times.size(); ++pos) {
    while (l < m && sorted_times[pos] < event_times[l]) {
      ++l;
      count(counter);
    }
    if (l < m) out.row(static_cast<Eigen::Index>(pos)) = values.row(static_cast<Eigen::Index>(l));
    count(counter);
  }
  return out;
}

std::vector<double> scan_cumhazard(const BaselineHazard& h, std::span<const double> sorted_times,
                                   OpCounter* counter) {
  const RowMatrix cum = as_column(h.cumulative());
  count(counter, h.size());
  return column_to_vector(step_lookup(h.times, cum, sorted_times, counter));
}

RowMatrix scan_riskset_sums(const RowMatrix& quantities, std::span<const double> sorted_times,
                            std::span<const double> event_times, OpCounter* counter) {
  require_decreasing(event_times);
  require_nonincreasing(sorted_times, "observed times");
  if (quantities.rows() != static_cast<Eigen::Index>(sorted_times.size()))
    throw DataError("risk-set quantities need one row per subject");
  RowMatrix out(static_cast<Eigen::Index>(event_times.size()), quantities.cols());
  Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(quantities.cols());
  std::size_t pos = 0;
  for (std::size_t l = 0; l < event_times.size(); ++l) {
    // R(t_l) = R(t_{l-1}) plus subjects with T in [t_l, t_{l-1})
    while (pos < sorted_times.size() && sorted_times[pos] >= event_times[l]) {
      acc += quantities.row(static_cast<Eigen::Index>(pos));
      ++pos;
      count(counter);
    }
    out.row(static_cast<Eigen::Index>(l)) = acc;
    count(counter);
  }
  return out;
}

RowMatrix scan_B_lookup(const RowMatrix& per_event, std::span<const double> event_times,
                        std::span<const double> sorted_times, OpCounter* counter) {
  if (per_event.rows() != static_cast<Eigen::Index>(event_times.size()))
    throw DataError("per-event values need one row per event time");
  return step_lookup(event_times, cumulate_upward(per_event, counter), sorted_times, counter);
}

namespace naive {

RowMatrix step_lookup(std::span<const double> event_times, const RowMatrix& values,
                      std::span<const double> sorted_times, OpCounter* counter) {
  require_decreasing(event_times);
  require_nonincreasing(sorted_times, "observed times");
  RowMatrix out = RowMatrix::Zero(static_cast<Eigen::Index>(sorted_times.size()), values.cols());
  for (std::size_t pos = 0; pos < sorted_times.size(); ++pos) {
    for (std::size_t l = 0; l < event_times.size(); ++l) {
      count(counter);
      if (event_times[l] <= sorted_times[pos]) {
        out.row(static_cast<Eigen::Index>(pos)) = values.row(static_cast<Eigen::Index>(l));
        break;
      }
    }
  }
  return out;
}

std::vector<double> scan_cumhazard(const BaselineHazard& h, std::span<const double> sorted_times,
                                   OpCounter* counter) {
  require_decreasing(h.times);
  require_nonincreasing(sorted_times, "observed times");
  std::vector<double> out(sorted_times.size(), 0.0);
  for (std::size_t pos = 0; pos < sorted_times.size(); ++pos) {
    double acc = 0.0;
    for (std::size_t l = h.size(); l-- > 0;) {
      count(counter);
      if (h.times[l] <= sorted_times[pos]) acc += h.jumps[l];
    }
    out[pos] = acc;
  }
  return out;
}

RowMatrix scan_riskset_sums(const RowMatrix& quantities, std::span<const double> sorted_times,
                            std::span<const double> event_times, OpCounter* counter) {
  require_decreasing(event_times);
  require_nonincreasing(sorted_times, "observed times");
  if (quantities.rows() != static_cast<Eigen::Index>(sorted_times.size()))
    throw DataError("risk-set quantities need one row per subject");
  RowMatrix out(static_cast<Eigen::Index>(event_times.size()), quantities.cols());
  for (std::size_t l = 0; l < event_times.size(); ++l) {
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(quantities.cols());
    for (std::size_t pos = 0; pos < sorted_times.size(); ++pos) {
      count(counter);
      if (sorted_times[pos] >= event_times[l]) acc += quantities.row(static_cast<Eigen::Index>(pos));
    }
    out.row(static_cast<Eigen::Index>(l)) = acc;
  }
  return out;
}

RowMatrix scan_B_lookup(const RowMatrix& per_event, std::span<const double> event_times,
                        std::span<const double> sorted_times, OpCounter* counter) {
  require_decreasing(event_times);
  require_nonincreasing(sorted_times, "observed times");
  if (per_event.rows() != static_cast<Eigen::Index>(event_times.size()))
    throw DataError("per-event values need one row per event time");
  RowMatrix out(static_cast<Eigen::Index>(sorted_times.size()), per_event.cols());
  for (std::size_t pos = 0; pos < sorted_times.size(); ++pos) {
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(per_event.cols());
    for (std::size_t l = event_times.size(); l-- > 0;) {
      count(counter);
      if (event_times[l] <= sorted_times[pos]) acc += per_event.row(static_cast<Eigen::Index>(l));
    }
    out.row(static_cast<Eigen::Index>(pos)) = acc;
  }
  return out;
}

}  // namespace naive

RowMatrix step_lookup(Engine e, std::span<const double> event_times, const RowMatrix& values,
                      std::span<const double> sorted_times, OpCounter* counter) {
  return e == Engine::scan ? step_lookup(event_times, values, sorted_times, counter)
                           : naive::step_lookup(event_times, values, sorted_times, counter);
}

std::vector<double> cumhazard(Engine e, const BaselineHazard& h,
                              std::span<const double> sorted_times, OpCounter* counter) {
  return e == Engine::scan ? scan_cumhazard(h, sorted_times, counter)
                           : naive::scan_cumhazard(h, sorted_times, counter);
}

RowMatrix riskset_sums(Engine e, const RowMatrix& quantities, std::span<const double> sorted_times,
                       std::span<const double> event_times, OpCounter* counter) {
  return e == Engine::scan ? scan_riskset_sums(quantities, sorted_times, event_times, counter)
                           : naive::scan_riskset_sums(quantities, sorted_times, event_times, counter);
}

RowMatrix B_lookup(Engine e, const RowMatrix& per_event, std::span<const double> event_times,
                   std::span<const double> sorted_times, OpCounter* counter) {
  return e == Engine::scan ? scan_B_lookup(per_event, event_times, sorted_times, counter)
                           : naive::scan_B_lookup(per_event, event_times, sorted_times, counter);
}

}  // namespace jointcr::scan
