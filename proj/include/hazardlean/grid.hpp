#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <boost/random/uniform_int_distribution.hpp>

#include "json.hpp"

#include "hazardlean/error.hpp"
#include "hazardlean/rng.hpp"

namespace hazardlean {

/** Equidistant grid t_i = i/(q-1) on [0,1]. */
class TimeGrid {
 public:
  explicit TimeGrid(std::size_t q = 128) : q_(q) {
    if (q < 2) throw DomainError("TimeGrid needs q >= 2, got " + std::to_string(q));
    step_ = 1.0 / static_cast<double>(q - 1);
  }

  std::size_t size() const { return q_; }
  double step() const { return step_; }
  double operator[](std::size_t i) const {
    return static_cast<double>(i) / static_cast<double>(q_ - 1);
  }

  // largest i with t_i <= t
  std::size_t floor_index(double t) const {
    if (!(t >= 0.0 && t <= 1.0)) throw DomainError("time outside [0,1]: " + std::to_string(t));
    auto i = static_cast<std::size_t>(std::floor(t * static_cast<double>(q_ - 1)));
    if (i > q_ - 1) i = q_ - 1;
    while (i + 1 < q_ && (*this)[i + 1] <= t) ++i;
    while (i > 0 && (*this)[i] > t) --i;
    return i;
  }

  // smallest i with t_i >= t (t in [0,1])
  std::size_t ceil_index(double t) const {
    std::size_t i = floor_index(t);
    if ((*this)[i] < t && i + 1 < q_) ++i;
    return i;
  }

  std::vector<double> points() const {
    std::vector<double> p(q_);
    for (std::size_t i = 0; i < q_; ++i) p[i] = (*this)[i];
    return p;
  }

  bool operator==(const TimeGrid& o) const { return q_ == o.q_; }

 private:
  std::size_t q_;
  double step_;
};

/**
 * One subject observed on the grid. Paths are stopped at the event index:
 * the constructor copies row event_index of z and x onto all later rows.
 */
class SubjectPath {
 public:
  SubjectPath() = default;

  SubjectPath(Eigen::MatrixXd z, std::vector<double> x, std::size_t event_index, bool delta)
      : z_(std::move(z)), x_(std::move(x)), event_index_(event_index), delta_(delta) {
    const auto q = x_.size();
    if (q < 2) throw DimensionError("subject path needs at least 2 grid points");
    if (static_cast<std::size_t>(z_.rows()) != q)
      throw DimensionError("z has " + std::to_string(z_.rows()) + " rows, x has " +
                           std::to_string(q));
    if (event_index_ >= q) throw DomainError("event_index beyond the grid");
    for (std::size_t i = event_index_ + 1; i < q; ++i) {
      x_[i] = x_[event_index_];
      z_.row(static_cast<Eigen::Index>(i)) = z_.row(static_cast<Eigen::Index>(event_index_));
    }
  }

  std::size_t q() const { return x_.size(); }
  std::size_t d() const { return static_cast<std::size_t>(z_.cols()); }
  const Eigen::MatrixXd& z() const { return z_; }
  double z(std::size_t i, std::size_t k = 0) const {
    return z_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
  }
  const std::vector<double>& x() const { return x_; }
  double x(std::size_t i) const { return x_[i]; }
  std::size_t event_index() const { return event_index_; }
  bool delta() const { return delta_; }

  double at_risk(std::size_t i) const { return i <= event_index_ ? 1.0 : 0.0; }
  double event_increment(std::size_t i) const {
    return (delta_ && i == event_index_) ? 1.0 : 0.0;
  }
  double counting(std::size_t i) const { return (delta_ && i >= event_index_) ? 1.0 : 0.0; }

  std::vector<double> y_path() const {
    std::vector<double> y(q());
    for (std::size_t i = 0; i < q(); ++i) y[i] = at_risk(i);
    return y;
  }
  std::vector<double> n_path() const {
    std::vector<double> n(q());
    for (std::size_t i = 0; i < q(); ++i) n[i] = counting(i);
    return n;
  }

  bool operator==(const SubjectPath& o) const {
    return event_index_ == o.event_index_ && delta_ == o.delta_ && x_ == o.x_ &&
           z_.rows() == o.z_.rows() && z_.cols() == o.z_.cols() && z_ == o.z_;
  }

 private:
  Eigen::MatrixXd z_;
  std::vector<double> x_;
  std::size_t event_index_ = 0;
  bool delta_ = false;
};

class SurvivalSample {
 public:
  SurvivalSample(TimeGrid grid, std::vector<SubjectPath> subjects,
                 nlohmann::json metadata = nlohmann::json::object())
      : grid_(grid), subjects_(std::move(subjects)), metadata_(std::move(metadata)) {
    if (subjects_.empty()) throw DimensionError("sample needs at least one subject");
    d_ = subjects_.front().d();
    for (const auto& s : subjects_) {
      if (s.q() != grid_.size()) throw DimensionError("subject path length differs from grid");
      if (s.d() != d_) throw DimensionError("subjects disagree on covariate dimension");
    }
  }

  const TimeGrid& grid() const { return grid_; }
  std::size_t n() const { return subjects_.size(); }
  std::size_t d() const { return d_; }
  std::size_t q() const { return grid_.size(); }
  const SubjectPath& operator[](std::size_t j) const { return subjects_[j]; }
  const std::vector<SubjectPath>& subjects() const { return subjects_; }
  const nlohmann::json& metadata() const { return metadata_; }

  std::size_t event_count() const {
    std::size_t c = 0;
    for (const auto& s : subjects_) c += s.delta() ? 1 : 0;
    return c;
  }

 private:
  TimeGrid grid_;
  std::vector<SubjectPath> subjects_;
  std::size_t d_ = 0;
  nlohmann::json metadata_;
};

inline std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t j = 0; j < n; ++j) v[j] = j;
  return v;
}

/**
 * Partition of subject indices into k folds. k = 1 is the no-split plan
 * where every subject is used for training and evaluation.
 */
class FoldPlan {
 public:
  FoldPlan(std::size_t k, std::vector<int> assignment) : k_(k), assignment_(std::move(assignment)) {
    if (k_ < 1) throw PlanError("fold count must be >= 1");
    std::vector<std::size_t> sizes(k_, 0);
    for (int a : assignment_) {
      if (a < 0 || static_cast<std::size_t>(a) >= k_) throw PlanError("fold label out of range");
      ++sizes[static_cast<std::size_t>(a)];
    }
    for (std::size_t f = 0; f < k_; ++f)
      if (sizes[f] == 0) throw PlanError("fold " + std::to_string(f) + " is empty");
    auto [mn, mx] = std::minmax_element(sizes.begin(), sizes.end());
    if (*mx - *mn > 1) throw PlanError("fold sizes differ by more than one");
  }

  static FoldPlan no_split(std::size_t n) { return FoldPlan(1, std::vector<int>(n, 0)); }

  // random balanced plan; labels are dealt round-robin over a random permutation
  static FoldPlan random(std::size_t n, std::size_t k, Xoshiro256& rng) {
    if (k < 1) throw PlanError("fold count must be >= 1");
    if (n < k) throw PlanError("need n >= K (n=" + std::to_string(n) + ", K=" + std::to_string(k) + ")");
    std::vector<std::size_t> perm = all_indices(n);
    for (std::size_t i = n; i > 1; --i) {
      boost::random::uniform_int_distribution<std::size_t> u(0, i - 1);
      std::swap(perm[i - 1], perm[u(rng)]);
    }
    std::vector<int> a(n);
    for (std::size_t r = 0; r < n; ++r) a[perm[r]] = static_cast<int>(r % k);
    return FoldPlan(k, std::move(a));
  }

  std::size_t k() const { return k_; }
  std::size_t n() const { return assignment_.size(); }
  bool is_no_split() const { return k_ == 1; }
  const std::vector<int>& assignment() const { return assignment_; }

  std::vector<std::size_t> eval_indices(std::size_t fold) const {
    std::vector<std::size_t> v;
    for (std::size_t j = 0; j < assignment_.size(); ++j)
      if (static_cast<std::size_t>(assignment_[j]) == fold) v.push_back(j);
    return v;
  }

  std::vector<std::size_t> train_indices(std::size_t fold) const {
    if (is_no_split()) return all_indices(assignment_.size());
    std::vector<std::size_t> v;
    for (std::size_t j = 0; j < assignment_.size(); ++j)
      if (static_cast<std::size_t>(assignment_[j]) != fold) v.push_back(j);
    return v;
  }

 private:
  std::size_t k_;
  std::vector<int> assignment_;
};

/**
 * Path i -> sum_{1<=l<=i} g_l (dN_l - Y_l h_l dt). Entry 0 is 0.
 * Increment l reads only g_l, h_l and the counting data at l.
 */
inline std::vector<double> stieltjes_integrate(std::span<const double> g, const SubjectPath& s,
                                               std::span<const double> hazard,
                                               const TimeGrid& grid) {
  const std::size_t q = grid.size();
  if (g.size() != q || hazard.size() != q || s.q() != q)
    throw DimensionError("stieltjes_integrate: path lengths must all equal q");
  const double dt = grid.step();
  std::vector<double> out(q, 0.0);
  double acc = 0.0;
  const std::size_t last = std::min(s.event_index(), q - 1);
  for (std::size_t l = 1; l < q; ++l) {
    if (l <= last) {
      if (hazard[l] < 0.0) throw DomainError("negative hazard at index " + std::to_string(l));
      acc += g[l] * (s.event_increment(l) - hazard[l] * dt);
    }
    out[l] = acc;
  }
  return out;
}

/** Value of the path at the largest grid point <= t. */
inline double left_step_eval(std::span<const double> path, const TimeGrid& grid, double t) {
  if (path.size() != grid.size()) throw DimensionError("left_step_eval: path length != q");
  return path[grid.floor_index(t)];
}

}  // namespace hazardlean
