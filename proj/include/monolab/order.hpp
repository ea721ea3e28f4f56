#pragma once

/// Orthant cone orders on discretized state spaces.
///
/// A state is a flat array of `species * nodes` reals stored species-major
/// (all nodes of species 0, then species 1, ...). An orthant order assigns a
/// sign to every species; x <= y iff sign_s * (y - x) >= 0 at every node.

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace monolab {

/// Raised when a caller breaks a documented precondition.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

inline void require(bool condition, const std::string& what) {
  if (!condition) throw ContractViolation(what);
}

struct Layout {
  std::size_t species = 1;
  std::size_t nodes = 1;

  std::size_t size() const { return species * nodes; }
  std::size_t index(std::size_t s, std::size_t j) const { return s * nodes + j; }

  friend bool operator==(const Layout&, const Layout&) = default;
};

/// A point of the discretized state space.
class StateVec {
 public:
  StateVec() = default;

  StateVec(Eigen::VectorXd values, Layout layout)
      : values_(std::move(values)), layout_(layout) {
    require(static_cast<std::size_t>(values_.size()) == layout_.size(),
            "StateVec: layout " + std::to_string(layout_.species) + "x" +
                std::to_string(layout_.nodes) + " does not match length " +
                std::to_string(values_.size()));
  }

  /// Single-node state (plain ODE network).
  explicit StateVec(const std::vector<double>& values)
      : StateVec(Eigen::Map<const Eigen::VectorXd>(values.data(),
                                                   static_cast<Eigen::Index>(values.size())),
                 Layout{values.size(), 1}) {}

  StateVec(std::initializer_list<double> values)
      : StateVec(std::vector<double>(values)) {}

  static StateVec constant(Layout layout, double value) {
    return StateVec(Eigen::VectorXd::Constant(static_cast<Eigen::Index>(layout.size()), value),
                    layout);
  }

  static StateVec zeros(Layout layout) { return constant(layout, 0.0); }

  const Eigen::VectorXd& values() const { return values_; }
  Eigen::VectorXd& values() { return values_; }
  const Layout& layout() const { return layout_; }
  std::size_t size() const { return layout_.size(); }

  double operator[](std::size_t i) const { return values_[static_cast<Eigen::Index>(i)]; }
  double& operator[](std::size_t i) { return values_[static_cast<Eigen::Index>(i)]; }

  double at(std::size_t species, std::size_t node) const {
    return (*this)[layout_.index(species, node)];
  }

  bool all_finite() const { return values_.allFinite(); }
  double sup_norm() const { return values_.size() == 0 ? 0.0 : values_.lpNorm<Eigen::Infinity>(); }

  std::vector<double> to_vector() const {
    return std::vector<double>(values_.data(), values_.data() + values_.size());
  }

  friend bool operator==(const StateVec& a, const StateVec& b) {
    return a.layout_ == b.layout_ && a.values_ == b.values_;
  }

 private:
  Eigen::VectorXd values_;
  Layout layout_;
};

inline double sup_distance(const StateVec& a, const StateVec& b) {
  require(a.layout() == b.layout(), "sup_distance: layout mismatch");
  return (a.values() - b.values()).lpNorm<Eigen::Infinity>();
}

class ConeOrder {
 public:
  static constexpr double kDefaultMargin = 1e-9;

  ConeOrder(std::vector<int> signs, double strict_margin = kDefaultMargin)
      : signs_(std::move(signs)), eta_(strict_margin) {
    require(!signs_.empty(), "ConeOrder: signs must be nonempty");
    for (int s : signs_) require(s == 1 || s == -1, "ConeOrder: signs must be +1 or -1");
    require(eta_ > 0.0, "ConeOrder: strict margin must be positive");
  }

  /// Standard nonnegative orthant on `species` components.
  static ConeOrder standard(std::size_t species, double strict_margin = kDefaultMargin) {
    return ConeOrder(std::vector<int>(species, 1), strict_margin);
  }

  const std::vector<int>& signs() const { return signs_; }
  double eta() const { return eta_; }
  std::size_t species() const { return signs_.size(); }

  int sign_of(const Layout& layout, std::size_t flat_index) const {
    return signs_[flat_index / layout.nodes];
  }

  /// Sign-adjusted difference sign_s * (y - x).
  Eigen::VectorXd adjusted_difference(const StateVec& x, const StateVec& y) const {
    check_layout(x, y);
    Eigen::VectorXd diff = y.values() - x.values();
    const Layout& l = x.layout();
    for (std::size_t s = 0; s < l.species; ++s) {
      if (signs_[s] < 0) diff.segment(static_cast<Eigen::Index>(s * l.nodes),
                                      static_cast<Eigen::Index>(l.nodes)) *= -1.0;
    }
    return diff;
  }

  void check_layout(const StateVec& x, const StateVec& y) const {
    require(x.layout() == y.layout(), "cone comparison: layout mismatch");
    require(x.layout().species == signs_.size(),
            "cone comparison: order has " + std::to_string(signs_.size()) +
                " species, state has " + std::to_string(x.layout().species));
  }

 private:
  std::vector<int> signs_;
  double eta_;
};

inline bool cone_leq(const StateVec& x, const StateVec& y, const ConeOrder& order) {
  const Eigen::VectorXd d = order.adjusted_difference(x, y);
  return d.size() == 0 || d.minCoeff() >= 0.0;
}

inline bool cone_lt(const StateVec& x, const StateVec& y, const ConeOrder& order) {
  const Eigen::VectorXd d = order.adjusted_difference(x, y);
  return d.size() > 0 && d.minCoeff() >= 0.0 && d.maxCoeff() > 0.0;
}

inline bool cone_ll(const StateVec& x, const StateVec& y, const ConeOrder& order) {
  const Eigen::VectorXd d = order.adjusted_difference(x, y);
  return d.size() > 0 && d.minCoeff() >= order.eta();
}

/// x <= y up to an absolute slack `tol` in every sign-adjusted coordinate.
inline bool cone_leq_within(const StateVec& x, const StateVec& y, const ConeOrder& order,
                            double tol) {
  const Eigen::VectorXd d = order.adjusted_difference(x, y);
  return d.size() == 0 || d.minCoeff() >= -tol;
}

/// x < y robustly: x <= y within `tol` and some coordinate exceeds `tol`.
inline bool cone_lt_margin(const StateVec& x, const StateVec& y, const ConeOrder& order,
                           double tol) {
  const Eigen::VectorXd d = order.adjusted_difference(x, y);
  return d.size() > 0 && d.minCoeff() >= -tol && d.maxCoeff() > tol;
}

/// Closed segment x0 + t v, t in [0,1], with v > 0 in the active order.
class Segment {
 public:
  Segment(StateVec base, StateVec direction, const ConeOrder& order)
      : base_(std::move(base)), direction_(std::move(direction)) {
    require(base_.layout() == direction_.layout(), "Segment: base/direction layout mismatch");
    const StateVec zero = StateVec::zeros(base_.layout());
    require(cone_lt(zero, direction_, order), "Segment: direction must be positive (v > 0)");
  }

  const StateVec& base() const { return base_; }
  const StateVec& direction() const { return direction_; }

  StateVec point(double t) const {
    return StateVec(base_.values() + t * direction_.values(), base_.layout());
  }

 private:
  StateVec base_;
  StateVec direction_;
};

/// The N+1 equispaced quadrature nodes x0 + (k/N) v, k = 0..N.
inline std::vector<StateVec> segment_points(const Segment& segment, std::size_t n) {
  require(n >= 1, "segment_points: N must be >= 1");
  std::vector<StateVec> points;
  points.reserve(n + 1);
  for (std::size_t k = 0; k <= n; ++k) {
    points.push_back(segment.point(static_cast<double>(k) / static_cast<double>(n)));
  }
  return points;
}

namespace detail {

inline StateVec pointwise_extremum(const std::vector<StateVec>& states, const ConeOrder& order,
                                   bool lower) {
  require(!states.empty(), "pointwise inf/sup: empty list");
  const Layout layout = states.front().layout();
  Eigen::VectorXd out = states.front().values();
  for (const StateVec& s : states) {
    order.check_layout(states.front(), s);
    for (Eigen::Index i = 0; i < out.size(); ++i) {
      const int sign = order.sign_of(layout, static_cast<std::size_t>(i));
      const bool take_min = (sign > 0) == lower;
      out[i] = take_min ? std::min(out[i], s.values()[i]) : std::max(out[i], s.values()[i]);
    }
  }
  return StateVec(std::move(out), layout);
}

}  // namespace detail

/// Greatest lower bound in the orthant order (sign-adjusted coordinatewise min).
inline StateVec pointwise_inf(const std::vector<StateVec>& states, const ConeOrder& order) {
  return detail::pointwise_extremum(states, order, true);
}

/// Least upper bound in the orthant order.
inline StateVec pointwise_sup(const std::vector<StateVec>& states, const ConeOrder& order) {
  return detail::pointwise_extremum(states, order, false);
}

}  // namespace monolab
