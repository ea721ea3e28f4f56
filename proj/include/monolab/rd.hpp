#pragma once

// Method-of-lines reaction-diffusion models u_t = D Lap u + f(u) with
// homogeneous Neumann conditions on intervals and rectangles.

#include "monolab/expr.hpp"
#include "monolab/model.hpp"
#include "monolab/random.hpp"

#include <Eigen/SparseCore>

#include <array>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace monolab {

class Grid {
 public:
  /// Interval [0, length] with `nodes` equispaced nodes.
  static Grid interval(double length, std::size_t nodes) { return Grid(1, {length, 0.0}, {nodes, 1}); }

  /// Rectangle [0, lx] x [0, ly]; node index is ix + nx * iy.
  static Grid rectangle(double lx, double ly, std::size_t nx, std::size_t ny) {
    return Grid(2, {lx, ly}, {nx, ny});
  }

  int dimension() const { return dimension_; }
  double length(int axis) const { return lengths_[static_cast<std::size_t>(axis)]; }
  std::size_t nodes(int axis) const { return counts_[static_cast<std::size_t>(axis)]; }
  double spacing(int axis) const {
    return lengths_[static_cast<std::size_t>(axis)] /
           static_cast<double>(counts_[static_cast<std::size_t>(axis)] - 1);
  }
  std::size_t node_count() const { return counts_[0] * counts_[1]; }

  /// Coordinate of node `j` along `axis`.
  double coordinate(std::size_t j, int axis) const {
    const std::size_t i = axis == 0 ? j % counts_[0] : j / counts_[0];
    return static_cast<double>(i) * spacing(axis);
  }

  /// Trapezoidal quadrature weights (tensor product in 2-D).
  Eigen::VectorXd trapezoid_weights() const {
    Eigen::VectorXd w(static_cast<Eigen::Index>(node_count()));
    for (std::size_t j = 0; j < node_count(); ++j) {
      double wj = 1.0;
      for (int axis = 0; axis < dimension_; ++axis) {
        const std::size_t i = axis == 0 ? j % counts_[0] : j / counts_[0];
        const bool edge = i == 0 || i + 1 == counts_[static_cast<std::size_t>(axis)];
        wj *= spacing(axis) * (edge ? 0.5 : 1.0);
      }
      w[static_cast<Eigen::Index>(j)] = wj;
    }
    return w;
  }

 private:
  Grid(int dimension, std::array<double, 2> lengths, std::array<std::size_t, 2> counts)
      : dimension_(dimension), lengths_(lengths), counts_(counts) {
    for (int axis = 0; axis < dimension_; ++axis) {
      require(counts_[static_cast<std::size_t>(axis)] >= 3, "Grid: at least 3 nodes per axis");
      require(lengths_[static_cast<std::size_t>(axis)] > 0.0, "Grid: extents must be positive");
    }
  }

  int dimension_;
  std::array<double, 2> lengths_;
  std::array<std::size_t, 2> counts_;
};

namespace detail {

// Appends the 1-D mirrored-ghost stencil along `axis` for every node.
inline void add_axis_stencil(const Grid& grid, int axis, std::size_t offset, double scale,
                             std::vector<Eigen::Triplet<double>>& out) {
  const std::size_t nx = grid.nodes(0);
  const std::size_t m = grid.nodes(axis);
  const std::size_t stride = axis == 0 ? 1 : nx;
  const double c = scale / (grid.spacing(axis) * grid.spacing(axis));
  for (std::size_t j = 0; j < grid.node_count(); ++j) {
    const std::size_t i = axis == 0 ? j % nx : j / nx;
    const auto row = static_cast<int>(offset + j);
    out.emplace_back(row, row, -2.0 * c);
    if (i == 0) {
      out.emplace_back(row, static_cast<int>(offset + j + stride), 2.0 * c);
    } else if (i + 1 == m) {
      out.emplace_back(row, static_cast<int>(offset + j - stride), 2.0 * c);
    } else {
      out.emplace_back(row, static_cast<int>(offset + j - stride), c);
      out.emplace_back(row, static_cast<int>(offset + j + stride), c);
    }
  }
}

}  // namespace detail

/// Sparse Neumann Laplacian on one species' nodal values.
inline SparseMatrix laplacian_matrix(const Grid& grid) {
  std::vector<Eigen::Triplet<double>> trips;
  for (int axis = 0; axis < grid.dimension(); ++axis) detail::add_axis_stencil(grid, axis, 0, 1.0, trips);
  const auto n = static_cast<Eigen::Index>(grid.node_count());
  SparseMatrix lap(n, n);
  lap.setFromTriplets(trips.begin(), trips.end());
  return lap;
}

/// Applies the Neumann Laplacian to one species' nodal values.
inline Eigen::VectorXd neumann_laplacian(const Grid& grid, const Eigen::VectorXd& u) {
  require(static_cast<std::size_t>(u.size()) == grid.node_count(),
          "neumann_laplacian: expected " + std::to_string(grid.node_count()) + " nodal values");
  const std::size_t nx = grid.nodes(0);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(u.size());
  for (int axis = 0; axis < grid.dimension(); ++axis) {
    const std::size_t m = grid.nodes(axis);
    const std::size_t stride = axis == 0 ? 1 : nx;
    const double c = 1.0 / (grid.spacing(axis) * grid.spacing(axis));
    for (std::size_t j = 0; j < grid.node_count(); ++j) {
      const std::size_t i = axis == 0 ? j % nx : j / nx;
      const auto jj = static_cast<Eigen::Index>(j);
      const auto st = static_cast<Eigen::Index>(stride);
      double v;
      if (i == 0) {
        v = 2.0 * (u[jj + st] - u[jj]);
      } else if (i + 1 == m) {
        v = 2.0 * (u[jj - st] - u[jj]);
      } else {
        v = u[jj - st] - 2.0 * u[jj] + u[jj + st];
      }
      out[jj] += c * v;
    }
  }
  return out;
}

/// Method-of-lines model F(u) = D Lap(u) + f(u), applied nodewise.
class RDModel final : public Model {
 public:
  RDModel(Grid grid, std::vector<double> diffusion, ReactionField reaction,
          std::string name = "reaction-diffusion")
      : grid_(std::move(grid)),
        diffusion_(std::move(diffusion)),
        reaction_(std::move(reaction)),
        name_(std::move(name)) {
    require(diffusion_.size() == reaction_.size(),
            "assemble: reaction arity " + std::to_string(reaction_.size()) +
                " does not match " + std::to_string(diffusion_.size()) + " diffusion coefficients");
    for (double d : diffusion_) require(d >= 0.0, "assemble: diffusion coefficients must be >= 0");

    std::vector<Eigen::Triplet<double>> trips;
    for (std::size_t s = 0; s < species(); ++s) {
      if (diffusion_[s] == 0.0) continue;
      for (int axis = 0; axis < grid_.dimension(); ++axis) {
        detail::add_axis_stencil(grid_, axis, s * grid_.node_count(), diffusion_[s], trips);
      }
    }
    const auto n = static_cast<Eigen::Index>(dim());
    diffusion_op_.resize(n, n);
    diffusion_op_.setFromTriplets(trips.begin(), trips.end());
  }

  Layout layout() const override { return Layout{species(), grid_.node_count()}; }
  ModelKind kind() const override { return ModelKind::ReactionDiffusion; }
  std::string description() const override { return name_ + ": " + reaction_.to_string(); }

  const Grid& grid() const { return grid_; }
  const std::vector<double>& diffusion() const { return diffusion_; }
  const ReactionField& reaction() const { return reaction_; }
  std::size_t species() const { return reaction_.size(); }

  void nonlinear(const Eigen::VectorXd& u, Eigen::VectorXd& out) const override {
    const std::size_t n = species();
    const std::size_t m = grid_.node_count();
    thread_local std::vector<double> local, value, stack;
    local.resize(n);
    value.resize(n);
    stack.resize(reaction_.stack_size() + 1);
    out.resize(u.size());
    for (std::size_t j = 0; j < m; ++j) {
      for (std::size_t s = 0; s < n; ++s) local[s] = u[static_cast<Eigen::Index>(s * m + j)];
      reaction_.eval_into(local, value, stack.data());
      for (std::size_t s = 0; s < n; ++s) out[static_cast<Eigen::Index>(s * m + j)] = value[s];
    }
  }

  using Model::rhs;
  void rhs(const Eigen::VectorXd& u, Eigen::VectorXd& out) const override {
    nonlinear(u, out);
    out += diffusion_op_ * u;
  }

  SparseMatrix linear_part() const override { return diffusion_op_; }

  /// Reaction Jacobian blocks per node plus the diffusion stencil.
  SparseMatrix jacobian(const Eigen::VectorXd& u) const override {
    const std::size_t n = species();
    const std::size_t m = grid_.node_count();
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(m * n * n);
    std::vector<double> local(n);
    std::vector<ad::Dual> seeds(n), stack(reaction_.stack_size() + 1);
    Eigen::MatrixXd block(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t j = 0; j < m; ++j) {
      for (std::size_t s = 0; s < n; ++s) local[s] = u[static_cast<Eigen::Index>(s * m + j)];
      reaction_.jacobian_into(local, block, seeds.data(), stack.data());
      for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = 0; b < n; ++b) {
          const double v = block(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
          if (v != 0.0) trips.emplace_back(static_cast<int>(a * m + j), static_cast<int>(b * m + j), v);
        }
      }
    }
    const auto size = static_cast<Eigen::Index>(dim());
    SparseMatrix jac(size, size);
    jac.setFromTriplets(trips.begin(), trips.end());
    return jac + diffusion_op_;
  }

  /// Largest spatial sup-variation (max - min over nodes) among species.
  double spatial_variation(const StateVec& u) const {
    double worst = 0.0;
    for (double v : species_variation(u)) worst = std::max(worst, v);
    return worst;
  }

  std::vector<double> species_variation(const StateVec& u) const {
    require(u.layout() == layout(), "species_variation: layout mismatch");
    const auto m = static_cast<Eigen::Index>(grid_.node_count());
    std::vector<double> out;
    for (std::size_t s = 0; s < species(); ++s) {
      const auto seg = u.values().segment(static_cast<Eigen::Index>(s) * m, m);
      out.push_back(seg.maxCoeff() - seg.minCoeff());
    }
    return out;
  }

  /// Spatially uniform state with species values `c`.
  StateVec uniform_state(std::span<const double> c) const {
    require(c.size() == species(), "uniform_state: wrong number of species");
    StateVec u = StateVec::zeros(layout());
    const std::size_t m = grid_.node_count();
    for (std::size_t s = 0; s < species(); ++s) {
      for (std::size_t j = 0; j < m; ++j) u[s * m + j] = c[s];
    }
    return u;
  }

 private:
  Grid grid_;
  std::vector<double> diffusion_;
  ReactionField reaction_;
  std::string name_;
  SparseMatrix diffusion_op_;
};

inline RDModel assemble(Grid grid, std::vector<double> diffusion, ReactionField reaction,
                        std::string name = "reaction-diffusion") {
  return RDModel(std::move(grid), std::move(diffusion), std::move(reaction), std::move(name));
}

/// Per-species sampling interval.
using Box = std::vector<std::pair<double, double>>;

struct CooperativityWitness {
  enum class Kind { NegativeOffDiagonal, NotStronglyConnected };
  Kind kind;
  std::size_t row = 0;  // 1-based species indices
  std::size_t col = 0;
  std::vector<double> point;  // empty for connectivity witnesses
  double value = 0.0;
};

struct CooperativityReport {
  bool cooperative = true;
  bool irreducible = true;
  std::optional<CooperativityWitness> cooperativity_witness;
  std::optional<CooperativityWitness> irreducibility_witness;
  std::size_t samples_checked = 0;
  Box box;

  bool passed() const { return cooperative && irreducible; }
};

namespace detail {

inline std::vector<double> sample_box(const Box& box, Rng& rng) {
  std::vector<double> p(box.size());
  for (std::size_t i = 0; i < box.size(); ++i) p[i] = rng.uniform(box[i].first, box[i].second);
  return p;
}

// Returns (from, to) of the first unreachable pair, or nullopt if strongly connected.
inline std::optional<std::pair<std::size_t, std::size_t>> first_unreachable(
    const std::vector<std::vector<bool>>& adj) {
  const std::size_t n = adj.size();
  for (std::size_t src = 0; src < n; ++src) {
    std::vector<bool> seen(n, false);
    std::vector<std::size_t> stack{src};
    seen[src] = true;
    while (!stack.empty()) {
      const std::size_t v = stack.back();
      stack.pop_back();
      for (std::size_t w = 0; w < n; ++w) {
        if (adj[v][w] && !seen[w]) {
          seen[w] = true;
          stack.push_back(w);
        }
      }
    }
    for (std::size_t dst = 0; dst < n; ++dst) {
      if (!seen[dst]) return std::make_pair(src, dst);
    }
  }
  return std::nullopt;
}

}  // namespace detail

/// Samples the reaction Jacobian over `box` and audits the sign pattern.
/// Edge i -> j in the influence graph exists when df_j/du_i > 1e-12 somewhere.
inline CooperativityReport check_cooperative_irreducible(const ReactionField& reaction, const Box& box,
                                                         std::size_t samples, std::uint64_t seed) {
  require(samples >= 1, "check_cooperative_irreducible: samples must be >= 1");
  require(box.size() == reaction.size(), "check_cooperative_irreducible: box dimension mismatch");
  constexpr double kTol = 1e-12;
  const std::size_t n = reaction.size();
  CooperativityReport report;
  report.box = box;
  std::vector<std::vector<bool>> positive(n, std::vector<bool>(n, false));
  Rng rng(seed);
  for (std::size_t k = 0; k < samples; ++k) {
    const std::vector<double> p = detail::sample_box(box, rng);
    Eigen::MatrixXd jac;
    try {
      jac = reaction.jacobian(p);
    } catch (const EvaluationError& e) {
      std::string where;
      for (double x : p) where += (where.empty() ? "" : ", ") + format_number(x);
      throw EvaluationError(std::string(e.what()) + " at point (" + where + ")", e.component());
    }
    ++report.samples_checked;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        const double v = jac(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        if (v < -kTol && report.cooperative) {
          report.cooperative = false;
          report.cooperativity_witness =
              CooperativityWitness{CooperativityWitness::Kind::NegativeOffDiagonal, i + 1, j + 1, p, v};
        }
        if (v > kTol) positive[j][i] = true;  // u_j influences f_i
      }
    }
  }
  if (auto gap = detail::first_unreachable(positive)) {
    report.irreducible = false;
    report.irreducibility_witness = CooperativityWitness{
        CooperativityWitness::Kind::NotStronglyConnected, gap->first + 1, gap->second + 1, {}, 0.0};
  }
  return report;
}

/// Largest sampled row-sum norm of the reaction Jacobian over `box`.
inline double reaction_lipschitz_estimate(const ReactionField& reaction, const Box& box,
                                          std::size_t samples, std::uint64_t seed) {
  Rng rng(seed);
  double lf = 0.0;
  for (std::size_t k = 0; k < samples; ++k) {
    const Eigen::MatrixXd jac = reaction.jacobian(detail::sample_box(box, rng));
    lf = std::max(lf, jac.cwiseAbs().rowwise().sum().maxCoeff());
  }
  return lf;
}

}  // namespace monolab
