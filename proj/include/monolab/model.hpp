#pragma once

#include "monolab/expr.hpp"
#include "monolab/order.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <string>
#include <utility>
#include <vector>

namespace monolab {

using SparseMatrix = Eigen::SparseMatrix<double>;

enum class ModelKind { Network, ReactionDiffusion };

/// An autonomous vector field u' = F(u) with exact Jacobian access.
///
/// F splits as A u + N(u) where A is a constant sparse linear part (the
/// diffusion operator for reaction-diffusion models, empty otherwise). The
/// implicit-explicit integrator treats A implicitly. Implementations are
/// immutable and safe to call concurrently.
class Model {
 public:
  virtual ~Model() = default;

  virtual Layout layout() const = 0;
  virtual ModelKind kind() const = 0;
  virtual std::string description() const = 0;

  virtual void rhs(const Eigen::VectorXd& u, Eigen::VectorXd& out) const = 0;
  virtual SparseMatrix jacobian(const Eigen::VectorXd& u) const = 0;

  /// Constant linear part A; a zero-by-zero matrix means "none".
  virtual SparseMatrix linear_part() const { return SparseMatrix(); }

  /// F(u) - A u.
  virtual void nonlinear(const Eigen::VectorXd& u, Eigen::VectorXd& out) const { rhs(u, out); }

  std::size_t dim() const { return layout().size(); }

  Eigen::VectorXd rhs(const Eigen::VectorXd& u) const {
    Eigen::VectorXd out(u.size());
    rhs(u, out);
    return out;
  }

  StateVec rhs(const StateVec& u) const {
    require(u.layout() == layout(), "Model::rhs: layout mismatch");
    return StateVec(rhs(u.values()), u.layout());
  }

  double residual(const StateVec& u) const { return rhs(u).sup_norm(); }
};

/// Plain ODE network u' = f(u) on a single node.
class NetworkModel final : public Model {
 public:
  explicit NetworkModel(ReactionField field, std::string name = "network")
      : field_(std::move(field)), name_(std::move(name)) {}

  Layout layout() const override { return Layout{field_.size(), 1}; }
  ModelKind kind() const override { return ModelKind::Network; }
  std::string description() const override { return name_ + ": " + field_.to_string(); }

  const ReactionField& field() const { return field_; }

  using Model::rhs;
  void rhs(const Eigen::VectorXd& u, Eigen::VectorXd& out) const override {
    thread_local std::vector<double> stack;
    stack.resize(field_.stack_size() + 1);
    out.resize(u.size());
    field_.eval_into(std::span<const double>(u.data(), static_cast<std::size_t>(u.size())),
                     std::span<double>(out.data(), static_cast<std::size_t>(out.size())),
                     stack.data());
  }

  SparseMatrix jacobian(const Eigen::VectorXd& u) const override {
    const Eigen::MatrixXd dense =
        field_.jacobian(std::span<const double>(u.data(), static_cast<std::size_t>(u.size())));
    return dense.sparseView(0.0, 0.0);
  }

 private:
  ReactionField field_;
  std::string name_;
};

/// u' = M u for a fixed matrix M.
class LinearModel final : public Model {
 public:
  explicit LinearModel(Eigen::MatrixXd matrix)
      : matrix_(std::move(matrix)), sparse_(matrix_.sparseView(0.0, 0.0)) {
    require(matrix_.rows() == matrix_.cols(), "LinearModel: matrix must be square");
  }

  Layout layout() const override { return Layout{static_cast<std::size_t>(matrix_.rows()), 1}; }
  ModelKind kind() const override { return ModelKind::Network; }
  std::string description() const override { return "linear"; }

  const Eigen::MatrixXd& matrix() const { return matrix_; }

  using Model::rhs;
  void rhs(const Eigen::VectorXd& u, Eigen::VectorXd& out) const override { out = matrix_ * u; }
  SparseMatrix jacobian(const Eigen::VectorXd&) const override { return sparse_; }

 private:
  Eigen::MatrixXd matrix_;
  SparseMatrix sparse_;
};

}  // namespace monolab
