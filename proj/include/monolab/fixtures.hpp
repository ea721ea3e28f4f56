#pragma once

// Built-in models shared by the runner, the examples and the tests.

#include "monolab/expr.hpp"
#include "monolab/model.hpp"
#include "monolab/rd.hpp"

#include <memory>
#include <string>
#include <vector>

namespace monolab {

struct FixtureInfo {
  std::string id;
  std::string description;
  std::string criteria;  // acceptance criteria exercising the fixture
};

inline const std::vector<FixtureInfo>& list_fixtures() {
  static const std::vector<FixtureInfo> fixtures{
      {"tanh2", "2-species network u1' = -u1 + 2 tanh(u2), u2' = -u2 + 2 tanh(u1)", "1, 3, 6, 7, 8"},
      {"chafee", "Chafee-Infante u_t = 0.01 u_xx + u - u^3 on [0,1], 201 nodes, Neumann", "4, 5, 6, 7"},
      {"rd2", "tanh2 reaction with diffusion (0.05, 0.05) on [0,1], 101 nodes, Neumann", "5, 6, 7"},
  };
  return fixtures;
}

inline bool is_fixture(const std::string& id) {
  for (const FixtureInfo& f : list_fixtures()) {
    if (f.id == id) return true;
  }
  return false;
}

inline constexpr const char* kTanh2Source = "-u1 + 2*tanh(u2); -u2 + 2*tanh(u1)";
inline constexpr const char* kChafeeSource = "u1 - u1^3";

inline NetworkModel tanh2_model() { return NetworkModel(ReactionField::parse(kTanh2Source, 2), "tanh2"); }

inline RDModel chafee_model(double d = 0.01, std::size_t nodes = 201, double length = 1.0) {
  return RDModel(Grid::interval(length, nodes), {d}, ReactionField::parse(kChafeeSource, 1), "chafee");
}

inline RDModel rd2_model(double d = 0.05, std::size_t nodes = 101, double length = 1.0) {
  return RDModel(Grid::interval(length, nodes), {d, d}, ReactionField::parse(kTanh2Source, 2), "rd2");
}

inline std::unique_ptr<Model> make_fixture(const std::string& id) {
  if (id == "tanh2") return std::make_unique<NetworkModel>(tanh2_model());
  if (id == "chafee") return std::make_unique<RDModel>(chafee_model());
  if (id == "rd2") return std::make_unique<RDModel>(rd2_model());
  throw ContractViolation("unknown fixture '" + id + "'");
}

}  // namespace monolab
