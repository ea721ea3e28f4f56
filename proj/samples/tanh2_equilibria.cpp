// Sweeps the tanh2 network for equilibria, prints their stability, then
// classifies a few initial states by their omega limit.

#include "monolab/fixtures.hpp"
#include "monolab/limits.hpp"

#include <cstdio>

using namespace monolab;

int main() {
  const NetworkModel model = tanh2_model();
  const ConeOrder order = ConeOrder::standard(2);
  EquilibriumDB db = equilibrium_sweep(model, SweepOptions{}, order);

  std::printf("%-4s %-24s %-24s %-18s %s\n", "id", "u1", "u2", "stability", "rho(T=1)");
  for (std::size_t i = 0; i < db.size(); ++i) {
    const EquilibriumRecord& r = db[i];
    std::printf("%-4zu %-24.17g %-24.17g %-18s %.17g\n", i, r.state[0], r.state[1], stability_name(r.stability), r.rho);
  }

  ClassifierParams params;
  for (const StateVec& x : {StateVec{1.0, -0.5}, StateVec{-2.0, 0.3}, StateVec{0.7, -0.7}}) {
    const Classification r = classify_and_register(model, x, db, params, order);
    const TrajectoryClass& c = r.klass;
    std::printf("start (%g, %g): %s", x[0], x[1], tag_name(c.tag));
    if (c.equilibrium_id) std::printf(" -> equilibrium %zu", *c.equilibrium_id);
    std::printf("\n");
  }
  return 0;
}
