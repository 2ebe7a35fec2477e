// Walks through the main entry points: boundary fixed point, an orbit of the
// boundary recursion, correlations on finite balls with both engines, and the
// free energy per site.

#include <cstdio>

#include "cayley_qmc/cayley_qmc.hpp"

using namespace cayley_qmc;

int main() {
  const double beta = 1.0;

  const BoundaryPoint fp = fixed_point(beta);
  std::printf("fixed point at beta=%.2f: x=%.15f y=%.15f\n", beta, fp.x, fp.y);

  const OrbitResult orb = orbit({1.0, 0.5}, beta, 200);
  std::printf("orbit from (1, 0.5): %zu points, termination=%s\n", orb.points.size(), to_string(orb.termination));

  // Translation-invariant family scaled by alpha = alpha_fixed(beta).
  const double alpha = alpha_fixed(beta);
  const BoundaryCondition bc = solution_family(alpha, beta, 8);

  const auto root = TreeCoordinate::root();
  const auto c1 = root.child(1);
  const auto c2 = root.child(2);
  const auto c11 = c1.child(1);

  ProductObservable xx = ProductObservable::product({{root, pauli(Axis::X)}, {c1, pauli(Axis::X)}});
  ProductObservable zz = ProductObservable::product({{root, pauli(Axis::Z)}, {c1, pauli(Axis::Z)}});
  ProductObservable sib = ProductObservable::product({{c1, pauli(Axis::X)}, {c2, pauli(Axis::X)}});
  ProductObservable deep = ProductObservable::product({{c1, pauli(Axis::X)}, {c11, pauli(Axis::X)}});

  const FiniteVolumeState dense(1, beta, bc, Engine::Dense);
  const FiniteVolumeState transfer(1, beta, bc, Engine::Transfer);
  std::printf("\nLambda_1                   dense               transfer\n");
  std::printf("<sx(0) sx(1)>      %.15f  %.15f\n", dense.expect(xx).real(), transfer.expect(xx).real());
  std::printf("<sz(0) sz(1)>     %.15f %.15f\n", dense.expect(zz).real(), transfer.expect(zz).real());
  std::printf("<sx(1) sx(2)>      %.15f  %.15f\n", dense.expect(sib).real(), transfer.expect(sib).real());

  // Deeper balls are only practical with the transfer engine.
  std::printf("\n<sx(1) sx(1.1)> by volume (transfer)\n");
  for (int n = 2; n <= 6; ++n) {
    const FiniteVolumeState s(n, beta, bc, Engine::Transfer);
    std::printf("  n=%d  %.15f\n", n, s.expect(deep).real());
  }

  std::printf("\nfree energy per site\n");
  for (double b : {0.5, 1.0, 2.0}) {
    std::printf("  beta=%.1f  F_6=%.12f  F_limit=%.12f\n", b, free_energy(6, b, alpha_fixed(b)), free_energy_limit(b));
  }
  return 0;
}
