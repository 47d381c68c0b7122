"""Exact and sampled advantages, and the many-copy hybrid reduction."""
import math

from pseudoent import adversary, efi, families

pair = families.build_pair(efi.make_instance(efi.EfiSpec("angle", theta=math.pi / 4)))
hel = adversary.helstrom_povm(pair.psi, pair.phi)
exact = adversary.advantage_exact(hel, pair.psi, pair.phi)
mc = adversary.advantage_monte_carlo(hel, pair.psi, pair.phi, trials=4000, seed=7)
emp = mc.empirical
print(f"Helstrom exact {exact.exact:.4f} (TD {exact.td:.4f}); "
      f"sampled {emp['estimate']:.4f} +- {emp['std_error']:.4f}, within 4 sigma {mc.within_4_sigma}")

for p in (2, 3):
    for d in adversary.many_copy_library(pair, p, seed=p):
        res = adversary.hybrid_reduce(d, pair, p)
        s = res.sequence
        print(f"p={p} {d.kind:14s} total {s.total_advantage:.4f} <= sum {sum(s.per_adjacent_advantage):.4f} "
              f"<= p*max {p * s.max_adjacent:.4f}; single-copy advantage {res.single_copy_advantage:.4f}")
