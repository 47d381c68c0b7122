"""Build psi and phi from an EFI pair and watch the trace distance halve.

psi is a separable mixture, phi carries one ebit in the coin, and no
distinguisher does better on (psi, phi) than half of what it could do on the
underlying EFI pair.
"""
import math

from pseudoent import adversary, efi, entdiag, families, qcore

for spec in [efi.EfiSpec("orthogonal"), efi.EfiSpec("angle", theta=math.pi / 6),
             efi.EfiSpec("keyed_subset", register_qubits=3, seed=0)]:
    inst = efi.make_instance(spec)
    pair = families.build_pair(inst)
    td = qcore.trace_distance(pair.psi, pair.phi)
    print(f"{spec.family:13s} TD(rho0,rho1)={inst.td:.4f}  TD(psi,phi)={td:.4f}  "
          f"log-neg psi={entdiag.log_negativity(pair.psi, pair.cut):.3f}  "
          f"phi={entdiag.log_negativity(pair.phi, pair.cut):.3f}")

    n = pair.psi.qubit_count
    report = adversary.verify_halving(pair, adversary.library(n, seed=1))
    best = max(e["advantage"] for e in report.entries)
    print(f"{'':13s} best library advantage {best:.4f} <= bound {report.bound:.4f}; "
          f"Helstrom reaches {report.helstrom_advantage:.4f}")
