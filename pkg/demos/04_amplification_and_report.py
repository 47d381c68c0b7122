"""Gap amplification over q copies, then a full config-driven report."""
import json
import math
import tempfile
from pathlib import Path

from pseudoent import cli, efi, entdiag, families, locc

pair = families.build_pair(efi.make_instance(efi.EfiSpec("angle", theta=math.pi / 3)))
ln1 = entdiag.log_negativity(pair.phi, pair.cut)
for q in (1, 2, 3):
    fam = families.amplify(pair, q)
    cert = locc.certify(fam)
    lnq = entdiag.log_negativity(fam.phi_bar, fam.cut)
    print(f"q={q}: gap {cert.gap}, epsilon {cert.epsilon:.4f} <= {q * cert.epsilon_per_copy:.4f}, "
          f"log-neg {lnq:.4f} = {q} x {ln1:.4f}")

with tempfile.TemporaryDirectory() as out:
    cfg = cli.ExperimentConfig(efi=efi.EfiSpec("angle", theta=math.pi / 4), lambda_range=[2, 3],
                               amplify_q=[1, 2], copies_p=[2], trials=500, output_dir=out)
    cli.cmd_report(cfg, echo=lambda *a: None, rebuild=True)
    report = json.loads((Path(out) / "report.json").read_text())
    print("\nreport sections:", ", ".join(sorted(report["sections"])))
    print("config hash:", report["config_hash"][:16], "...")
