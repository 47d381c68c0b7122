"""Config-driven experiment runner.

Subcommands ``construct``, ``distill``, ``distinguish`` and ``amplify`` each
write one JSON section plus a CSV table into the output directory; ``report``
merges the sections into ``report.json``. Output is deterministic for a given
(config, seed): keys are sorted, nothing time- or path-dependent is recorded.

Exit codes: 0 success, 2 configuration or input error, 3 dimension cap
exceeded, 4 invariant violation detected.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__, adversary, efi, entdiag, families, locc, qcore
from .errors import (ContractViolation, InputError, InvariantViolation, LocalityViolation,
                     ResourceError)

SECTIONS = ("construct", "distill", "distinguish", "amplify")

EXIT_OK, EXIT_CONFIG, EXIT_RESOURCE, EXIT_INVARIANT = 0, 2, 3, 4

DEFAULT_DISTINGUISHERS = (
    {"kind": "helstrom"},
    {"kind": "local_measure", "bases": {"2": "Z"}, "rule": "first"},
    {"kind": "local_measure", "bases": {"0": "X", "1": "X", "2": "Z"}, "rule": "parity"},
    {"kind": "random_circuit", "depth": 3, "seed": 1},
    {"kind": "constant", "accept": False},
)


@dataclass
class ExperimentConfig:
    efi: efi.EfiSpec = field(default_factory=efi.EfiSpec)
    lambda_range: list = field(default_factory=lambda: [2, 3, 4])
    amplify_q: list = field(default_factory=lambda: [1, 2, 3])
    copies_p: list = field(default_factory=lambda: [2, 3])
    distinguishers: list = field(default_factory=lambda: [dict(d) for d in DEFAULT_DISTINGUISHERS])
    trials: int = 1000
    seed: int = 0
    dim_cap: int = qcore.DEFAULT_DIM_CAP
    output_dir: str = "out"
    workers: int = 1

    def validate(self) -> "ExperimentConfig":
        for name in ("lambda_range", "amplify_q", "copies_p", "distinguishers"):
            if not getattr(self, name):
                raise InputError(f"config field {name!r} must be nonempty")
        if any(int(x) < 1 for x in self.lambda_range + self.amplify_q + self.copies_p):
            raise InputError("lambda_range, amplify_q and copies_p entries must be >= 1")
        if self.trials < 100:
            raise InputError("trials must be >= 100")
        if self.dim_cap < 4:
            raise InputError("dim_cap must be >= 4")
        for d in self.distinguishers:
            if d.get("kind") not in ("helstrom", "local_measure", "random_circuit", "constant"):
                raise InputError(f"unknown distinguisher descriptor {d!r}")
        return self

    def to_dict(self) -> dict:
        return {"efi": self.efi.to_dict(), "lambda_range": list(self.lambda_range),
                "amplify_q": list(self.amplify_q), "copies_p": list(self.copies_p),
                "distinguishers": self.distinguishers, "trials": self.trials, "seed": self.seed,
                "dim_cap": self.dim_cap, "output_dir": self.output_dir}

    def hash(self) -> str:
        d = self.to_dict()
        d.pop("output_dir")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        extra = set(d) - known
        if extra:
            raise InputError(f"unknown config fields: {sorted(extra)}")
        kw = dict(d)
        try:
            if "efi" in kw:
                kw["efi"] = efi.EfiSpec.from_dict(kw["efi"])
        except (ContractViolation, TypeError, ValueError) as exc:
            raise InputError(f"bad efi spec: {exc}") from exc
        for k in ("lambda_range", "amplify_q", "copies_p"):
            if k in kw:
                kw[k] = [int(x) for x in kw[k]]
        return cls(**kw)


def load_config(path: str | None, overrides: dict) -> ExperimentConfig:
    """Defaults, then the JSON file, then command-line overrides."""
    data: dict = {}
    if path:
        try:
            data = json.loads(Path(path).read_text())
        except FileNotFoundError as exc:
            raise InputError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise InputError(f"config file {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise InputError(f"config file {path} must hold a JSON object")
    data.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig.from_dict(data).validate()


# ---------------------------------------------------------------------------
# Shared helpers
# ---------------------------------------------------------------------------

def _spec_for(cfg: ExperimentConfig, lam: int) -> efi.EfiSpec:
    return dataclasses.replace(cfg.efi, lam=lam)


def _instance(cfg: ExperimentConfig, lam: int) -> efi.EfiInstance:
    return efi.make_instance(_spec_for(cfg, lam))


def _map(cfg: ExperimentConfig, fn, items):
    # results are consumed in input order, so parallelism never changes output
    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _round(x, nd=12):
    """Round floats so that last-ulp BLAS noise cannot leak into reports."""
    if isinstance(x, float):
        if math.isnan(x) or math.isinf(x):
            return None
        r = round(x, nd)
        return 0.0 if r == 0 else r
    if isinstance(x, dict):
        return {k: _round(v, nd) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_round(v, nd) for v in x]
    if isinstance(x, (np.floating,)):
        return _round(float(x), nd)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _dumps(obj) -> str:
    return json.dumps(_round(obj), indent=2, sort_keys=True) + "\n"


def _write_csv(path: Path, columns: list, rows: list) -> None:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for r in rows:
        w.writerow({k: ("" if r.get(k) is None else _round(r.get(k))) for k in columns})
    path.write_text(buf.getvalue())


def _section_header(cfg: ExperimentConfig, name: str) -> dict:
    return {"section": name, "seed": cfg.seed, "config_hash": cfg.hash(),
            "dim_cap": cfg.dim_cap, "tolerances": qcore.DEFAULT_TOL.as_dict()}


def _save_section(cfg: ExperimentConfig, name: str, body: dict, columns: list, rows: list) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    doc = {**_section_header(cfg, name), **body, "columns": columns, "rows": rows}
    path = out / f"{name}.json"
    path.write_text(_dumps(doc))
    _write_csv(out / f"{name}.csv", columns, rows)
    return path


def _schema() -> dict:
    return json.loads(resources.files("pseudoent").joinpath("report_schema.json").read_text())


def _columns(name: str) -> list:
    return list(_schema()["csv"][name])


def build_distinguisher(desc: dict, pair: families.FamilyPair) -> adversary.Distinguisher:
    """Materialize a JSON descriptor as a distinguisher on (psi, phi)."""
    n = pair.n_qubits
    kind = desc.get("kind")
    if kind == "helstrom":
        return adversary.helstrom_povm(pair.psi, pair.phi)
    if kind == "local_measure":
        bases = {int(q): b for q, b in desc.get("bases", {"2": "Z"}).items()}
        if any(q >= n for q in bases):
            raise InputError(f"local_measure qubit out of range for {n} qubits")
        return adversary.local_measure(n, bases, desc.get("rule", "parity"))
    if kind == "random_circuit":
        return adversary.random_circuit(n, int(desc.get("depth", 3)), int(desc.get("seed", 0)),
                                        desc.get("measure", "first"))
    if kind == "constant":
        return adversary.constant(n, bool(desc.get("accept", False)))
    raise InputError(f"unknown distinguisher kind {kind!r}")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_construct(cfg: ExperimentConfig, echo=print) -> dict:
    columns = _columns("construct")
    out = Path(cfg.output_dir)

    def cell(lam):
        inst = _instance(cfg, lam)
        pair = families.build_pair(inst)
        manifest = families.save_pair(pair, out / "construct" / f"lambda_{lam}")
        ppt = entdiag.ppt_check(pair.psi, pair.cut)
        half = 0.5 * inst.td
        err = abs(manifest["td_psi_phi"] - half)
        row = {"lambda": lam, "family": inst.spec.family, "hardness": inst.spec.hardness,
               "n_qubits": inst.n_qubits, "td_rho": inst.td,
               "td_psi_phi": manifest["td_psi_phi"], "half_td_rho": half,
               "identity_error": err, "identity_holds": bool(err <= 1e-9),
               "ppt_psi": ppt.is_ppt, "ppt_min_eigenvalue": ppt.min_eigenvalue,
               "manifest": f"construct/lambda_{lam}/manifest.json"}
        return row

    rows = _map(cfg, cell, cfg.lambda_range)
    echo(f"{'lambda':>6} {'td_rho':>14} {'td_psi_phi':>14} {'half_td':>14} {'ok':>4}")
    for r in rows:
        echo(f"{r['lambda']:>6} {r['td_rho']:>14.10f} {r['td_psi_phi']:>14.10f} "
             f"{r['half_td_rho']:>14.10f} {'yes' if r['identity_holds'] else 'NO':>4}")
    bad = [r["lambda"] for r in rows if not (r["identity_holds"] and r["ppt_psi"])]
    _save_section(cfg, "construct", {"violations": bad}, columns, rows)
    if bad:
        raise InvariantViolation(f"halving identity or PPT check failed for lambda {bad}")
    return {"rows": rows}


def cmd_distill(cfg: ExperimentConfig, echo=print) -> dict:
    columns = _columns("distill")

    def cell(lam):
        inst = _instance(cfg, lam)
        pair = families.build_pair(inst)
        _, cert = locc.run_distill_phi(pair)
        expected = locc.expected_distill_fidelity(inst.td)
        row = {"lambda": lam, "family": inst.spec.family, "td_rho": inst.td,
               "fidelity": cert.transcript.fidelity, "expected_fidelity": expected,
               "fidelity_error": abs(cert.transcript.fidelity - expected),
               "efficient": cert.efficient}
        n = 2 * lam
        row["amplified_n"] = n
        row["target_1_minus_2_pow_minus_lambda"] = 1.0 - 2.0 ** (-lam)
        try:
            amp = efi.amplify_statistical(inst, n)
            _, acert = locc.run_distill_phi(families.build_pair(amp))
            row["amplified_td"] = amp.td
            row["amplified_fidelity"] = acert.transcript.fidelity
            row["amplified_meets_target"] = bool(
                acert.transcript.fidelity >= row["target_1_minus_2_pow_minus_lambda"])
        except ResourceError:
            row["amplified_skipped"] = "dimension cap"
        if inst.purification is not None:
            kf = families.build_keyed(inst)
            _, kc = locc.run_distill_phi_keyed(kf)
            row.update({"keyed_fidelity": kc.transcript.fidelity,
                        "keyed_accept_b0": kc.extras["accept_prob_b0"],
                        "keyed_accept_b1": kc.extras["accept_prob_b1"],
                        "keyed_inner_product": kc.extras["false_accept_inner_product"],
                        "keyed_efficient": kc.efficient, "keyed_gate_count": kc.gate_count})
        return row

    rows = _map(cfg, cell, cfg.lambda_range)
    bad = [r["lambda"] for r in rows if r["fidelity_error"] > 1e-9
           or ("keyed_accept_b0" in r and abs(r["keyed_accept_b0"] - 1.0) > 1e-10)
           or ("keyed_accept_b1" in r
               and abs(r["keyed_accept_b1"] - r["keyed_inner_product"]) > 1e-10)]
    for r in rows:
        echo(f"lambda={r['lambda']} fidelity={r['fidelity']:.10f} "
             f"amplified={r.get('amplified_fidelity', float('nan')):.10f}")
    _save_section(cfg, "distill", {"violations": bad}, columns, rows)
    if bad:
        raise InvariantViolation(f"distillation checks failed for lambda {bad}")
    return {"rows": rows}


def cmd_distinguish(cfg: ExperimentConfig, echo=print) -> dict:
    columns = _columns("distinguish")
    hcolumns = _columns("hybrid")

    def cell(lam):
        inst = _instance(cfg, lam)
        pair = families.build_pair(inst)
        ds = [build_distinguisher(d, pair) for d in cfg.distinguishers]
        halving = adversary.verify_halving(pair, ds)
        rows = []
        for k, (d, entry) in enumerate(zip(ds, halving.entries)):
            mc = adversary.advantage_monte_carlo(d, pair.psi, pair.phi, cfg.trials,
                                                 seed=cfg.seed * 1000 + lam * 100 + k)
            rows.append({"lambda": lam, "distinguisher": d.description,
                         "descriptor_hash": d.descriptor_hash()[:16],
                         "adv_psi_phi": entry["advantage"],
                         "adv_rho_induced": entry.get("induced_advantage"),
                         "half_td_rho": halving.bound, "satisfied": entry["satisfied"],
                         "mc_estimate": mc.empirical["estimate"],
                         "mc_std_error": mc.empirical["std_error"],
                         "mc_signed_exact": mc.signed,
                         "mc_within_4_sigma": mc.within_4_sigma})
        hrows = []
        for p in cfg.copies_p:
            try:
                lib = adversary.many_copy_library(pair, p, seed=cfg.seed)
            except ResourceError:
                hrows.append({"lambda": lam, "p": p, "distinguisher": "skipped: dimension cap"})
                continue
            for d in lib:
                res = adversary.hybrid_reduce(d, pair, p)
                s = res.sequence
                hrows.append({"lambda": lam, "p": p, "distinguisher": d.description,
                              "total": s.total_advantage,
                              "sum_adjacent": sum(s.per_adjacent_advantage),
                              "p_max_adjacent": p * s.max_adjacent, "i_star": s.i_star,
                              "slot": res.slot, "single_copy_advantage": res.single_copy_advantage,
                              "holds": s.telescoping_holds()})
        best = max(r["adv_psi_phi"] for r in rows)
        return rows, hrows, best, halving.identity_holds

    cells = _map(cfg, cell, cfg.lambda_range)
    rows = [r for c in cells for r in c[0]]
    hrows = [r for c in cells for r in c[1]]
    profile = adversary.decay_profile(cfg.lambda_range, [c[2] for c in cells])
    bad = [r["lambda"] for r in rows if not r["satisfied"]]
    bad += [r["lambda"] for r in hrows if r.get("holds") is False]
    for r in rows:
        echo(f"lambda={r['lambda']} {r['distinguisher']}: adv={r['adv_psi_phi']:.10f}")
    _save_section(cfg, "distinguish",
                  {"violations": sorted(set(bad)), "decay_profile": profile,
                   "hybrid_columns": hcolumns, "hybrid_rows": hrows,
                   "advice_note": "suprema are over the sampled distinguisher library only"},
                  columns, rows)
    _write_csv(Path(cfg.output_dir) / "hybrid.csv", hcolumns, hrows)
    if bad:
        raise InvariantViolation(f"advantage bounds violated for lambda {sorted(set(bad))}")
    return {"rows": rows, "hybrid_rows": hrows}


def cmd_amplify(cfg: ExperimentConfig, echo=print) -> dict:
    columns = _columns("amplify")
    lam = cfg.lambda_range[0]
    inst = _instance(cfg, lam)
    pair = families.build_pair(inst)
    ln1 = entdiag.log_negativity(pair.phi, pair.cut)

    def cell(q):
        fam = families.amplify(pair, q, dim_cap=cfg.dim_cap)
        cert = locc.certify(fam)
        diag = fam.diagnostics()
        return {"lambda": lam, "q": q, "c": cert.cost.value, "d": cert.distill.value,
                "gap": cert.gap, "epsilon": cert.epsilon, "epsilon_1": cert.epsilon_per_copy,
                "q_epsilon_1": q * cert.epsilon_per_copy, "bernoulli_ok": cert.bernoulli_ok,
                "log_negativity_phi_q": diag["log_negativity_phi"],
                "q_log_negativity_phi_1": q * ln1,
                "log_negativity_additive": bool(abs(diag["log_negativity_phi"] - q * ln1) <= 1e-8),
                "analytic": diag["analytic"]}

    rows = _map(cfg, cell, cfg.amplify_q)
    bad = [r["q"] for r in rows if r["gap"] != r["q"] or not r["bernoulli_ok"]
           or not r["log_negativity_additive"]]
    for r in rows:
        echo(f"q={r['q']} gap={r['gap']} epsilon={r['epsilon']:.3e}")
    _save_section(cfg, "amplify", {"violations": bad}, columns, rows)
    if bad:
        raise InvariantViolation(f"gap amplification checks failed for q {bad}")
    return {"rows": rows}


COMMANDS = {"construct": cmd_construct, "distill": cmd_distill,
            "distinguish": cmd_distinguish, "amplify": cmd_amplify}


def cmd_report(cfg: ExperimentConfig, echo=print, rebuild: bool = False) -> dict:
    """Merge the section files into ``report.json`` and ``report.csv``."""
    out = Path(cfg.output_dir)
    if rebuild:
        for name in SECTIONS:
            COMMANDS[name](cfg, echo=lambda *a, **k: None)
    missing = [s for s in SECTIONS if not (out / f"{s}.json").exists()]
    if missing:
        raise InputError(f"report: missing sections in {out}: {', '.join(missing)}")
    sections = {}
    for s in SECTIONS:
        doc = json.loads((out / f"{s}.json").read_text())
        if doc.get("config_hash") != cfg.hash():
            raise InputError(f"section {s} was produced with a different config")
        sections[s] = {k: v for k, v in doc.items()
                       if k not in ("seed", "config_hash", "dim_cap", "tolerances", "section")}
    summary = [{"section": s, "rows": len(sections[s]["rows"]),
                "violations": len(sections[s]["violations"])} for s in SECTIONS]
    report = {
        "config": {k: v for k, v in cfg.to_dict().items() if k != "output_dir"},
        "config_hash": cfg.hash(),
        "seed": cfg.seed,
        "dim_cap": cfg.dim_cap,
        "tolerances": qcore.DEFAULT_TOL.as_dict(),
        "versions": {"pseudoent": __version__, "numpy": np.__version__},
        "summary": summary,
        "sections": sections,
    }
    text = _dumps(report)
    (out / "report.json").write_text(text)
    _write_csv(out / "report.csv", ["section", "rows", "violations"], summary)
    echo(f"wrote {out / 'report.json'}")
    return report


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment config")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--out", help="output directory")
    common.add_argument("--dim-cap", type=int, help="largest dense matrix dimension allowed")
    common.add_argument("--trials", type=int, help="Monte-Carlo trials per estimate")
    common.add_argument("--workers", type=int, help="threads for independent cells")
    parser = argparse.ArgumentParser(prog="pseudoent", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {"construct": "build psi/phi per lambda and check the halving identity",
             "distill": "run unkeyed, amplified and keyed LOCC distillation",
             "distinguish": "exact and sampled advantages, hybrids, decay profile",
             "amplify": "q-copy gap amplification certificates"}
    for name in SECTIONS:
        sub.add_parser(name, parents=[common], help=helps[name])
    rep = sub.add_parser("report", parents=[common], help="merge sections into report.json")
    rep.add_argument("--rebuild", action="store_true", help="recompute every section first")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, {"seed": args.seed, "output_dir": args.out,
                                         "dim_cap": args.dim_cap, "trials": args.trials,
                                         "workers": args.workers})
    except (InputError, ContractViolation, TypeError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        with qcore.dimension_cap(cfg.dim_cap):
            if args.command == "report":
                cmd_report(cfg, rebuild=args.rebuild)
            else:
                COMMANDS[args.command](cfg)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ResourceError as exc:
        print(f"resource cap: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (InvariantViolation, LocalityViolation, ContractViolation) as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
