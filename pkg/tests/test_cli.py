import csv
import json
import math

import pytest

from pseudoent import cli, families


def run(argv):
    return cli.main([str(a) for a in argv])


def write_config(path, **fields):
    path.write_text(json.dumps(fields))
    return path


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture
def angle_cfg(tmp_path):
    return write_config(tmp_path / "cfg.json",
                        efi={"family": "angle", "theta": math.pi / 6},
                        lambda_range=[2, 3], amplify_q=[1, 2], copies_p=[2])


class TestConstruct:
    def test_orthogonal_manifest(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "c.json", lambda_range=[4])
        assert run(["construct", "--config", cfg, "--out", tmp_path / "o"]) == 0
        manifest = json.loads((tmp_path / "o/construct/lambda_4/manifest.json").read_text())
        assert manifest["td_psi_phi"] == pytest.approx(0.5)
        assert "td_psi_phi" in capsys.readouterr().out
        psi, phi, _ = families.load_pair_states(tmp_path / "o/construct/lambda_4")
        assert psi.qubit_count == 3

    def test_angle_table(self, tmp_path, angle_cfg):
        assert run(["construct", "--config", angle_cfg, "--out", tmp_path / "o"]) == 0
        rows = read_csv(tmp_path / "o/construct.csv")
        assert [float(r["td_psi_phi"]) for r in rows] == pytest.approx([0.25, 0.25])
        assert list(rows[0]) == cli._columns("construct")

    def test_empty_lambda_range(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "c.json", lambda_range=[])
        assert run(["construct", "--config", cfg, "--out", tmp_path / "o"]) == 2
        assert "lambda_range" in capsys.readouterr().err


class TestOtherSections:
    def test_distill_orthogonal(self, tmp_path):
        assert run(["distill", "--out", tmp_path]) == 0
        rows = read_csv(tmp_path / "distill.csv")
        assert all(float(r["fidelity"]) == 1.0 for r in rows)
        assert all(float(r["keyed_accept_b0"]) == 1.0 for r in rows)

    def test_distill_angle(self, tmp_path, angle_cfg):
        assert run(["distill", "--config", angle_cfg, "--out", tmp_path]) == 0
        for r in read_csv(tmp_path / "distill.csv"):
            assert float(r["fidelity"]) == pytest.approx(1 - 0.5 * (1 - math.sin(math.pi / 6)), abs=1e-9)
            assert r["amplified_meets_target"] == "True"

    def test_distinguish_orthogonal(self, tmp_path):
        assert run(["distinguish", "--out", tmp_path, "--trials", 200]) == 0
        rows = read_csv(tmp_path / "distinguish.csv")
        hel = [r for r in rows if r["distinguisher"].startswith("Helstrom")]
        assert all(float(r["adv_psi_phi"]) == pytest.approx(0.5) for r in hel)
        assert all(r["holds"] == "True" for r in read_csv(tmp_path / "hybrid.csv"))

    def test_amplify_gap_column(self, tmp_path):
        assert run(["amplify", "--out", tmp_path]) == 0
        rows = read_csv(tmp_path / "amplify.csv")
        assert [int(r["gap"]) for r in rows] == [1, 2, 3]


class TestReport:
    def test_missing_sections(self, tmp_path, capsys):
        assert run(["report", "--out", tmp_path]) == 2
        err = capsys.readouterr().err
        for name in cli.SECTIONS:
            assert name in err

    def test_byte_identical(self, tmp_path, angle_cfg):
        a, b = tmp_path / "a", tmp_path / "b"
        assert run(["report", "--rebuild", "--config", angle_cfg, "--out", a, "--seed", 3]) == 0
        assert run(["report", "--rebuild", "--config", angle_cfg, "--out", b, "--seed", 3]) == 0
        assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()
        report = json.loads((a / "report.json").read_text())
        assert report["seed"] == 3 and report["dim_cap"] == 2 ** 14
        assert set(report["sections"]) == set(cli.SECTIONS)
        assert "tolerances" in report and len(report["config_hash"]) == 64

    def test_parallel_matches_serial(self, tmp_path, angle_cfg):
        a, b = tmp_path / "a", tmp_path / "b"
        assert run(["report", "--rebuild", "--config", angle_cfg, "--out", a]) == 0
        assert run(["report", "--rebuild", "--config", angle_cfg, "--out", b, "--workers", 3]) == 0
        assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()

    def test_stale_section_rejected(self, tmp_path):
        assert run(["report", "--rebuild", "--out", tmp_path]) == 0
        assert run(["report", "--out", tmp_path, "--seed", 9]) == 2


class TestConfig:
    def test_precedence(self, tmp_path):
        cfg = write_config(tmp_path / "c.json", seed=5, trials=300)
        c = cli.load_config(str(cfg), {"seed": 7, "trials": None})
        assert c.seed == 7 and c.trials == 300 and c.lambda_range == [2, 3, 4]

    @pytest.mark.parametrize("content", ["{not json", "[1, 2]", json.dumps({"colour": 1}),
                                         json.dumps({"efi": {"family": "nope"}}),
                                         json.dumps({"trials": 10})])
    def test_bad_configs(self, tmp_path, content):
        p = tmp_path / "c.json"
        p.write_text(content)
        assert run(["construct", "--config", p, "--out", tmp_path / "o"]) == 2

    def test_missing_config(self, tmp_path):
        assert run(["construct", "--config", tmp_path / "nope.json"]) == 2

    def test_hash_ignores_output_dir(self):
        a = cli.ExperimentConfig(output_dir="x")
        b = cli.ExperimentConfig(output_dir="y")
        assert a.hash() == b.hash()
        assert a.hash() != cli.ExperimentConfig(seed=1).hash()


class TestExitCodes:
    def test_resource_cap(self, tmp_path):
        assert run(["construct", "--out", tmp_path, "--dim-cap", 4]) == 3

    def test_invariant_violation(self, tmp_path, monkeypatch):
        real = families.build_pair

        def broken(inst, both_sides=False):
            pair = real(inst, both_sides)
            pair.phi = pair.psi
            return pair

        monkeypatch.setattr(families, "build_pair", broken)
        assert run(["construct", "--out", tmp_path]) == 4

    def test_module_entry_point(self):
        parser = cli.build_parser()
        args = parser.parse_args(["amplify", "--seed", "2", "--dim-cap", "64"])
        assert args.command == "amplify" and args.seed == 2 and args.dim_cap == 64
