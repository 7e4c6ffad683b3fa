import json
import math

import jsonschema
import pytest

from mboxsim.cli import main, report_schema
from mboxsim.runtime import SETTINGS_CSV_HEADER

PI8 = math.pi / 8


def simulate_args(tmp_path, **overrides):
    args = {
        "--protocol": "tb",
        "--gamma": "0.7853981634",
        "--settings": "random:2",
        "--rounds": "2000",
        "--seed": "7",
        "--completion": "normalize",
        "--out": str(tmp_path / "r.json"),
    }
    args.update(overrides)
    argv = ["simulate"]
    for flag, value in args.items():
        if value is not None:
            argv.extend([flag, value])
    return argv


class TestSimulate:
    def test_writes_valid_report(self, tmp_path, capsys):
        out = tmp_path / "r.json"
        csv_path = tmp_path / "r.csv"
        argv = simulate_args(tmp_path, **{"--out": str(out), "--csv": str(csv_path)})
        assert main(argv) == 0
        payload = json.loads(out.read_text())
        jsonschema.validate(payload, report_schema())
        assert payload["config"]["settings_source"] == "random:2"
        assert csv_path.read_text().startswith("ax,")
        assert "wrote" in capsys.readouterr().out

    def test_deterministic_bytes(self, tmp_path):
        one, two = tmp_path / "one.json", tmp_path / "two.json"
        assert main(simulate_args(tmp_path, **{"--out": str(one)})) == 0
        assert main(simulate_args(tmp_path, **{"--out": str(two)})) == 0
        assert one.read_bytes() == two.read_bytes()

    def test_explicit_settings_csv(self, tmp_path):
        settings = tmp_path / "s.csv"
        settings.write_text(",".join(SETTINGS_CSV_HEADER) + "\n0,0,1,0.6,0,0.8\n")
        argv = simulate_args(
            tmp_path,
            **{"--protocol": "p1", "--gamma": str(PI8), "--settings": str(settings)},
        )
        assert main(argv) == 0
        payload = json.loads((tmp_path / "r.json").read_text())
        assert payload["config"]["settings_source"] == "explicit:1"

    def test_missing_gamma_is_usage_error(self, tmp_path):
        argv = [a for a in simulate_args(tmp_path)]
        i = argv.index("--gamma")
        del argv[i : i + 2]
        with pytest.raises(SystemExit) as exc:
            main(argv)
        assert exc.value.code == 2

    def test_p2_at_gamma_zero_is_config_error(self, tmp_path, capsys):
        argv = simulate_args(tmp_path, **{"--protocol": "p2", "--gamma": "0.0"})
        assert main(argv) == 2
        assert "protocol 2 requires gamma > 0" in capsys.readouterr().err

    def test_bad_random_count(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(simulate_args(tmp_path, **{"--settings": "random:0"}))
        assert exc.value.code == 2

    def test_missing_settings_file(self, tmp_path, capsys):
        argv = simulate_args(tmp_path, **{"--settings": str(tmp_path / "nope.csv")})
        assert main(argv) == 2
        assert "error:" in capsys.readouterr().err


class TestVerify:
    def test_flip_suite_passes(self, capsys):
        assert main(["verify", "flip"]) == 0
        out = capsys.readouterr().out
        assert "PASS flip-moments-exact" in out

    def test_epr2_single_gamma(self, capsys):
        assert main(["verify", "epr2", "--gamma", str(PI8), "--grid", "12"]) == 0
        assert "epr2-four-case-identity" in capsys.readouterr().out

    def test_mbox_suite(self, capsys):
        assert main(["verify", "mbox", "--rounds", "20000"]) == 0
        out = capsys.readouterr().out
        assert "PASS mbox-xor-grid" in out

    def test_epr2_rejects_gamma_zero(self):
        with pytest.raises(SystemExit) as exc:
            main(["verify", "epr2", "--gamma", "0.0"])
        assert exc.value.code == 2


class TestOracle:
    def test_prints_oracle_claim_residual(self, capsys):
        argv = [
            "oracle", "mu-average",
            "--protocol", "p1", "--gamma", "0.7853981634",
            "--a", "0,0,1", "--b", "0,0,1", "--branch", "pq+",
        ]
        assert main(argv) == 0
        out = capsys.readouterr().out
        assert "oracle (normalize): 0.5" in out
        assert "claimed scalar product: 1.0" in out
        assert "residual: 0.5" in out

    def test_reflects_into_upper_hemisphere(self, capsys):
        argv = [
            "oracle", "mu-average",
            "--protocol", "p1", "--gamma", str(PI8),
            "--a", "0,0,-1", "--b", "0,0,1", "--branch", "pq+",
        ]
        assert main(argv) == 0
        assert "reflect" in capsys.readouterr().out

    def test_malformed_vector(self):
        argv = [
            "oracle", "mu-average",
            "--protocol", "p1", "--gamma", str(PI8),
            "--a", "1,2", "--b", "0,0,1", "--branch", "pq+",
        ]
        with pytest.raises(SystemExit) as exc:
            main(argv)
        assert exc.value.code == 2

    def test_p2_needs_entanglement(self):
        argv = [
            "oracle", "mu-average",
            "--protocol", "p2", "--gamma", "0.0",
            "--a", "0,0,1", "--b", "0,0,1", "--branch", "pq+",
        ]
        with pytest.raises(SystemExit) as exc:
            main(argv)
        assert exc.value.code == 2
