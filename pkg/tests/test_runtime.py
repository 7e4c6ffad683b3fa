import json
import math

import jsonschema
import numpy as np
import pytest

from mboxsim.cli import report_schema
from mboxsim.runtime import (
    CHUNK,
    ExperimentConfig,
    SETTINGS_CSV_HEADER,
    load_settings_csv,
    resolve_settings,
    round_uniform_block,
    run_experiment,
    write_report,
)
from mboxsim.verify import report_csv_rows, report_to_json_dict

PI8 = math.pi / 8
PI4 = math.pi / 4

Z_PAIR = (((0.0, 0.0, 1.0), (0.0, 0.0, 1.0)),)


def tb_config(**overrides):
    base = dict(
        protocol="tb", gamma=PI4, rounds=1000, seed=7,
        settings=(((0.0, 0.0, 1.0), (1.0, 0.0, 0.0)),),
    )
    base.update(overrides)
    return ExperimentConfig(**base)


class TestExperimentConfig:
    def test_validation(self):
        with pytest.raises(ValueError, match="unknown protocol"):
            tb_config(protocol="p9")
        with pytest.raises(ValueError, match="rounds"):
            tb_config(rounds=0)
        with pytest.raises(ValueError, match="seed"):
            tb_config(seed=-1)
        with pytest.raises(ValueError, match="seed"):
            tb_config(seed=2**64)
        with pytest.raises(ValueError, match="protocol 2 requires gamma > 0"):
            tb_config(protocol="p2", gamma=0.0)
        with pytest.raises(ValueError):
            tb_config(gamma=1.0)
        with pytest.raises(ValueError):
            tb_config(completion="mirror")
        with pytest.raises(ValueError, match="exactly one"):
            tb_config(settings=(), random_settings=0)
        with pytest.raises(ValueError, match="exactly one"):
            tb_config(random_settings=3)
        with pytest.raises(ValueError, match="workers"):
            tb_config(workers=0)

    def test_settings_source(self):
        assert tb_config().settings_source == "explicit:1"
        assert tb_config(settings=(), random_settings=5).settings_source == "random:5"

    def test_settings_frozen_as_floats(self):
        config = tb_config(settings=(((0, 0, 1), [1, 0, 0]),))
        assert config.settings == (((0.0, 0.0, 1.0), (1.0, 0.0, 0.0)),)


class TestUniformStream:
    def test_rows_are_addressable(self):
        whole = round_uniform_block(9, 0, 0, 17)
        parts = np.vstack(
            [round_uniform_block(9, 0, 0, 10), round_uniform_block(9, 0, 10, 7)]
        )
        assert np.array_equal(whole, parts)

    def test_chunk_boundary_is_seamless(self):
        tail = round_uniform_block(9, 2, CHUNK - 5, 10)
        from_zero = round_uniform_block(9, 2, 0, CHUNK + 5)
        assert np.array_equal(tail, from_zero[-10:])

    def test_settings_index_separates_streams(self):
        a = round_uniform_block(9, 0, 0, 4)
        b = round_uniform_block(9, 1, 0, 4)
        assert not np.array_equal(a, b)

    def test_validation(self):
        with pytest.raises(ValueError):
            round_uniform_block(9, 0, -1, 4)
        with pytest.raises(ValueError):
            round_uniform_block(9, 2**32 - 1, 0, 4)


class TestResolveSettings:
    def test_random_is_seeded_by_config(self):
        config = tb_config(settings=(), random_settings=4)
        one = resolve_settings(config)
        two = resolve_settings(config)
        assert all(np.array_equal(a1, a2) for (a1, _), (a2, _) in zip(one, two))
        other = resolve_settings(tb_config(settings=(), random_settings=4, seed=8))
        assert not np.array_equal(one[0][0], other[0][0])

    def test_explicit_must_be_unit(self):
        config = tb_config(settings=(((0.0, 0.0, 2.0), (1.0, 0.0, 0.0)),))
        with pytest.raises(ValueError):
            resolve_settings(config)


class TestLoadSettingsCsv:
    def write(self, path, lines):
        path.write_text("\n".join(lines) + "\n")
        return path

    def test_round_trip(self, tmp_path):
        path = self.write(
            tmp_path / "s.csv",
            [",".join(SETTINGS_CSV_HEADER), "0,0,1,1,0,0", "", "0.6,0,0.8,0,0.6,0.8"],
        )
        pairs = load_settings_csv(path)
        assert len(pairs) == 2
        assert pairs[0][0] == pytest.approx([0.0, 0.0, 1.0])
        assert pairs[1][1] == pytest.approx([0.0, 0.6, 0.8])

    def test_header_is_mandatory(self, tmp_path):
        path = self.write(tmp_path / "s.csv", ["ax,ay,az,bx,by,bz2", "0,0,1,1,0,0"])
        with pytest.raises(ValueError, match="header"):
            load_settings_csv(path)

    def test_field_count(self, tmp_path):
        path = self.write(tmp_path / "s.csv", [",".join(SETTINGS_CSV_HEADER), "0,0,1,1,0"])
        with pytest.raises(ValueError, match="6 fields"):
            load_settings_csv(path)

    def test_zero_vector_rejected(self, tmp_path):
        path = self.write(tmp_path / "s.csv", [",".join(SETTINGS_CSV_HEADER), "0,0,0,1,0,0"])
        with pytest.raises(ValueError, match="not a direction"):
            load_settings_csv(path)

    def test_normalizes_with_warning(self, tmp_path):
        path = self.write(tmp_path / "s.csv", [",".join(SETTINGS_CSV_HEADER), "0,0,1.01,1,0,0"])
        with pytest.warns(UserWarning, match="normalizing"):
            pairs = load_settings_csv(path)
        assert pairs[0][0] == pytest.approx([0.0, 0.0, 1.0])

    def test_no_rows_rejected(self, tmp_path):
        path = self.write(tmp_path / "s.csv", [",".join(SETTINGS_CSV_HEADER)])
        with pytest.raises(ValueError, match="no setting rows"):
            load_settings_csv(path)


class TestRunExperiment:
    def test_single_round(self):
        config = ExperimentConfig(
            protocol="p1", gamma=PI8, rounds=1, seed=3, settings=Z_PAIR
        )
        report = run_experiment(config)
        assert len(report.records) == 1
        rec = report.records[0]
        assert sum(rec.row.empirical.counts) == 1
        assert rec.alpha0 is None and rec.beta0 is None
        assert rec.budget_violations == 0
        payload = report_to_json_dict(report)
        assert payload["records"][0]["pre_flip"] is None

    def test_deterministic(self):
        config = ExperimentConfig(
            protocol="p2", gamma=PI8, rounds=5000, seed=11,
            settings=(), random_settings=2, completion="ortho",
        )
        one = json.dumps(report_to_json_dict(run_experiment(config)), sort_keys=True)
        two = json.dumps(report_to_json_dict(run_experiment(config)), sort_keys=True)
        assert one == two

    def test_worker_count_is_invisible(self):
        # rounds straddle a chunk boundary so scheduling actually differs
        rounds = CHUNK + 1000
        kwargs = dict(
            protocol="p1", gamma=PI8, rounds=rounds, seed=13,
            settings=(), random_settings=2,
        )
        serial = run_experiment(ExperimentConfig(**kwargs, workers=1))
        threaded = run_experiment(ExperimentConfig(**kwargs, workers=4))
        assert json.dumps(report_to_json_dict(serial), sort_keys=True) == json.dumps(
            report_to_json_dict(threaded), sort_keys=True
        )

    def test_tb_statistics_match_target(self):
        config = tb_config(rounds=50_000)
        report = run_experiment(config)
        rec = report.records[0]
        assert rec.row.target.as_array() == pytest.approx([0.25] * 4)
        assert rec.row.max_abs_z <= 5.0
        assert report.budget_violations == 0

    def test_settings_echoed(self):
        report = run_experiment(tb_config())
        assert report.records[0].a == (0.0, 0.0, 1.0)
        assert report.records[0].b == (1.0, 0.0, 0.0)
        assert report.settings_source == "explicit:1"


class TestWriteReport:
    def test_json_and_csv(self, tmp_path):
        config = ExperimentConfig(
            protocol="p1", gamma=PI8, rounds=2000, seed=5,
            settings=(), random_settings=3,
        )
        report = run_experiment(config)
        out = tmp_path / "r.json"
        csv_path = tmp_path / "r.csv"
        payload = write_report(report, out, csv_path)
        on_disk = json.loads(out.read_text())
        assert on_disk == payload
        jsonschema.validate(on_disk, report_schema())
        header, rows = report_csv_rows(report)
        lines = csv_path.read_text().strip().splitlines()
        assert lines[0] == ",".join(header)
        assert len(lines) == 1 + len(rows) == 4

    def test_payload_bytes_are_stable(self, tmp_path):
        report = run_experiment(tb_config())
        one = tmp_path / "one.json"
        two = tmp_path / "two.json"
        write_report(report, one)
        write_report(report, two)
        assert one.read_bytes() == two.read_bytes()
