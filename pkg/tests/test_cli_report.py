import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

import nestcov as nc
from nestcov.cli import main
from nestcov.config import config_from_json, parse_config, serialize_config
from nestcov.errors import EmptyTable, ParseError, ValidationError
from nestcov.report import emit_csv, emit_svg_plot, fisher_trace_report, read_csv_table
from nestcov.simulation import ExperimentConfig, ExperimentKind, ExperimentRow, ExperimentTable

SVG_NS = "{http://www.w3.org/2000/svg}"


class TestParseConfig:
    def test_minimal_document_gets_defaults(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text('{"kind": "diag-decay"}')
        cfg = parse_config(p)
        assert cfg.kind is ExperimentKind.DIAG_DECAY
        assert cfg.grid == (10, 10)
        assert cfg.replications == 50
        assert cfg.seed == 0

    def test_zero_replications_rejected(self):
        with pytest.raises(ValidationError):
            config_from_json('{"kind": "diag-decay", "replications": 0}')

    def test_unknown_key_rejected(self):
        with pytest.raises(ParseError):
            config_from_json('{"kind": "diag-decay", "extra": 1}')

    def test_unknown_truth_key_rejected(self):
        with pytest.raises(ParseError):
            config_from_json('{"kind": "diag-decay", "truth": {"beta": 1.0}}')

    def test_bad_json_reports_position(self):
        with pytest.raises(ParseError) as exc:
            config_from_json('{"kind": ')
        assert "line" in str(exc.value)

    def test_non_integer_size_rejected(self):
        with pytest.raises(ParseError):
            config_from_json('{"kind": "diag-decay", "sample_sizes": [5, 10.5]}')

    def test_gmrf_truth(self):
        cfg = config_from_json('{"kind": "gmrf", "truth": {"theta": [4.0, -0.1, 0.2]}}')
        assert cfg.truth_params == (4.0, -0.1, 0.2)

    @pytest.mark.parametrize(
        "doc",
        [
            '{"kind": "diag-decay"}',
            '{"kind": "gmrf", "grid": {"rows": 6, "cols": 7}, "seed": 11}',
            '{"kind": "shrink-compare", "truth": {"c": 10.0, "alpha": 0.01}, '
            '"sample_sizes": [4, 8], "replications": 2, "estimators": ["sample", "decay2"]}',
        ],
    )
    def test_round_trip(self, doc):
        cfg = config_from_json(doc)
        assert config_from_json(serialize_config(cfg)) == cfg


def _table(rows):
    return ExperimentTable(rows=tuple(ExperimentRow(*r) for r in rows))


class TestEmitCsv:
    def test_empty_table_header_only(self, tmp_path):
        path = tmp_path / "t.csv"
        emit_csv(_table([]), path)
        assert path.read_bytes() == b"estimator,N,mean_sq_frobenius,std_error,replications\n"

    def test_single_row(self, tmp_path):
        path = tmp_path / "t.csv"
        emit_csv(_table([("a", 5, 0.125, 0.01, 3)]), path)
        lines = path.read_text().splitlines()
        assert len(lines) == 2
        assert lines[1] == "a,5,0.125,0.01,3"

    def test_round_trip(self, tmp_path):
        table = _table(
            [("b", 10, 1.5e-3, 2.25e-4, 50), ("a", 5, 0.1, 0.01, 50), ("a", 10, 0.05, 0.002, 50)]
        )
        path = tmp_path / "t.csv"
        emit_csv(table, path)
        back = read_csv_table(path)
        assert sorted(back.rows, key=lambda r: (r.estimator, r.N)) == sorted(
            table.rows, key=lambda r: (r.estimator, r.N)
        )

    def test_lf_only(self, tmp_path):
        path = tmp_path / "t.csv"
        emit_csv(_table([("a", 5, 1.0, 0.0, 1)]), path)
        assert b"\r" not in path.read_bytes()


class TestEmitSvgPlot:
    def _two_by_four(self):
        rows = []
        for est in ("alpha", "beta"):
            for i, N in enumerate((5, 10, 15, 20)):
                rows.append((est, N, 0.5 / (N * (1 + i)), 0.01, 7))
        return _table(rows)

    def test_polyline_and_marker_counts(self, tmp_path):
        path = tmp_path / "p.svg"
        emit_svg_plot(self._two_by_four(), path)
        root = ET.parse(path).getroot()
        assert len(root.findall(f"{SVG_NS}polyline")) == 2
        assert len(root.findall(f"{SVG_NS}circle")) == 8

    def test_deterministic_bytes(self, tmp_path):
        p1, p2 = tmp_path / "a.svg", tmp_path / "b.svg"
        emit_svg_plot(self._two_by_four(), p1)
        emit_svg_plot(self._two_by_four(), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_well_formed_xml_and_version(self, tmp_path):
        path = tmp_path / "p.svg"
        emit_svg_plot(self._two_by_four(), path)
        root = ET.parse(path).getroot()
        assert root.tag == f"{SVG_NS}svg"
        assert root.get("version") == "1.1"

    def test_empty_table_rejected(self, tmp_path):
        with pytest.raises(EmptyTable):
            emit_svg_plot(_table([]), tmp_path / "p.svg")


class TestFisherTraceReport:
    def test_ordering_and_scaling(self):
        cfg = ExperimentConfig(kind=ExperimentKind.DIAG_DECAY, sample_sizes=(5, 10, 20))
        rows = fisher_trace_report(cfg)
        by = {(m, N): v for m, N, v in rows}
        for N in (5, 10, 20):
            assert by[("decay2", N)] <= by[("decay3", N)] <= by[("diag", N)]
        for model in ("decay2", "decay3", "diag"):
            assert by[(model, 10)] == pytest.approx(by[(model, 5)] / 2, rel=1e-14)
            assert by[(model, 20)] == pytest.approx(by[(model, 5)] / 4, rel=1e-14)

    def test_diag_value_closed_form(self, bench_truth):
        cfg = ExperimentConfig(kind=ExperimentKind.DIAG_DECAY, sample_sizes=(8,))
        rows = fisher_trace_report(cfg)
        by = {(m, N): v for m, N, v in rows}
        assert by[("diag", 8)] == pytest.approx(float(np.sum(2 * bench_truth.d**2)) / 8, rel=1e-12)


def _write_config(tmp_path, doc):
    p = tmp_path / "config.json"
    p.write_text(json.dumps(doc))
    return p


SMALL_DIAG = {
    "kind": "diag-decay",
    "sample_sizes": [5, 10],
    "replications": 2,
    "seed": 3,
}


class TestCli:
    def test_simulate_diag_writes_outputs(self, tmp_path, capsys):
        cfg = _write_config(tmp_path, SMALL_DIAG)
        out = tmp_path / "out"
        rc = main(["simulate-diag", "--config", str(cfg), "--out", str(out), "--format", "csv+svg"])
        assert rc == 0
        assert (out / "simulate-diag.csv").exists()
        assert (out / "simulate-diag.svg").exists()
        assert (out / "simulate-diag.png").exists()

    def test_byte_identical_reruns(self, tmp_path):
        cfg = _write_config(tmp_path, SMALL_DIAG)
        out1, out2 = tmp_path / "o1", tmp_path / "o2"
        for out in (out1, out2):
            rc = main(["simulate-diag", "--config", str(cfg), "--out", str(out), "--format", "csv+svg"])
            assert rc == 0
        assert (out1 / "simulate-diag.csv").read_bytes() == (out2 / "simulate-diag.csv").read_bytes()
        assert (out1 / "simulate-diag.svg").read_bytes() == (out2 / "simulate-diag.svg").read_bytes()

    def test_seed_override_changes_outputs(self, tmp_path):
        cfg = _write_config(tmp_path, SMALL_DIAG)
        out1, out2 = tmp_path / "o1", tmp_path / "o2"
        main(["simulate-diag", "--config", str(cfg), "--out", str(out1)])
        main(["simulate-diag", "--config", str(cfg), "--out", str(out2), "--seed", "99"])
        assert (out1 / "simulate-diag.csv").read_bytes() != (out2 / "simulate-diag.csv").read_bytes()

    def test_kind_mismatch_fails(self, tmp_path, capsys):
        cfg = _write_config(tmp_path, SMALL_DIAG)
        rc = main(["simulate-gmrf", "--config", str(cfg), "--out", str(tmp_path / "o")])
        assert rc != 0
        err = capsys.readouterr().err
        assert err.count("\n") == 1
        assert "ValidationError" in err

    def test_missing_config_reports_io_error(self, tmp_path, capsys):
        rc = main(["estimate", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path / "o")])
        assert rc != 0
        assert "IoError" in capsys.readouterr().err

    def test_invalid_config_single_error_line(self, tmp_path, capsys):
        cfg = _write_config(tmp_path, {"kind": "diag-decay", "replications": 0})
        rc = main(["simulate-diag", "--config", str(cfg), "--out", str(tmp_path / "o")])
        assert rc != 0
        err = capsys.readouterr().err
        assert err.count("\n") == 1 and err.startswith("error: ")

    def test_fisher_trace_command(self, tmp_path):
        cfg = _write_config(tmp_path, {"kind": "diag-decay", "sample_sizes": [5, 10]})
        out = tmp_path / "out"
        rc = main(["fisher-trace", "--config", str(cfg), "--out", str(out), "--format", "csv+svg"])
        assert rc == 0
        lines = (out / "fisher-trace.csv").read_text().splitlines()
        assert lines[0] == "model,N,asymptotic_mse"
        assert len(lines) == 1 + 3 * 2
        assert (out / "fisher-trace.svg").exists()

    def test_estimate_command(self, tmp_path):
        cfg = _write_config(tmp_path, SMALL_DIAG)
        out = tmp_path / "out"
        rc = main(["estimate", "--config", str(cfg), "--out", str(out)])
        assert rc == 0
        lines = (out / "estimate.csv").read_text().splitlines()
        assert lines[0] == "estimator,N,quantity,value"
        quantities = {tuple(l.split(",")[:3]) for l in lines[1:]}
        assert ("decay2", "10", "param.c") in quantities
        assert ("sample", "10", "sq_frobenius_error") in quantities

    def test_estimate_gmrf(self, tmp_path):
        cfg = _write_config(
            tmp_path,
            {"kind": "gmrf", "grid": {"rows": 5, "cols": 5}, "sample_sizes": [30], "seed": 4},
        )
        out = tmp_path / "out"
        rc = main(["estimate", "--config", str(cfg), "--out", str(out)])
        assert rc == 0
        text = (out / "estimate.csv").read_text()
        assert "gmrf12,30,param.theta7" in text

    def test_simulate_gmrf_command(self, tmp_path):
        cfg = _write_config(
            tmp_path,
            {
                "kind": "gmrf",
                "grid": {"rows": 5, "cols": 5},
                "truth": {"theta": [4.0, -0.25, 0.35]},
                "sample_sizes": [20],
                "replications": 2,
                "seed": 5,
            },
        )
        out = tmp_path / "out"
        rc = main(["simulate-gmrf", "--config", str(cfg), "--out", str(out)])
        assert rc == 0
        table = read_csv_table(out / "simulate-gmrf.csv")
        assert {r.estimator for r in table.rows} == {"sample", "gmrf4", "gmrf8", "gmrf12"}

    def test_compare_shrinkage_command(self, tmp_path):
        cfg = _write_config(
            tmp_path,
            {"kind": "shrink-compare", "sample_sizes": [8], "replications": 2, "seed": 6},
        )
        out = tmp_path / "out"
        rc = main(["compare-shrinkage", "--config", str(cfg), "--out", str(out)])
        assert rc == 0
        table = read_csv_table(out / "compare-shrinkage.csv")
        assert {r.estimator for r in table.rows} == {
            "sample",
            "diag",
            "decay2",
            "ledoit_wolf",
            "cond_reg",
        }
