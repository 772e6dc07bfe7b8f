"""Scenario documents, series outputs, emission and the command line."""

import json
import math
import subprocess
import sys

import pytest

from ticktock import cli
from ticktock.scenarios import (
    ConfigError,
    SeriesOutput,
    emit,
    expand_grid,
    format_output,
    parse_scenario,
    reproduce_figure,
    run_scenario,
)


class TestParse:
    def test_figure_configs(self):
        cfg = parse_scenario('{"scenario":"shadow","q":0.95,"steps":100}')
        assert (cfg.scenario, cfg.q, cfg.steps) == ("shadow", 0.95, 100)
        assert parse_scenario('{"scenario":"statistics","q":0.9,"steps":60}').steps == 60

    def test_out_of_range_q(self):
        with pytest.raises(ConfigError) as err:
            parse_scenario('{"scenario":"single_decay","q":1.5}')
        assert err.value.field == "q"
        assert "q" in str(err.value)

    @pytest.mark.parametrize("doc, field", [
        ('{"scenario":"single_decay","colour":1}', "colour"),
        ('{"scenario":"nope"}', "scenario"),
        ('{"q":0.5}', "scenario"),
        ('{"scenario":"single_decay","steps":-1}', "steps"),
        ('{"scenario":"single_decay","steps":2.5}', "steps"),
        ('{"scenario":"pinch","retention":1.2}', "retention"),
        ('{"scenario":"pinch","schedule":"baby_universe","steps":5,"switch_step":9}', "switch_step"),
        ('{"scenario":"asymptotic","steps":10,"xi_max":10}', "steps"),
        ('{"scenario":"radiators"}', "radiators"),
        ('{"scenario":"radiators","radiators":[{"q":2}]}', "radiators[0].q"),
        ('{"scenario":"demon","start":0}', "start"),
        ('[1, 2]', "document"),
        ('{"scenario":', "document"),
    ])
    def test_field_errors(self, doc, field):
        with pytest.raises(ConfigError) as err:
            parse_scenario(doc)
        assert err.value.field == field

    def test_overrides(self):
        cfg = parse_scenario('{"scenario":"shadow","q":0.5}', {"q": 0.7, "steps": 3, "scenario": None})
        assert (cfg.scenario, cfg.q, cfg.steps) == ("shadow", 0.7, 3)

    def test_grid(self):
        cfgs = expand_grid('{"scenario":"single_decay","grid":{"q":[0.5,0.9],"steps":[1,2]}}')
        assert [(c.q, c.steps) for c in cfgs] == [(0.5, 1), (0.5, 2), (0.9, 1), (0.9, 2)]


class TestRun:
    def test_single_decay(self):
        out = run_scenario(parse_scenario('{"scenario":"single_decay","q":0.9,"steps":50}'))
        assert list(out.columns) == ["n", "entropy_bruteforce", "entropy_closed", "discrepancy"]
        assert out.n_rows == 51
        assert out.max_discrepancy <= 1e-10
        assert out.metadata["version"]

    def test_residual_limit(self):
        out = run_scenario(parse_scenario('{"scenario":"residual","q":0.9,"steps":200}'))
        ent = out.columns["entropy_bruteforce"]
        assert ent[-1] == pytest.approx(0.99800, abs=1e-4)
        assert ent[-2] == pytest.approx(0.99800, abs=1e-4)

    @pytest.mark.parametrize("doc", [
        '{"scenario":"shadow","steps":30}',
        '{"scenario":"statistics","steps":12,"statistics":"bose"}',
        '{"scenario":"asymptotic","steps":40,"xi_max":20,"model":"moved","alpha_phase":0.4}',
        '{"scenario":"pinch","steps":30,"schedule":"prodigal_universe","switch_step":10}',
        '{"scenario":"radiators","steps":8,"radiators":[{"q":0.9},{"q":0.5,"start_site":-2}]}',
    ])
    def test_discrepancy_small(self, doc):
        assert run_scenario(parse_scenario(doc)).max_discrepancy <= 1e-10

    def test_demon_columns(self):
        out = run_scenario(parse_scenario('{"scenario":"demon","steps":30,"start":-5}'))
        assert out.metadata["max_norm_drift"] <= 1e-12
        assert max(out.columns["interior_probability"]) == pytest.approx(1.0)

    def test_complex_columns_split(self):
        out = run_scenario(parse_scenario('{"scenario":"asymptotic","steps":12,"xi_max":3}'))
        assert "amplitude_bruteforce_re" in out.columns and "amplitude_bruteforce_im" in out.columns

    def test_hex_floats(self):
        out = run_scenario(parse_scenario('{"scenario":"single_decay","steps":3,"hex_floats":true}'))
        col = out.columns["entropy_closed_hex"]
        assert [float.fromhex(h) for h in col] == out.columns["entropy_closed"]

    def test_series_invariants(self):
        with pytest.raises(ValueError):
            SeriesOutput({"a": [1, 2], "b": [1]})
        with pytest.raises(ValueError):
            SeriesOutput({"a": [math.nan]})


class TestFigures:
    def test_fig1(self):
        out = reproduce_figure("fig1")
        ts, ent = out.columns["t"], out.columns["entropy"]
        assert len(ts) == 1001 and ts[-1] == 10.0
        i = max(range(len(ent)), key=ent.__getitem__)
        assert abs(ts[i] - 1.0) <= 0.01 and abs(ent[i] - 1.0) <= 1e-9

    def test_fig2(self):
        out = reproduce_figure("fig2")
        assert out.columns["n"][0] == 1 and out.columns["n"][-1] == 150
        assert out.columns["entropy_bruteforce"][0] == pytest.approx(0.28640, abs=1e-4)

    def test_fig3(self):
        out = reproduce_figure("fig3")
        assert out.columns["n"] == list(range(61))
        assert out.columns["bose_bruteforce"][1] == pytest.approx(1.30268, abs=2e-4)
        assert out.columns["distinguishable_bruteforce"][1] == pytest.approx(0.93800, abs=2e-4)

    def test_unknown(self):
        with pytest.raises(ValueError):
            reproduce_figure("fig9")


class TestEmit:
    def test_csv_lines(self):
        text = format_output(SeriesOutput({"n": [0, 1, 2], "x": [0.5, 1 / 3, 2.0]}))
        lines = text.split("\n")
        assert text.endswith("\n") and len(lines) == 5 and lines[-1] == ""
        assert lines[0] == "n,x" and lines[2] == "1,0.333333333333"

    def test_json_round_trip(self):
        out = run_scenario(parse_scenario('{"scenario":"shadow","steps":20}'))
        doc = json.loads(format_output(out, "json"))
        for name, values in out.columns.items():
            assert doc["columns"][name] == [float(format(v, ".12g")) if isinstance(v, float) else v
                                            for v in values]
        again = json.loads(json.dumps(doc))
        assert again == doc

    def test_atomic_file(self, tmp_path):
        out = run_scenario(parse_scenario('{"scenario":"single_decay","steps":10}'))
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        emit(out, "csv", str(a))
        emit(run_scenario(parse_scenario('{"scenario":"single_decay","steps":10}')), "csv", str(b))
        assert a.read_bytes() == b.read_bytes()
        assert sorted(p.name for p in tmp_path.iterdir()) == ["a.csv", "b.csv"]

    def test_unwritable(self, tmp_path):
        with pytest.raises(OSError):
            emit(SeriesOutput({"n": [1]}), "csv", str(tmp_path / "missing" / "x.csv"))


class TestCommandLine:
    def test_run_stdout(self, tmp_path, capsys):
        cfg = tmp_path / "c.json"
        cfg.write_text('{"scenario":"single_decay","q":0.5}')
        assert cli.main(["run", str(cfg), "--steps", "2"]) == 0
        assert capsys.readouterr().out.splitlines()[2].startswith("1,1,1,")

    def test_validation_exit(self, capsys):
        assert cli.main(["run", "--scenario", "single_decay", "--q", "1.5"]) == 1
        assert "q" in capsys.readouterr().err

    def test_io_exit(self, tmp_path):
        assert cli.main(["run", "--scenario", "shadow", "--steps", "2",
                         "--output", str(tmp_path / "no" / "x.csv")]) == 3
        assert cli.main(["run", str(tmp_path / "absent.json")]) == 3

    def test_discrepancy_exit(self, monkeypatch, capsys):
        fake = SeriesOutput({"n": [0]}, {"max_discrepancy": 1e-3})
        monkeypatch.setattr(cli, "run_scenario", lambda cfg: fake)
        assert cli.main(["run", "--scenario", "shadow"]) == 2

    def test_reproduce_json(self, tmp_path):
        dest = tmp_path / "fig2.json"
        assert cli.main(["reproduce", "fig2", "--format", "json", "--output", str(dest)]) == 0
        assert json.loads(dest.read_text())["columns"]["n"][0] == 1

    def test_sweep(self, tmp_path):
        cfg = tmp_path / "grid.json"
        cfg.write_text('{"scenario":"single_decay","steps":5,"grid":{"q":[0.3,0.6,0.9]}}')
        outdir = tmp_path / "out"
        assert cli.main(["sweep", str(cfg), "--output", str(outdir), "--workers", "2"]) == 0
        assert sorted(p.name for p in outdir.iterdir()) == [f"single_decay_{i:03d}.csv" for i in range(3)]

    def test_module_entry(self):
        proc = subprocess.run([sys.executable, "-m", "ticktock", "reproduce", "fig1"],
                              capture_output=True, text=True, check=False)
        assert proc.returncode == 0
        assert proc.stdout.splitlines()[0] == "t,entropy,binary_entropy,discrepancy"
