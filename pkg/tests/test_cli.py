"""Scenario files, CSV emission, exit codes and presets."""

import io
import json

import pytest

from rightsmarket.cli import (
    BASE_COLUMNS,
    EXIT_DEVIATION,
    EXIT_OK,
    EXIT_PARSE,
    list_presets,
    load_scenario,
    main,
    parse_scenario,
    scenario_to_dict,
    write_trace_csv,
)
from rightsmarket.engine import run
from rightsmarket.errors import ScenarioError


def minimal_scenario(**overrides):
    data = {
        "name": "unit",
        "variant": "rights",
        "horizon": 5,
        "mechanism": {"kind": "proportional"},
        "sellers": [{"resupply": {"kind": "constant", "level": 1.0}}],
        "buyers": [
            {"claim": 1.0, "income": {"kind": "constant", "level": 0.0}},
            {"claim": 0.75, "income": {"kind": "constant", "level": 0.25}},
            {"claim": 0.125, "income": {"kind": "constant", "level": 0.75}},
        ],
    }
    data.update(overrides)
    return data


class TestScenarioParsing:
    def test_parse_serialize_parse_is_identity(self):
        scn = parse_scenario(minimal_scenario())
        again = parse_scenario(scenario_to_dict(scn))
        assert again.config == scn.config
        assert again.output == scn.output
        assert scenario_to_dict(again) == scenario_to_dict(scn)

    def test_unknown_top_level_key_rejected(self):
        with pytest.raises(ScenarioError, match="unknown key"):
            parse_scenario(minimal_scenario(frobnicate=1))

    def test_unknown_schedule_key_rejected(self):
        bad = minimal_scenario(
            sellers=[{"resupply": {"kind": "constant", "level": 1.0, "phase": 2}}]
        )
        with pytest.raises(ScenarioError, match="phase"):
            parse_scenario(bad)

    def test_missing_schedule_parameter(self):
        bad = minimal_scenario(sellers=[{"resupply": {"kind": "cosine", "period": 10}}])
        with pytest.raises(ScenarioError, match="cosine"):
            parse_scenario(bad)

    def test_unknown_mechanism(self):
        with pytest.raises(ScenarioError, match="mechanism"):
            parse_scenario(minimal_scenario(mechanism={"kind": "lottery"}))

    def test_weighted_mechanism_round_trips(self):
        data = minimal_scenario(
            mechanism={"kind": "weighted", "components": [[0.6, 1], [0.4, 2]]}
        )
        scn = parse_scenario(data)
        assert scenario_to_dict(scn)["mechanism"] == data["mechanism"]

    def test_bad_columns_rejected(self):
        bad = minimal_scenario(output={"columns": ["price_good", "volume"], "seed": 0})
        with pytest.raises(ScenarioError, match="volume"):
            parse_scenario(bad)

    def test_all_presets_parse_and_round_trip(self):
        names = list_presets()
        assert "scenario-a-proportional" in names
        assert "free-market-a" in names
        for name in names:
            scn = load_scenario(name)
            again = parse_scenario(scenario_to_dict(scn))
            assert again.config == scn.config


class TestCsvOutput:
    def test_header_layout(self):
        scn = load_scenario("scenario-a-proportional")
        trace = run(scn.config, horizon=2)
        buf = io.StringIO()
        write_trace_csv(trace, buf)
        lines = buf.getvalue().splitlines()
        assert lines[0] == (
            "tau,price_good,price_right,expected_frustration,useful_money,"
            "useless_money,volume_offered,volume_sold,"
            "b0_money,b0_good,b0_right,b0_frustration,"
            "b1_money,b1_good,b1_right,b1_frustration,"
            "b2_money,b2_good,b2_right,b2_frustration"
        )
        first = lines[1].split(",")
        assert first[0] == "1"
        assert float(first[1]) == pytest.approx(0.646552, abs=1e-6)

    def test_deterministic_bytes(self):
        scn = load_scenario("scenario-a-proportional")
        outputs = []
        for _ in range(2):
            buf = io.StringIO()
            write_trace_csv(run(scn.config, horizon=30), buf)
            outputs.append(buf.getvalue())
        assert outputs[0] == outputs[1]
        assert "\r" not in outputs[0]

    def test_column_selection(self):
        scn = load_scenario("scenario-a-proportional")
        trace = run(scn.config, horizon=1)
        buf = io.StringIO()
        write_trace_csv(trace, buf, columns=("price_good",))
        lines = buf.getvalue().splitlines()
        assert lines[0] == "tau,price_good"
        assert len(lines) == 2


class TestCommands:
    def test_simulate_writes_csv(self, tmp_path):
        out = tmp_path / "trace.csv"
        code = main(
            [
                "simulate",
                "--scenario",
                "scenario-a-proportional",
                "--out",
                str(out),
                "--horizon",
                "3",
            ]
        )
        assert code == EXIT_OK
        lines = out.read_text().splitlines()
        assert len(lines) == 4
        assert lines[1].split(",")[1] == repr(75 / 116)

    def test_free_market_preset_prices(self, tmp_path):
        out = tmp_path / "fm.csv"
        assert main(
            ["simulate", "--scenario", "free-market-a", "--out", str(out), "--horizon", "5"]
        ) == EXIT_OK
        rows = out.read_text().splitlines()[1:]
        assert all(float(r.split(",")[1]) == pytest.approx(1.0, abs=1e-12) for r in rows)

    def test_scenario_b_zero_frustration_rows(self, tmp_path):
        out = tmp_path / "b.csv"
        assert main(
            [
                "simulate",
                "--scenario",
                "scenario-b-proportional",
                "--out",
                str(out),
                "--horizon",
                "30",
            ]
        ) == EXIT_OK
        header, *rows = out.read_text().splitlines()
        cols = header.split(",")
        f_idx = [i for i, c in enumerate(cols) if c.startswith("b") and c.endswith("_frustration")]
        for row in rows[5:]:  # per-buyer frustration all-zero from round 6 on
            vals = row.split(",")
            assert all(float(vals[i]) == 0.0 for i in f_idx)

    def test_simulate_parse_error_exit_code(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps(minimal_scenario(frobnicate=1)))
        assert main(["simulate", "--scenario", str(bad)]) == EXIT_PARSE

    def test_simulate_unknown_preset_exit_code(self):
        assert main(["simulate", "--scenario", "no-such-preset"]) == EXIT_PARSE

    def test_audit_clean_scenario_exits_zero(self, tmp_path):
        scn = tmp_path / "a.json"
        scn.write_text(json.dumps(minimal_scenario(horizon=16)))
        assert main(["audit", "--scenario", str(scn), "--unilateral-only"]) == EXIT_OK

    def test_audit_detects_inflated_price(self, tmp_path):
        scn = tmp_path / "adв.json"
        scn.write_text(json.dumps(minimal_scenario(horizon=16, greedy_price_factor=1.1)))
        code = main(
            ["audit", "--scenario", str(scn), "--unilateral-only", "--out", str(tmp_path / "r.txt")]
        )
        assert code == EXIT_DEVIATION
        assert "witness" in (tmp_path / "r.txt").read_text()

    def test_verify_mechanisms(self, capsys):
        assert main(["verify-mechanisms", "--samples", "200"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "proportional" in out and "contested_garment" in out

    def test_sweep_deterministic(self, tmp_path):
        args = [
            "sweep",
            "--sizes",
            "3:4",
            "--seeds",
            "3",
            "--claim-scale",
            "1.0",
        ]
        out1, out2 = tmp_path / "s1.csv", tmp_path / "s2.csv"
        assert main(args + ["--out", str(out1)]) == EXIT_OK
        assert main(args + ["--out", str(out2)]) == EXIT_OK
        assert out1.read_bytes() == out2.read_bytes()
        header, *rows = out1.read_text().splitlines()
        assert header.startswith("num_buyers,claim_scale,seeds,rights_frustration_mean")
        assert len(rows) == 2

    def test_sweep_rights_beat_free_market(self, tmp_path):
        out = tmp_path / "sweep.csv"
        assert main(
            ["sweep", "--sizes", "3:5", "--seeds", "4", "--out", str(out)]
        ) == EXIT_OK
        for row in out.read_text().splitlines()[1:]:
            vals = row.split(",")
            rights_f, free_f = float(vals[3]), float(vals[5])
            assert rights_f < free_f
            assert rights_f == pytest.approx(0.5 * free_f, rel=0.25)

    def test_sweep_scaled_claims_frustration_shrinks_with_size(self, tmp_path):
        out = tmp_path / "sweep-inv.csv"
        assert main(
            ["sweep", "--sizes", "3:6", "--seeds", "4", "--claim-scale", "inv", "--out", str(out)]
        ) == EXIT_OK
        rights = [float(r.split(",")[3]) for r in out.read_text().splitlines()[1:]]
        assert all(b <= a + 1e-9 for a, b in zip(rights, rights[1:]))
        assert rights[-1] < rights[0]
