"""Output tables, configuration documents, and the command line."""

import json

import pytest

from tycoon_sim import cli
from tycoon_sim.config import (
    Experiment,
    apply_overrides,
    build_harness_config,
    build_host_config,
    build_market_config,
    default_seeds,
    effective_seeds,
    load_config,
    resolved_config,
    sweep_points,
    validate_config,
)
from tycoon_sim.csvio import config_hash, emit_csv, format_field, read_csv
from tycoon_sim.errors import ConfigError
from tycoon_sim.hostsim import FundingMode, SchedulerKind
from tycoon_sim.market import Behavior


# -- csv emission -----------------------------------------------------------


def test_config_hash_ignores_key_order():
    assert config_hash({"a": 1, "b": [2, 3]}) == config_hash({"b": [2, 3], "a": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 2})


def test_field_formatting():
    assert format_field(0.123456789) == "0.123457"
    assert format_field(1234567.0) == "1.23457e+06"
    assert format_field(True) == "true"
    assert format_field(False) == "false"
    assert format_field(None) == ""
    assert format_field("host:0") == "host:0"
    assert format_field(42) == "42"


def test_emit_and_read_round_trip(tmp_path):
    path = tmp_path / "t.csv"
    config = {"x": 1}
    emit_csv(path, ["name", "value", "flag"],
             [["a", 0.5, True], ["b,c", 1 / 3, False]], config)
    digest, header, rows = read_csv(path)
    assert digest == config_hash(config)
    assert header == ["name", "value", "flag"]
    assert rows == [["a", "0.5", "true"], ["b,c", "0.333333", "false"]]
    # Values reparse to the printed precision.
    assert float(rows[1][1]) == pytest.approx(1 / 3, abs=1e-6)


def test_empty_rows_leave_header_only(tmp_path):
    path = tmp_path / "empty.csv"
    emit_csv(path, ["a", "b"], [], {"k": 1})
    text = path.read_text()
    assert text.splitlines()[1] == "a,b"
    assert len(text.splitlines()) == 2


def test_row_width_mismatch_rejected(tmp_path):
    with pytest.raises(ValueError):
        emit_csv(tmp_path / "bad.csv", ["a", "b"], [[1]], {})


def test_extra_comment_lines(tmp_path):
    path = tmp_path / "c.csv"
    emit_csv(path, ["a"], [[1]], {}, comments=("audit: ok",))
    assert "# audit: ok\n" in path.read_text()
    _, header, rows = read_csv(path)
    assert (header, rows) == (["a"], [["1"]])


# -- configuration ------------------------------------------------------------


def write_json(tmp_path, doc, name="conf.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{nope")
    with pytest.raises(ConfigError):
        load_config(bad)
    lst = tmp_path / "list.json"
    lst.write_text("[1,2]")
    with pytest.raises(ConfigError):
        load_config(lst)


def test_unknown_keys_rejected_everywhere():
    with pytest.raises(ConfigError, match="typo_key"):
        validate_config({"typo_key": 1})
    with pytest.raises(ConfigError, match="host"):
        validate_config({"host": {"nope": 1}})
    with pytest.raises(ConfigError, match="market"):
        validate_config({"market": {"nope": 1}})
    with pytest.raises(ConfigError, match="harness"):
        validate_config({"harness": {"nope": 1}})
    with pytest.raises(ConfigError, match="sweep"):
        validate_config({"sweep": {"nope": []}})
    validate_config({})  # all defaults are a valid document


def test_run_control_validation():
    with pytest.raises(ConfigError):
        validate_config({"seeds": [1, "x"]})
    with pytest.raises(ConfigError):
        validate_config({"repetitions": 0})
    with pytest.raises(ConfigError):
        validate_config({"out": 3})


def test_overrides_parse_json_with_string_fallback():
    doc = {"host": {}}
    apply_overrides(doc, ["host.num_timeslices=500",
                          "host.weights=[1,2]",
                          "host.scheduler=auction_share",
                          "out=results/x"])
    assert doc["host"]["num_timeslices"] == 500
    assert doc["host"]["weights"] == [1, 2]
    assert doc["host"]["scheduler"] == "auction_share"
    assert doc["out"] == "results/x"
    with pytest.raises(ConfigError):
        apply_overrides({}, ["no-equals-sign"])


def test_enum_coercion_and_diagnostics():
    cfg = build_host_config({"scheduler": "auction_share",
                             "funding_mode": "poisson",
                             "web": {"yields_cpu": False}})
    assert cfg.scheduler is SchedulerKind.AUCTION_SHARE
    assert cfg.funding_mode is FundingMode.POISSON
    assert not cfg.web.yields_cpu
    with pytest.raises(ConfigError, match="proportional_share"):
        build_host_config({"scheduler": "fifo"})


def test_build_configs_apply_seed():
    assert build_host_config({}, seed=9).rng_seed == 9
    assert build_market_config({}, seed=9).rng_seed == 9
    assert build_harness_config({}, seed=9).rng_seed == 9


def test_harness_block_coercions():
    cfg = build_harness_config({
        "parents": [{"total_credits": 2.0, "deadline_minutes": 1.0,
                     "num_hosts": 1}],
        "host_speeds": [1.0, 0.5],
        "kill_hosts": [[10.0, 1]],
        "policy_kind": "open_loop",
    })
    assert cfg.parents[0].num_hosts == 1
    assert cfg.host_speeds == (1.0, 0.5)
    assert cfg.kill_hosts == ((10.0, 1),)
    with pytest.raises(ConfigError):
        build_harness_config({"kill_hosts": [[10.0]]})
    with pytest.raises(ConfigError):
        build_harness_config({"parents": [{"bogus": 1}]})


def test_wrong_typed_value_is_a_config_error():
    with pytest.raises(ConfigError, match="invalid host"):
        build_host_config({"num_timeslices": "many"})


def test_sweep_points_defaults_and_validation():
    values, behaviors = sweep_points({})
    assert len(values) == 8
    assert set(behaviors) == set(Behavior)
    values, behaviors = sweep_points(
        {"sweep": {"interarrivals": [50], "behaviors": ["obedient"]}})
    assert values == [50.0]
    assert behaviors == [Behavior.OBEDIENT]
    with pytest.raises(ConfigError):
        sweep_points({"sweep": {"interarrivals": [-1]}})
    with pytest.raises(ConfigError):
        sweep_points({"sweep": {"behaviors": []}})


def test_seed_defaults_and_repetitions():
    assert default_seeds(Experiment.TABLE1) == list(range(1, 31))
    assert default_seeds(Experiment.HOST) == [42]
    assert effective_seeds([1, 2], 1) == [1, 2]
    assert effective_seeds([1, 2], 3) == [1, 2, 1001, 1002, 2001, 2002]


def test_resolved_config_is_stable_and_complete():
    resolved = resolved_config({}, Experiment.HOST, [42], 1)
    assert resolved["host"]["scheduler"] == "proportional_share"
    assert resolved["market"]["num_users"] == 100
    assert resolved["harness"]["parents"][0]["total_credits"] == 4.0
    # Spelling a default explicitly must not change the hash.
    spelled = resolved_config({"host": {"num_timeslices": 1000}},
                              Experiment.HOST, [42], 1)
    assert config_hash(spelled) == config_hash(resolved)


# -- command line ---------------------------------------------------------------


def smoke_doc():
    return {
        "host": {"num_timeslices": 200, "warmup_slices": 40},
        "market": {"num_users": 10, "num_hosts": 2, "duration": 60},
        "harness": {"num_hosts": 1, "duration": 5.0,
                    "parents": [{"total_credits": 1.0,
                                 "deadline_minutes": 1.0, "num_hosts": 1}]},
        "sweep": {"interarrivals": [60], "behaviors": ["obedient"]},
    }


def test_validate_command_exit_codes(tmp_path, capsys):
    good = write_json(tmp_path, smoke_doc())
    assert cli.main(["validate", "--config", good]) == 0
    assert "ok" in capsys.readouterr().out
    bad = write_json(tmp_path, {"host": {"nope": 1}}, "bad.json")
    assert cli.main(["validate", "--config", bad]) == 2
    assert "nope" in capsys.readouterr().err


def test_run_host_writes_expected_table(tmp_path):
    conf = write_json(tmp_path, smoke_doc())
    out = tmp_path / "out"
    rc = cli.main(["run", "--experiment", "host", "--config", conf,
                   "--seeds", "1..3", "--out", str(out)])
    assert rc == 0
    digest, header, rows = read_csv(out / "host.csv")
    assert header == cli.HOST_HEADER
    assert [r[-1] for r in rows] == ["1", "2", "3"]
    assert len(digest) == 64


def test_rerun_is_byte_identical(tmp_path):
    conf = write_json(tmp_path, smoke_doc())
    args = ["run", "--experiment", "market", "--config", conf, "--seed", "5"]
    assert cli.main(args + ["--out", str(tmp_path / "a")]) == 0
    assert cli.main(args + ["--out", str(tmp_path / "b")]) == 0
    assert ((tmp_path / "a" / "market.csv").read_bytes()
            == (tmp_path / "b" / "market.csv").read_bytes())


def test_set_overrides_reach_the_run(tmp_path):
    conf = write_json(tmp_path, smoke_doc())
    out = tmp_path / "out"
    rc = cli.main(["run", "--experiment", "host", "--config", conf,
                   "--seed", "1", "--out", str(out),
                   "--set", "host.weights=[21,2,3,4]"])
    assert rc == 0
    _, header, rows = read_csv(out / "host.csv")
    assert rows[0][header.index("web_share")] == "0.7"


def test_env_var_names_output_dir(tmp_path, monkeypatch):
    conf = write_json(tmp_path, smoke_doc())
    monkeypatch.setenv("TYCOON_SIM_OUT", str(tmp_path / "from_env"))
    assert cli.main(["run", "--experiment", "host", "--config", conf,
                     "--seed", "1"]) == 0
    assert (tmp_path / "from_env" / "host.csv").exists()


def test_bad_seed_range_is_diagnosed(tmp_path, capsys):
    conf = write_json(tmp_path, smoke_doc())
    rc = cli.main(["run", "--experiment", "host", "--config", conf,
                   "--seeds", "5..1", "--out", str(tmp_path / "o")])
    assert rc == 2
    assert "--seeds" in capsys.readouterr().err


def test_unwritable_output_is_diagnosed(tmp_path, capsys):
    conf = write_json(tmp_path, smoke_doc())
    blocker = tmp_path / "blocked"
    blocker.write_text("a file, not a directory")
    rc = cli.main(["run", "--experiment", "host", "--config", conf,
                   "--seed", "1", "--out", str(blocker)])
    assert rc == 1
    assert capsys.readouterr().err


def test_harness_run_emits_three_tables_with_audit(tmp_path):
    conf = write_json(tmp_path, smoke_doc())
    out = tmp_path / "out"
    rc = cli.main(["run", "--experiment", "harness", "--config", conf,
                   "--seed", "2", "--out", str(out)])
    assert rc == 0
    for name in ("harness_users.csv", "harness_hosts.csv",
                 "harness_events.csv"):
        assert (out / name).exists()
    assert "ledger-audit seed=2: conserved=true" in (
        out / "harness_users.csv").read_text()


def test_figure1_run_covers_the_grid(tmp_path):
    conf = write_json(tmp_path, smoke_doc())
    out = tmp_path / "out"
    rc = cli.main(["run", "--experiment", "figure1", "--config", conf,
                   "--seeds", "1..2", "--out", str(out)])
    assert rc == 0
    _, header, rows = read_csv(out / "figure1.csv")
    assert header == cli.MARKET_HEADER
    assert [(r[0], r[1]) for r in rows] == [("60", "obedient")]
    assert rows[0][-1] == "2"


def test_table1_run_has_five_rows(tmp_path):
    conf = write_json(tmp_path, smoke_doc())
    out = tmp_path / "out"
    rc = cli.main(["run", "--experiment", "table1", "--config", conf,
                   "--seed", "1", "--out", str(out)])
    assert rc == 0
    _, header, rows = read_csv(out / "table1.csv")
    assert header == cli.TABLE1_HEADER
    assert len(rows) == 5
    assert {r[0] for r in rows} == {
        "ps-1/10-yield", "ps-7/10-yield", "ps-7/10-noyield",
        "as-1/10-yield", "as-1/10-noyield"}
