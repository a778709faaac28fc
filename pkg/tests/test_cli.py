"""Command-line runner: schema validation, determinism, artifacts, exit codes."""

import json
import os

import numpy as np
import pytest

from parahom import ConfigError, heat_kernel
from parahom.cli import main, run, verify_suite
from parahom.config import (
    ExperimentConfig,
    fmt17,
    load_config,
    parse_config_text,
    resolve_config,
)


# -- config parsing ------------------------------------------------------------


def test_parse_flat_key_value_with_comments():
    kind, raw = parse_config_text("# demo\nd = 1  # inline\n\nL = 8\n")
    assert kind is None and raw == {"d": "1", "L": "8"}


def test_parse_rejects_duplicates_and_garbage():
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config_text("d = 1\nd = 2\n")
    with pytest.raises(ConfigError, match="key = value"):
        parse_config_text("just some words\n")


def test_kind_mismatch_between_file_and_subcommand():
    with pytest.raises(ConfigError, match="kind"):
        parse_config_text("kind = greens\n", kind="corrector")


def test_resolve_fills_defaults_and_validates():
    cfg = resolve_config("sample-env", {"d": "2", "L": "6"})
    assert cfg.params["d"] == 2 and cfg.params["dt"] == 0.05
    with pytest.raises(ConfigError, match="L"):
        resolve_config("sample-env", {"L": "7"})  # odd side length
    with pytest.raises(ConfigError, match="bogus"):
        resolve_config("sample-env", {"bogus": "1"})
    with pytest.raises(ConfigError, match="scales"):
        resolve_config("rate-fit", {"values": "1,2,3,4"})  # required key


def test_config_hash_stable_and_seed_sensitive():
    a = resolve_config("sample-env", {"d": "1"})
    b = resolve_config("sample-env", {"d": "1"})
    c = resolve_config("sample-env", {"d": "1"}, seed_override=5)
    assert a.config_hash() == b.config_hash() != c.config_hash()


def test_fmt17_roundtrips():
    for x in (1 / 3, np.pi, 1e-300, 0.1):
        assert float(fmt17(x)) == x
        assert "," not in fmt17(x)


# -- artifacts -----------------------------------------------------------------


def _write(tmp_path, text):
    p = tmp_path / "config.txt"
    p.write_text(text)
    return str(p)


def test_heat_kernel_csv_contains_oracle_row(tmp_path):
    cfg = _write(tmp_path, "d = 1\nradius = 10\nt = 1.0\n")
    out = tmp_path / "out"
    assert main(["heat-kernel", "--config", cfg, "--out", str(out)]) == 0
    lines = (out / "heat-kernel.csv").read_text().splitlines()
    header = [l for l in lines if l.startswith("#")]
    assert any("kind = heat-kernel" in l for l in header)  # config echoed
    body = [l for l in lines if not l.startswith("#")]
    assert body[0] == "x0,t,value,oracle,abs_err"
    row0 = dict(zip(body[0].split(","), body[1 + 10].split(",")))
    assert row0["x0"] == "0"
    assert float(row0["oracle"]) == pytest.approx(heat_kernel([0], 1.0), abs=1e-15)
    assert abs(float(row0["value"]) - float(row0["oracle"])) < 1e-10


def test_rerun_is_byte_identical_except_wall_time(tmp_path):
    cfg = _write(tmp_path, "d = 1\nL = 8\nt_indices = 5,10\nn_samples = 4\n")
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["avg-greens", "--config", cfg, "--out", str(a)]) == 0
    assert main(["avg-greens", "--config", cfg, "--out", str(b)]) == 0
    assert (a / "avg-greens.csv").read_bytes() == (b / "avg-greens.csv").read_bytes()
    ma = json.loads((a / "manifest.json").read_text())
    mb = json.loads((b / "manifest.json").read_text())
    ma.pop("wall_seconds"), mb.pop("wall_seconds")
    assert ma == mb
    assert ma["passed"] and ma["tool_version"]


def test_seed_flag_and_env_var_override(tmp_path, monkeypatch):
    cfg = _write(tmp_path, "d = 1\nL = 8\nt_indices = 5\nn_samples = 4\n")
    base, enved, flagged = (tmp_path / n for n in ("base", "env", "flag"))
    main(["avg-greens", "--config", cfg, "--out", str(base)])
    monkeypatch.setenv("PARAHOM_SEED", "9")
    main(["avg-greens", "--config", cfg, "--out", str(enved)])
    main(["avg-greens", "--config", cfg, "--seed", "9", "--out", str(flagged)])
    b = (base / "avg-greens.csv").read_bytes()
    e = (enved / "avg-greens.csv").read_bytes()
    f = (flagged / "avg-greens.csv").read_bytes()
    assert b != e and e == f  # env var changes the seed; flag agrees with it


def test_csv_uses_newlines_and_17_digits(tmp_path):
    cfg = _write(tmp_path, "d = 1\nL = 8\nn_steps = 3\n")
    out = tmp_path / "out"
    main(["sample-env", "--config", cfg, "--out", str(out)])
    data = (out / "sample-env.csv").read_bytes()
    assert b"\r" not in data
    body = [l for l in data.decode().splitlines() if not l.startswith("#")]
    val = body[1].split(",")[2]
    assert float(val) == float(fmt17(float(val)))  # 17-digit round trip


def test_run_writes_manifest_with_verdicts(tmp_path):
    cfg = ExperimentConfig("heat-kernel", {"d": 1, "radius": 8, "t": 0.5, "seed": 0})
    manifest = run(cfg, str(tmp_path / "m"))
    assert manifest["verdicts"]["oracle_sup_error"]
    assert manifest["config"]["radius"] == 8
    assert os.path.exists(tmp_path / "m" / "manifest.json")


# -- exit codes ----------------------------------------------------------------


def test_exit_code_2_on_schema_error(tmp_path, capsys):
    cfg = _write(tmp_path, "L = 7\n")
    assert main(["sample-env", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert "L" in capsys.readouterr().err  # diagnostic names the field


def test_exit_code_1_on_verdict_failure(tmp_path):
    # noise-dominated rate fit: the report carries a warning, verdict fails
    rng = np.random.default_rng(0)
    vals = ",".join(str(abs(v)) for v in rng.normal(0, 1e-12, 6))
    cfg = _write(tmp_path, f"scales = 1,2,4,8,16,32\nvalues = {vals}\n")
    assert main(["rate-fit", "--config", cfg, "--out", str(tmp_path / "o")]) == 1


def test_exit_code_3_on_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    cfg = _write(tmp_path, "d = 1\nradius = 4\nt = 1.0\n")
    code = main(["heat-kernel", "--config", cfg, "--out", str(blocker / "sub")])
    assert code == 3


def test_missing_kind_in_file_without_subcommand(tmp_path):
    with pytest.raises(ConfigError, match="kind"):
        load_config(_write(tmp_path, "d = 1\n"))


# -- verify battery ------------------------------------------------------------


def test_verify_suite_rejects_bad_tier():
    with pytest.raises(ConfigError, match="tier"):
        verify_suite("medium")


def test_verify_fast_tier_passes(capsys):
    assert verify_suite("fast")
    out = capsys.readouterr().out
    assert "criterion  1 [PASS]" in out and "all criteria pass" in out
