import csv
import io
import json

import pytest

from gaussinterf import cli
from gaussinterf.cli import HEADER, PRESETS, ConfigError, RunConfig, main, preset


def write_config(tmp_path, text):
    path = tmp_path / "run.json"
    path.write_text(text)
    return str(path)


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


SMALL = {"shots": 1000, "blocks": 20, "seed": 5, "sweep": {"param": "mu", "values": [0.2, 0.5]}}


def test_run_writes_header_and_rows(tmp_path):
    cfg = write_config(tmp_path, json.dumps(SMALL))
    out = tmp_path / "out.csv"
    assert main(["run", "--config", cfg, "--out", str(out)]) == 0
    rows = read_rows(out)
    assert rows[0] == HEADER
    assert len(rows) == 1 + 2 * 3
    assert {r[2] for r in rows[1:]} == {"Phi", "q", "d"}
    assert all(r[0] == "mu" and r[9] == "1000" and r[10] == "20" for r in rows[1:])
    assert b"\r\n" not in out.read_bytes()


def test_run_is_deterministic_across_threads(tmp_path):
    cfg = write_config(tmp_path, json.dumps(SMALL))
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    main(["run", "--config", cfg, "--out", str(a), "--threads", "1"])
    main(["run", "--config", cfg, "--out", str(b), "--threads", "3"])
    assert a.read_bytes() == b.read_bytes()


def test_cli_flags_override_config(tmp_path, capsys):
    cfg = write_config(tmp_path, json.dumps({**SMALL, "sweep": None, "targets": ["q"]}))
    assert main(["run", "--config", cfg, "--blocks", "4", "--seed", "9"]) == 0
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert len(rows) == 2 and rows[1][2] == "q" and rows[1][10] == "4" and rows[1][12] == "9"


@pytest.mark.parametrize(
    "text, line",
    [
        ('{\n  "shots": 1000,\n  "mu": 1.5\n}', 3),
        ('{\n  "blocks": 1\n}', 2),
        ('{\n  "shots": 10,\n  "bogus": 1\n}', 3),
        ('{\n  "channel_noise": {"T": 1.2, "Veps": 1}\n}', 2),
        ('{\n  "shots": 10,\n  "sweep": {"param": "q", "values": [2, 0.5]}\n}', 3),
        ('{\n  "shots": 10,\n  "estimator": "magic"\n}', 3),
        ('{\n  "shots": 10,,\n}', 2),
    ],
    ids=["mu-range", "blocks", "unknown-key", "noise-T", "sweep-point", "estimator", "bad-json"],
)
def test_config_errors_name_the_line(tmp_path, capsys, text, line):
    cfg = write_config(tmp_path, text)
    assert main(["run", "--config", cfg]) == 2
    err = capsys.readouterr().err
    assert f"{cfg}:{line}:" in err


def test_config_errors_before_simulation():
    with pytest.raises(ConfigError):
        RunConfig({"sweep": {"param": "mu", "values": [0.3, 0.0]}})
    with pytest.raises(ConfigError):
        RunConfig({"sweep": {"param": "color", "values": [1]}})


def test_direct_scheme_has_no_run(tmp_path, capsys):
    cfg = write_config(tmp_path, '{"scheme": "direct"}')
    assert main(["run", "--config", cfg]) == 2


def test_unknown_figure(capsys):
    assert main(["reproduce", "fig99"]) == 2
    err = capsys.readouterr().err
    assert all(name in err for name in PRESETS)


def test_expect_flags_printed_mismatches(tmp_path, capsys):
    assert main(["expect"]) == 0
    out = capsys.readouterr().out
    assert "27.990304" in out and "38.705742" in out
    assert "printed form differs" not in out

    cfg = write_config(tmp_path, '{"scheme": "passive", "channel_noise": {"T": 0.9, "Veps": 1.1}}')
    main(["expect", "--config", cfg])
    out = capsys.readouterr().out
    calib = [line for line in out.splitlines() if line.startswith("<i+> calibration")]
    assert calib and "printed form differs" in calib[0]

    cfg = write_config(tmp_path, '{"scheme": "active"}')
    main(["expect", "--config", cfg])
    assert "printed form differs" in capsys.readouterr().out

    cfg = write_config(tmp_path, '{"scheme": "direct"}')
    main(["expect", "--config", cfg])
    out = capsys.readouterr().out
    assert "40.957517" in out and "printed form differs" in out


def test_analytic_columns_only_where_closed_forms_hold(tmp_path, capsys):
    base = {"shots": 1000, "blocks": 4, "D": 0.0, "q": 3.0, "Phi": 0.0, "d": 0.0, "mu": 0.2, "targets": ["q", "Phi"]}
    cfg = write_config(tmp_path, json.dumps(base))
    main(["run", "--config", cfg])
    rows = {r[2]: r for r in csv.reader(io.StringIO(capsys.readouterr().out))}
    assert float(rows["q"][7]) > 0 and float(rows["q"][8]) > 0
    assert rows["Phi"][7] == "" and rows["Phi"][8] == ""
    cfg = write_config(tmp_path, json.dumps({**base, "D": 10.0}))
    main(["run", "--config", cfg])
    rows = {r[2]: r for r in csv.reader(io.StringIO(capsys.readouterr().out))}
    assert rows["q"][7] == ""


@pytest.mark.parametrize("name", PRESETS)
def test_presets_are_valid_configs(name):
    configs = preset(name)
    assert configs
    for raw in configs:
        RunConfig({**raw, "blocks": 2})


def test_reproduce_small(tmp_path):
    out = tmp_path / "fig4a.csv"
    assert main(["reproduce", "fig4a", "--blocks", "4", "--shots", "200", "--out", str(out)]) == 0
    rows = read_rows(out)
    assert rows[0] == HEADER and len(rows) > 1


def test_too_many_failures_exit_code(tmp_path, monkeypatch, capsys):
    monkeypatch.setattr(cli, "make_pipeline", _failing_pipeline(cli.make_pipeline))
    cfg = write_config(tmp_path, json.dumps({"shots": 100, "blocks": 4}))
    assert main(["run", "--config", cfg]) == 3


def _failing_pipeline(real):
    from gaussinterf.estimators import EstimationError
    from gaussinterf.pipelines import Pipeline

    def make(*args, **kw):
        pl = real(*args, **kw)

        def boom(stats):
            raise EstimationError("forced")

        return Pipeline(pl.name, pl.plan, boom, pl.truth)

    return make
