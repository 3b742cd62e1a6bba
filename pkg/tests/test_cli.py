import json
import os

import pytest

from latticefronts import cli
from latticefronts import oracles
from latticefronts.env import CHANNELS, canonical_constant, constant_medium
from latticefronts.errors import ConfigError


def _write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg, indent=2))
    return str(p)


def _constant(**kw):
    return {"medium": canonical_constant().to_dict(), **kw}


def switching_medium_spec(seed):
    ch = {k: {"type": "constant", "value": v} for k, v in zip(CHANNELS, (1.0, 1.0, 0.5, 0.5, 1.0, 1.0))}
    ch["a1"] = {"type": "switching", "low": 0.8, "high": 1.2, "mean_dwell": 3.0, "width": 1.0}
    return {"kind": "smoothed-switching", "seed": seed, "channels": ch}


def _run_dirs(root):
    return sorted(p for p in root.iterdir() if not p.name.startswith("."))


def test_minimal_config_parses():
    cfg = cli.parse_config(json.dumps(_constant()), "check")
    assert cfg.experiment == "check" and cfg.schema_version == 1
    assert cfg.typed_params().window == 50.0


def test_unknown_key_reports_its_line():
    text = '{\n  "medium": %s,\n  "params": {\n    "windw": 5\n  }\n}' % json.dumps(canonical_constant().to_dict())
    with pytest.raises(ConfigError, match=r"params\.windw \(line 4\)"):
        cli.parse_config(text, "check")


def test_invalid_json_reports_position():
    with pytest.raises(ConfigError, match="line 2 column"):
        cli.parse_config('{\n  "medium": ,\n}', "check")


@pytest.mark.parametrize("gamma", [0.0, -1.0])
def test_nonpositive_gamma_rejected(tmp_path, gamma, capsys):
    path = _write(tmp_path, _constant(params={"gamma": gamma}))
    assert cli.main(["front", "--config", path, "--out", str(tmp_path / "runs")]) == 2
    assert "gamma" in capsys.readouterr().err
    assert not (tmp_path / "runs").exists() or not _run_dirs(tmp_path / "runs")


def test_missing_medium_rejected():
    with pytest.raises(ConfigError, match="medium"):
        cli.parse_config('{"params": {"gamma": 2.0}}', "front")
    # the speed experiment can run from a given least mean alone
    cli.parse_config('{"params": {"lambda_least": 0.75}}', "speed")


def test_check_passes_for_canonical_medium(tmp_path):
    out = tmp_path / "runs"
    assert cli.main(["check", "--config", _write(tmp_path, _constant()), "--out", str(out)]) == 0
    (run,) = _run_dirs(out)
    verdict = json.loads((run / "hypotheses.json").read_text())
    assert verdict["all_pass"] is True
    header = (run / "equilibria.csv").read_bytes().split(b"\n", 1)[0]
    assert header == b"t,u_star,v_star,h,lambda"
    assert b"\r" not in (run / "equilibria.csv").read_bytes()


def test_check_failure_exits_3(tmp_path):
    med = constant_medium(0.2, 1, 0.5, 1.0, 1, 1).to_dict()
    path = _write(tmp_path, {"medium": med})
    assert cli.main(["check", "--config", path, "--out", str(tmp_path / "runs")]) == 3
    (run,) = _run_dirs(tmp_path / "runs")
    assert json.loads((run / "manifest.json").read_text())["exit_code"] == 3


def test_subcritical_front_exits_4(tmp_path, capsys):
    path = _write(tmp_path, _constant(params={"gamma": 1.5}))
    assert cli.main(["front", "--config", path, "--out", str(tmp_path / "runs")]) == 4
    assert "no supercritical root" in capsys.readouterr().err
    assert not _run_dirs(tmp_path / "runs")


def test_rerun_reproduces_file_hashes(tmp_path):
    cfg = _constant(params={"times": [1.0, 2.0], "n_sites": 60, "first": -30})
    path = _write(tmp_path, cfg)
    hashes = []
    for root in ("a", "b"):
        assert cli.main(["simulate", "--config", path, "--out", str(tmp_path / root)]) == 0
        (run,) = _run_dirs(tmp_path / root)
        man = json.loads((run / "manifest.json").read_text())
        hashes.append((run.name, man["files"]))
    assert hashes[0] == hashes[1]


def test_list_detects_tampering(tmp_path, capsys):
    out = tmp_path / "runs"
    assert cli.list_runs(out) == []
    cli.main(["check", "--config", _write(tmp_path, _constant()), "--out", str(out)])
    cli.main(["speed", "--config", _write(tmp_path, {"params": {"lambda_least": 0.75}}, "s.json"), "--out", str(out)])
    entries = cli.list_runs(out)
    assert [e["status"] for e in entries] == ["ok", "ok"]
    check_dir = next(p for p in _run_dirs(out) if p.name.startswith("check"))
    with open(check_dir / "equilibria.csv", "a") as fh:
        fh.write("1,2,3,4,5\n")
    status = {e["run"]: e for e in cli.list_runs(out)}
    bad = status[check_dir.name]
    assert bad["status"] == "corrupted" and any("hash mismatch" in p for p in bad["problems"])
    assert cli.main(["list", "--out", str(out)]) == 0
    assert "corrupted" in capsys.readouterr().out


def test_failed_run_leaves_nothing(tmp_path, monkeypatch):
    def boom(cfg, out):
        out.json("partial.json", {"x": 1})
        raise RuntimeError("disk on fire")

    monkeypatch.setitem(cli.RUNNERS, "check", boom)
    cfg = cli.parse_config(json.dumps(_constant()), "check")
    with pytest.raises(RuntimeError):
        cli.run(cfg, tmp_path)
    assert list(tmp_path.iterdir()) == []


def test_seed_override_changes_the_run(tmp_path):
    spec = switching_medium_spec(seed=1)
    base = {"medium": spec, "params": {"t1": 20.0}}
    a = cli.parse_config(json.dumps(base), "medium-dump")
    b = cli.parse_config(json.dumps(base), "medium-dump", seed=2)
    assert a.medium_spec().seed == 1 and b.medium_spec().seed == 2
    assert cli.run_id(a) != cli.run_id(b)
    path = _write(tmp_path, base)
    for s in ("1", "2"):
        assert cli.main(["medium-dump", "--config", path, "--seed", s, "--out", str(tmp_path / "runs")]) == 0
    dumps = [(d / "medium.csv").read_bytes() for d in _run_dirs(tmp_path / "runs")]
    assert len(dumps) == 2 and dumps[0] != dumps[1]


def test_sweep_runs_in_parallel(tmp_path):
    cfg = {"medium": switching_medium_spec(seed=0), "params": {"t1": 10.0},
           "sweep": {"seeds": [3, 4, 5]}}
    path = _write(tmp_path, cfg)
    assert cli.main(["medium-dump", "--config", path, "--threads", "2", "--out", str(tmp_path / "runs")]) == 0
    runs = _run_dirs(tmp_path / "runs")
    assert len(runs) == 3
    seeds = sorted(json.loads((r / "manifest.json").read_text())["config"]["seed"] for r in runs)
    assert seeds == [3, 4, 5]


def test_oracle_runs_without_config(tmp_path, monkeypatch):
    calls = {}

    def fake(outdir, quick=False):
        calls["quick"] = quick
        os.makedirs(outdir)
        with open(os.path.join(outdir, "manifest.json"), "w") as fh:
            fh.write("{}\n")
        return {"fixtures": {}}

    monkeypatch.setattr(oracles, "generate_fixtures", fake)
    assert cli.main(["oracle", "--out", str(tmp_path)]) == 0
    assert calls == {"quick": False}
    (run,) = _run_dirs(tmp_path)
    assert "fixtures/manifest.json" in json.loads((run / "manifest.json").read_text())["files"]
