import csv
import json

import pytest

from hilbert_escape import acceptance
from hilbert_escape.cli import ConfigError, main, parse_config
from hilbert_escape.seeding import task_rng


def _read(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def _write(tmp_path, text):
    p = tmp_path / "exp.cfg"
    p.write_text(text)
    return str(p)


def test_parse_config_grammar():
    cfg = parse_config("kind = cover\nfield = Q(sqrt2)\nrate = 0.3\nrate = 0.1\n"
                       "M = e^2\nN = 4..6\nN = 9\nseed = 1\nseed = 2  # two seeds\n")
    assert cfg.rates == [0.3, 0.1] and cfg.N == [4, 5, 6, 9] and cfg.seeds == [1, 2]
    assert cfg.M[0] == pytest.approx(7.38905609893065)
    with pytest.raises(ConfigError, match="line 2"):
        parse_config("kind = height\ncolour = blue\n")
    with pytest.raises(ConfigError, match="line 1"):
        parse_config("N = many\n", "height")
    with pytest.raises(ConfigError, match="given twice"):
        parse_config("eta = 0.1\neta = 0.2\n", "height")
    with pytest.raises(ConfigError, match="M"):
        parse_config("M = 0.5\n", "escape").validate()


def test_height_run_is_deterministic(tmp_path):
    cfg = _write(tmp_path, "field = Q(sqrt5)\npoints = 100\n")
    assert main(["height", "--config", cfg, "--seed", "42", "--out", str(tmp_path / "a")]) == 0
    assert main(["height", "--config", cfg, "--seed", "42", "--out", str(tmp_path / "b"),
                 "--jobs", "2"]) == 0
    a = (tmp_path / "a" / "heights.csv").read_bytes()
    assert a == (tmp_path / "b" / "heights.csv").read_bytes()
    rows = _read(tmp_path / "a" / "heights.csv")
    assert len(rows) == 101 and rows[0][:3] == ["seed", "point_id", "height"]
    assert all(float(r[2]) >= 1 for r in rows[1:])
    man = json.loads((tmp_path / "a" / "manifest.json").read_text())
    man_b = json.loads((tmp_path / "b" / "manifest.json").read_text())
    assert man["config_hash"] == man_b["config_hash"] and man["exit_status"] == 0
    assert man["outputs"] == ["heights.csv"]


@pytest.mark.parametrize("kind, text, files", [
    ("itinerary", "trajectories = 5\nN = 60\nrate = 0.5\n", ["itinerary.csv", "profiles.csv"]),
    ("partitions", "trajectories = 3\nN = 10..12\nM = 10\n", ["partitions.csv", "labels.csv"]),
    ("cover", "N = 4..6\npoints = 50\nlabels = 3\n", ["cover_sweep.csv"]),
    ("entropy", "N = 4..7\npoints = 60\nseed = 3\n", ["entropy_3.csv"]),
    ("escape", "N = 10\nN = 20\npoints = 50\nM = 5\n", ["escape.csv"]),
])
def test_each_kind_writes_its_files(tmp_path, kind, text, files):
    out = tmp_path / kind
    assert main([kind, "--config", _write(tmp_path, text), "--out", str(out)]) == 0
    for name in files:
        assert len(_read(out / name)) > 1
    assert json.loads((out / "manifest.json").read_text())["outputs"] == files


def test_cover_columns(tmp_path):
    out = tmp_path / "c"
    main(["cover", "--config", _write(tmp_path, "N = 4..5\npoints = 20\nlabels = 2\n"), "--out", str(out)])
    rows = _read(out / "cover_sweep.csv")
    assert rows[0] == ["N", "label_hash", "constructed_count", "paper_bound",
                       "greedy_lower", "greedy_upper"]
    assert {r[0] for r in rows[1:]} == {"4", "5"}


def test_exit_codes(tmp_path, capsys):
    assert main(["height", "--config", _write(tmp_path, "bogus = 1\n"), "--out", str(tmp_path)]) == 2
    assert "line 1" in capsys.readouterr().err
    assert main(["height", "--config", _write(tmp_path, "kind = cover\n")]) == 2
    assert main(["height", "--config", str(tmp_path / "missing.cfg")]) == 2
    assert main(["escape", "--config", _write(tmp_path, "N = 5000\nrate = 1\n"),
                 "--out", str(tmp_path / "x")]) == 3
    assert main(["height", "--seed", "-1", "--out", str(tmp_path / "y")]) == 2


def test_acceptance_kind_exit_status(tmp_path, monkeypatch):
    def good(seed, out=None):
        return True, "ok", {}

    def bad(seed, out=None):
        return False, "no", {}

    monkeypatch.setattr(acceptance, "CRITERIA", {1: ("good", good)})
    assert main(["acceptance", "--out", str(tmp_path / "g")]) == 0
    monkeypatch.setattr(acceptance, "CRITERIA", {1: ("good", good), 5: ("bad", bad)})
    assert main(["acceptance", "--out", str(tmp_path / "b")]) == 1


def test_task_streams_are_independent():
    a = task_rng(7, 0).integers(0, 2 ** 32, 4)
    b = task_rng(7, 1).integers(0, 2 ** 32, 4)
    assert not (a == b).all()
    assert (a == task_rng(7, 0).integers(0, 2 ** 32, 4)).all()
    with pytest.raises(ValueError):
        task_rng(-1, 0)
