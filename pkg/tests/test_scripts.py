import runpy
from pathlib import Path

SCRIPTS = Path(__file__).resolve().parent.parent / "scripts"


def load(name):
    return runpy.run_path(str(SCRIPTS / name), run_name="not_main")


def test_oracle_sweep_small(capsys):
    assert load("oracle_sweep.py")["main"](["--count", "30", "--seed", "1"]) == 0
    assert "disagreement" not in capsys.readouterr().out


def test_estimator_gap_csv(tmp_path, models_dir):
    out = tmp_path / "gap.csv"
    load("estimator_gap.py")["main"]([str(models_dir / "coupled3.json"), "--steps", "5", "--out", str(out)])
    lines = out.read_text().strip().split("\n")
    assert len(lines) == 1 + 6 * 3
    assert all(float(r.split(",")[-1]) >= -1e-10 for r in lines[1:])


def test_make_models_reproduces_bundle(tmp_path, models_dir):
    load("make_models.py")["main"](["--out", str(tmp_path)])
    for p in models_dir.glob("*.json"):
        assert (tmp_path / p.name).read_bytes() == p.read_bytes()
