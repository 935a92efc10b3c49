import csv
import io
import json

import pytest
from click.testing import CliRunner
from scipy.stats import binomtest

from dirne import __version__
from dirne.cli import (CURVE_COLUMNS, curve_rows, frange, main, rate_rows, semidi_rows,
                       simulate_rows)
from dirne.eat import completeness
from dirne.lower import GridSpec, two_sided_00_lb
from dirne.strategy import f_a00e_analytic


def invoke(*args, env=None):
    return CliRunner().invoke(main, [str(a) for a in args], env=env)


def parse_csv(text):
    meta = [l for l in text.splitlines() if l.startswith("# ")]
    body = "\n".join(l for l in text.splitlines() if not l.startswith("# "))
    rows = list(csv.reader(io.StringIO(body)))
    return meta, rows[0], rows[1:]


def test_curve_analytic_rows():
    res = invoke("curve", "--kind", "A_00E", "--direction", "analytic",
                 "--omega-min", 0.76, "--omega-max", 0.85, "--omega-step", 0.01)
    assert res.exit_code == 0
    meta, header, rows = parse_csv(res.output)
    assert header == CURVE_COLUMNS
    assert len(rows) == 10
    for row in rows:
        assert float(row[1]) == f_a00e_analytic(float(row[0]))
    assert any(f'"{__version__}"' in m for m in meta)


def test_curve_lower_matches_library():
    res = invoke("curve", "--kind", "AB_00E", "--direction", "lower", "--omega-min", 0.84,
                 "--omega-max", 0.84, "--grid", "256x256x16")
    assert res.exit_code == 0
    _, _, rows = parse_csv(res.output)
    assert len(rows) == 1
    assert float(rows[0][1]) == two_sided_00_lb(0.84, GridSpec((256, 256, 16))).value
    assert rows[0][5] == "256x256x16"


def test_curve_empty_range():
    res = invoke("curve", "--kind", "A_00E", "--direction", "analytic",
                 "--omega-min", 0.85, "--omega-max", 0.8)
    assert res.exit_code == 0
    _, header, rows = parse_csv(res.output)
    assert header == CURVE_COLUMNS and rows == []


@pytest.mark.parametrize("kind,direction", [("AB_E", "lower"), ("A_XYE", "analytic"),
                                            ("AB_00E", "conjectured")])
def test_curve_unsupported_pair(kind, direction):
    res = invoke("curve", "--kind", kind, "--direction", direction)
    assert res.exit_code == 2
    assert f"{kind}/{direction}" in res.output


def test_curve_bad_grid():
    res = invoke("curve", "--kind", "A_XYE", "--direction", "lower", "--grid", "4x4")
    assert res.exit_code == 2


def test_unknown_flag_rejected():
    assert invoke("curve", "--kind", "A_00E", "--direction", "analytic", "--bogus", 1).exit_code == 2


def test_frange_inclusive():
    assert len(frange(0.76, 0.85, 0.01)) == 10
    assert frange(0.8, 0.7, 0.01) == []


def test_rate_rows():
    res = invoke("rate", "--protocol", "recycled", "--n", "1e8", "--n", 1, "--omega-exp", 0.752)
    assert res.exit_code == 0
    _, header, rows = parse_csv(res.output)
    assert header[-3:] == ["bits_out", "bits_in", "net_per_round"]
    assert float(rows[0][-1]) > 0
    assert float(rows[1][header.index("bits_out")]) == 0.0
    res = invoke("rate", "--protocol", "spot", "--gamma", 3.383e-4, "--n", "1e10",
                 "--omega-exp", 0.752)
    assert float(parse_csv(res.output)[2][0][-1]) <= 0


def test_rate_invalid_eps():
    res = invoke("rate", "--protocol", "recycled", "--n", 100, "--omega-exp", 0.752,
                 "--eps-h", 2, "--eps-eat", 0.1)
    assert res.exit_code == 2
    res = invoke("rate", "--protocol", "spot", "--n", 100, "--omega-exp", 0.752)
    assert res.exit_code == 2


def test_simulate_rows_repeatable():
    args = ("simulate", "--protocol", "spot", "--gamma", 0.1, "--n", 2000, "--omega-exp", 0.84,
            "--delta", 0.1, "--seed", 5, "--seeds", 3)
    first, second = invoke(*args), invoke(*args)
    assert first.exit_code == 0 and first.output == second.output
    _, header, rows = parse_csv(first.output)
    assert header == ["seed", "empirical_omega", "aborted", "bits_out"]
    assert [r[0] for r in rows] == ["5", "6", "7"]
    one = parse_csv(invoke("simulate", "--protocol", "spot", "--gamma", 0.1, "--n", 2000,
                           "--omega-exp", 0.84, "--delta", 0.1, "--seed", 6).output)[2]
    assert one[0] == rows[1]


def test_simulate_zero_rounds():
    res = invoke("simulate", "--protocol", "recycled", "--n", 0, "--omega-exp", 0.84,
                 "--delta", 0.1, "--seeds", 2)
    rows = parse_csv(res.output)[2]
    assert all(r[2] == "false" and float(r[3]) == 0.0 for r in rows)


def test_simulate_invalid():
    res = invoke("simulate", "--protocol", "recycled", "--n", 10, "--omega-exp", 0.3,
                 "--delta", 0.1)
    assert res.exit_code == 2


def test_simulate_abort_fraction():
    n, d = 5000, 0.03
    rows = simulate_rows("recycled", n, 0.84, d, range(100))
    aborts = sum(r[2] for r in rows)
    bound = completeness("Recycled", n, d)
    assert binomtest(aborts, 100, bound, alternative="greater").pvalue >= 0.01


def test_semidi_rows():
    res = invoke("semidi", "--omega", 0.878, "--theta", 0.5, "--theta", 0.8, "--omega", 1.0)
    assert res.exit_code == 0
    _, header, rows = parse_csv(res.output)
    assert header == ["omega", "theta", "G_lb", "F_env", "net_recycle", "net_public", "feasible"]
    table = {(float(r[0]), float(r[1])): r for r in rows}
    assert float(table[(0.878, 0.5)][2]) == 0.0
    assert 0.25 <= float(table[(0.878, 0.8)][2]) <= 0.35
    assert table[(1.0, 0.8)][6] == "false" and float(table[(1.0, 0.8)][2]) == 2.0
    assert table[(1.0, 0.8)][4] == ""


def test_semidi_out_of_range():
    assert invoke("semidi", "--omega", 0.3, "--theta", 0.8).exit_code == 2
    assert invoke("semidi", "--omega", 0.9, "--theta", 1.2).exit_code == 2


def test_json_round_trip():
    res = invoke("curve", "--kind", "A_XYE", "--direction", "conjectured", "--format", "json",
                 "--omega-min", 0.8, "--omega-max", 0.82, "--omega-step", 0.01)
    data = json.loads(res.output)
    assert data["columns"] == CURVE_COLUMNS
    assert data["rows"] == curve_rows("A_XYE", "conjectured", frange(0.8, 0.82, 0.01))
    res = invoke("rate", "--protocol", "biased", "--zeta-a", 0.2, "--zeta-b", 0.3,
                 "--n", "1e9", "--omega-exp", 0.8, "--format", "json")
    data = json.loads(res.output)
    assert data["rows"] == rate_rows("biased", [10 ** 9], 0.8, zeta_a=0.2, zeta_b=0.3)
    res = invoke("semidi", "--omega", 0.9, "--theta", 0.8, "--format", "json",
                 "--grid", "32x32x32x32")
    data = json.loads(res.output)
    assert data["rows"] == semidi_rows([0.9], [0.8], grid=(32, 32, 32, 32))


def test_metadata_reproduces_output(tmp_path):
    out = tmp_path / "a.json"
    res = invoke("curve", "--kind", "A_XYE", "--direction", "lower", "--grid", "8x8x8",
                 "--omega-min", 0.8, "--omega-max", 0.81, "--out", out, "--format", "json")
    assert res.exit_code == 0
    data = json.loads(out.read_text())
    cfg = data["metadata"]["config"]
    assert data["metadata"]["seed"] == cfg["seed"] == 0
    args = ["curve"]
    for key, val in cfg.items():
        if val is not None:
            args += ["--" + key.replace("_", "-"), val]
    again = tmp_path / "b.json"
    assert invoke(*args, "--out", again).exit_code == 0
    assert again.read_bytes() == out.read_bytes()


def test_threads_env():
    base = ("curve", "--kind", "A_00E", "--direction", "analytic")
    assert invoke(*base, env={"DIRNE_THREADS": "0"}).exit_code == 2
    res = invoke(*base, env={"DIRNE_THREADS": "3"})
    assert res.exit_code == 0 and "# threads: 3" in res.output


def test_budget_exceeded():
    res = invoke("curve", "--kind", "A_XYE", "--direction", "upper", "--omega-min", 0.8,
                 "--omega-max", 0.8, "--restarts", 4, "--budget-seconds", 0)
    assert res.exit_code == 3


def test_infeasible_maps_to_three(monkeypatch):
    from dirne import cli
    from dirne.errors import InfeasibleError

    def boom(*args, **kwargs):
        raise InfeasibleError("no restart reached the score")

    monkeypatch.setattr(cli, "heuristic_min", boom)
    res = invoke("curve", "--kind", "A_XYE", "--direction", "upper", "--omega-min", 0.8,
                 "--omega-max", 0.8)
    assert res.exit_code == 3
