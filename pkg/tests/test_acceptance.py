"""Acceptance criteria, each run at full scale through its named experiment.

Every criterion prints one ``PASS`` or ``FAIL`` line (also collected in the
terminal summary) and asserts the experiment's verdict together with its
runtime budget.
"""

import numpy as np
import pytest

from algdiv.experiments import run_experiment

# (criterion number, experiment name, runtime budget in seconds or None)
CRITERIA = [
    (1, "fast-path", 5),
    (2, "converse", 30),
    (3, "gl-continuum", None),
    (4, "supergroup", None),
    (5, "blind-matching", 120),
    (6, "scaling-dichotomy", 180),
    (7, "seqgevp-complete", 10),
    (8, "seqgevp-partial", None),
    (9, "eigdiff", None),
    (10, "cma-phase", 180),
    (11, "cma-mma", None),
    (12, "stratified-pi", None),
    (13, "coding-rate", 300),
    (14, "conjugate-bound", None),
    (15, "gaat", None),
    (16, "level2", None),
]


def _extra_checks(name, res):
    """Re-derive the headline quantity from the per-trial rows where possible."""
    rows = res.rows
    if name == "fast-path":
        assert max(r["rel_err"] for r in rows) <= 1e-11
        assert {r["M"] for r in rows} == {8, 16, 64, 256}
    elif name == "converse":
        assert all(0.85 <= r["var_ratio"] <= 1.15 for r in rows) and len(rows) == 8
    elif name == "gl-continuum":
        v = [r["entry_mse"] for r in rows]
        assert [r["G_order"] * r["L"] for r in rows] == [8] * 4
        assert max(v) / min(v) - 1 <= 0.15
    elif name == "supergroup":
        mse = {r["group"]: r["entry_mse"] for r in rows}
        assert mse["<shift^2>"] / mse["Z_8"] >= 1.5
    elif name == "blind-matching":
        assert len(rows) == 200
        assert np.mean([r["selected"] == "Z_32" for r in rows]) >= 0.95
    elif name == "stratified-pi":
        assert res.metrics["mse_ratio"] >= 50
    elif name == "conjugate-bound":
        assert res.metrics["violations"] == 0


@pytest.mark.slow
@pytest.mark.parametrize("number,name,budget", CRITERIA, ids=[f"{n:02d}-{e}" for n, e, _ in CRITERIA])
def test_criterion(number, name, budget, acceptance_log):
    res = run_experiment(name)
    within = budget is None or res.elapsed_s <= budget
    ok = res.passed and within
    line = f"{number:2d}. {'PASS' if ok else 'FAIL'} {name} ({res.elapsed_s:.1f} s): " + res.line().split(": ", 1)[1]
    print(line)
    acceptance_log.append(line)
    assert res.passed, res.line()
    assert within, f"{name} took {res.elapsed_s:.1f} s, budget {budget} s"
    _extra_checks(name, res)
