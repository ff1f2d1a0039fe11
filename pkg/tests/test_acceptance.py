"""Acceptance criteria 1-7, one PASS/FAIL line each.

Run ``pytest tests/test_acceptance.py -v`` (lines appear in the output), or
``python tests/test_acceptance.py`` for just the summary table.
"""

import math
import sys
import time

import pytest

from drawdown_put import mc
from drawdown_put.model import make_params
from drawdown_put.pricer import build_model, v_block
from drawdown_put.verify import (
    BASE_CASE,
    CheckResult,
    check_barrier,
    check_dominance,
    check_generator,
    check_high_monotone,
    check_kink,
    check_laplace,
    check_mc,
    check_reflection,
    check_sensitivities,
    check_structure,
    random_parameter_sets,
)

K = BASE_CASE["K"]
C = math.log(BASE_CASE["cap_ratio"])
MC_CONFIG = mc.McConfig(n_paths=200_000, dt=1e-3, t_max=400.0, seed=mc.DEFAULT_SEED, n_workers=4)


def _model(lam=BASE_CASE["lam"]):
    return build_model(make_params(BASE_CASE["r"], BASE_CASE["sigma"], lam, BASE_CASE["rho"]), K, C)


def _timed(fn, budget):
    t0 = time.perf_counter()
    checks = fn()
    dt = time.perf_counter() - t0
    return list(checks) + [CheckResult("runtime [s]", dt < budget, dt, budget)]


def criterion_1(jumps=None):
    sets = random_parameter_sets(50, seed=11, jumps=jumps)
    return _timed(lambda: [check_structure(sets)], 1.0)


def criterion_2(jumps=None):
    sets = random_parameter_sets(50, seed=11, jumps=jumps)
    return _timed(lambda: [check_laplace(sets)], 10.0)


def criterion_3(lam=BASE_CASE["lam"]):
    return check_barrier(_model(lam))


def criterion_4(lam=BASE_CASE["lam"]):
    m = _model(lam)
    return _timed(lambda: [check_reflection(m), check_generator(m, 20), check_dominance(m, 100)], 60.0)


def criterion_5():
    return _timed(lambda: check_mc(_model(), MC_CONFIG), 600.0)


def criterion_6():
    m = _model()
    return check_sensitivities() + [check_high_monotone(m), check_kink(m)]


def criterion_7():
    out = []
    for fn in (criterion_1, criterion_2):
        out += [CheckResult(f"[{fn.__name__}] {r.name}", r.passed, r.metric, r.limit, r.detail) for r in fn(False)]
    for fn in (criterion_3, criterion_4):
        out += [CheckResult(f"[{fn.__name__}] {r.name}", r.passed, r.metric, r.limit, r.detail) for r in fn(0.0)]
    m = _model(0.0)
    out.append(CheckResult("V7 = Gamma = 0", v_block(m, 7) == 0.0 and m.constants_Q.gamma_const == 0.0, 0.0, 0.0))
    return out


CRITERIA = {
    1: ("structural identities", criterion_1),
    2: ("Laplace-transform oracle", criterion_2),
    3: ("barrier existence and smooth paste", criterion_3),
    4: ("HJB verification", criterion_4),
    5: ("Monte Carlo equivalence", criterion_5),
    6: ("qualitative sensitivities and shape", criterion_6),
    7: ("no-jump regression", criterion_7),
}


def summary_line(n: int, checks) -> str:
    ok = all(c.passed for c in checks)
    failed = [c.name for c in checks if not c.passed]
    tail = f"  failing: {'; '.join(failed)}" if failed else ""
    return f"ACCEPTANCE {n} [{'PASS' if ok else 'FAIL'}] {CRITERIA[n][0]} ({len(checks)} checks){tail}"


def _report(n, capsys=None):
    checks = CRITERIA[n][1]()
    lines = [summary_line(n, checks)] + ["    " + c.line() for c in checks]
    if capsys is not None:
        with capsys.disabled():
            print("\n" + "\n".join(lines))
    return checks


@pytest.mark.parametrize("n", sorted(CRITERIA))
def test_acceptance(n, capsys):
    checks = _report(n, capsys)
    failed = [c.line() for c in checks if not c.passed]
    assert not failed, "\n".join(failed)


if __name__ == "__main__":
    only = [int(a) for a in sys.argv[1:]] or sorted(CRITERIA)
    bad = 0
    for n in only:
        checks = CRITERIA[n][1]()
        bad += not all(c.passed for c in checks)
        print(summary_line(n, checks), flush=True)
    sys.exit(1 if bad else 0)
