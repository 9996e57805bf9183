"""Acceptance gate. Each test prints one verdict line, A1 through A10.

The fast criteria (A1-A4, A9, A10) delegate to the selfcheck suite so
the CLI `--selfcheck` path and this gate can never drift apart. A5-A7
share one trained budget sweep and A8 the capacity-comparison preset
(which gives the tabular learner its long budget), and those two
fixtures dominate the runtime (roughly 20 minutes).
"""

import time

import numpy as np
import pytest

from jamscatter.env import EnvConfig
from jamscatter.agents import TrainConfig
from jamscatter.harness import (
    ExperimentSpec,
    group_rows,
    run_experiment,
    sweep_defaults,
    tail_packet_loss,
    tail_throughput,
)
from jamscatter.selfcheck import (
    check_dueling_identity,
    check_env_invariants,
    check_gradients,
    check_jammer_lp,
    check_phy_chain,
    check_tabular_convergence,
)

SEEDS = (1, 2, 3, 4, 5)
BUDGETS = tuple(float(p) for p in range(1, 8))


def verdict(tag: str, ok: bool, detail: str) -> None:
    print(f"\n{tag} {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, f"{tag}: {detail}"


def timed(check, budget: float):
    start = time.perf_counter()
    ok, detail = check()
    elapsed = time.perf_counter() - start
    ok = ok and elapsed < budget
    return ok, f"{detail} [{elapsed:.2f}s, budget {budget:g}s]"


def test_a1_dueling_aggregation_identity():
    verdict("A1", *timed(check_dueling_identity, 1.0))


def test_a2_backprop_matches_finite_differences():
    verdict("A2", *timed(check_gradients, 10.0))


def test_a3_tabular_convergence_to_fixed_point():
    verdict("A3", *timed(check_tabular_convergence, 120.0))


def test_a4_jammer_solver_exact_against_vertices():
    verdict("A4", *timed(check_jammer_lp, 1.0))


def test_a9_backscatter_chain_and_ber_trend():
    verdict("A9", *timed(check_phy_chain, 30.0))


def test_a10_environment_property_suite():
    verdict("A10", *timed(check_env_invariants, 60.0))


@pytest.fixture(scope="module")
def budget_sweep():
    """Tail metrics per (kind, budget), seed-averaged, for A5-A7."""
    spec = ExperimentSpec(
        env=EnvConfig(),
        train=TrainConfig(),
        kinds=("fixed_ra", "htt", "wtj", "dueling"),
        seeds=SEEDS,
        sweep=("jammer.p_avg", BUDGETS),
    )
    groups = group_rows(run_experiment(spec))
    thr, loss = {}, {}
    for kind in spec.kinds:
        for p in BUDGETS:
            cells = [groups[(kind, p, s)] for s in SEEDS]
            thr[kind, p] = float(np.mean([tail_throughput(c) for c in cells]))
            loss[kind, p] = float(np.mean([tail_packet_loss(c) for c in cells]))
    return thr, loss


def fmt_curve(thr, kind):
    return " ".join(f"{thr[kind, p]:.2f}" for p in BUDGETS)


def test_a5_budget_sweep_trends(budget_sweep):
    thr, _ = budget_sweep
    up_steps = sum(
        thr["fixed_ra", p + 1] > thr["fixed_ra", p] + 1e-9 for p in BUDGETS[2:-1]
    )
    down_steps = sum(
        thr["dueling", p + 1] < thr["dueling", p] - 1e-9 for p in BUDGETS[2:-1]
    )
    ok = up_steps <= 1 and down_steps <= 1
    verdict(
        "A5",
        ok,
        f"past 3 W the scripted-rate curve rises {up_steps}x and the dueling "
        f"curve dips {down_steps}x (each allowed once); "
        f"fixed_ra [{fmt_curve(thr, 'fixed_ra')}], dueling [{fmt_curve(thr, 'dueling')}]",
    )


def test_a6_baselines_peak_early_dueling_keeps_rising(budget_sweep):
    thr, _ = budget_sweep
    parts, ok = [], True
    for kind in ("htt", "wtj"):
        peak = max(BUDGETS, key=lambda p: thr[kind, p])
        declined = thr[kind, 7.0] < thr[kind, peak] - 1e-9
        ok = ok and peak <= 3.0 and declined
        parts.append(f"{kind} peaks at {peak:g} W then falls to {thr[kind, 7.0]:.2f}")
    rising = thr["dueling", 7.0] > thr["dueling", 3.0] + 1e-9
    ok = ok and rising
    parts.append(
        f"dueling rises {thr['dueling', 3.0]:.2f} -> {thr['dueling', 7.0]:.2f}"
    )
    verdict("A6", ok, "; ".join(parts))


def test_a7_headline_ratios_at_full_budget(budget_sweep):
    thr, loss = budget_sweep
    thr_ratio = thr["dueling", 7.0] / max(thr["htt", 7.0], 1e-12)
    loss_ratio = loss["dueling", 7.0] / max(loss["htt", 7.0], 1e-12)
    ok = thr_ratio >= 2.0 and loss_ratio <= 0.9
    verdict(
        "A7",
        ok,
        f"throughput ratio {thr_ratio:.2f} (>= 2.0), "
        f"packet-loss ratio {loss_ratio:.3f} (<= 0.9) at 7 W",
    )


def window_rate(rows, iteration):
    """Throughput of the single window ending at `iteration`.

    Rows carry cumulative averages, so differencing adjacent rows
    recovers the rate over just that window.
    """
    here = next(r for r in rows if r.iteration == iteration)
    prev = [r for r in rows if r.iteration < iteration]
    if not prev:
        return here.throughput
    last = prev[-1]
    span = here.iteration - last.iteration
    return (here.throughput * here.iteration - last.throughput * last.iteration) / span


@pytest.fixture(scope="module")
def capacity20_marks():
    """Windowed throughput at slot 40000, capacity-20 cells of the preset."""
    base = ExperimentSpec(env=EnvConfig(), train=TrainConfig(), seeds=SEEDS)
    spec = sweep_defaults("fig11", base=base)
    groups = group_rows(run_experiment(spec))
    return {
        kind: float(
            np.mean([window_rate(groups[(kind, 20.0, s)], 40_000) for s in SEEDS])
        )
        for kind in spec.kinds
    }


def test_a8_learner_ordering_at_forty_thousand_slots(capacity20_marks):
    marks = capacity20_marks
    gap = (marks["dueling"] - marks["tabular"]) / max(marks["dueling"], 1e-12)
    ok = (
        marks["dueling"] >= marks["deep_q"]
        and marks["deep_q"] >= marks["tabular"]
        and gap >= 0.10
    )
    verdict(
        "A8",
        ok,
        f"throughput in the window ending at slot 40000: "
        f"dueling {marks['dueling']:.3f} >= deep_q {marks['deep_q']:.3f} >= "
        f"tabular {marks['tabular']:.3f}, tabular gap {gap:.1%} (>= 10%)",
    )
