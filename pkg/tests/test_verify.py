import dataclasses

import pytest
from structlog.testing import capture_logs

from random_fractals import geometry, verify
from random_fractals.geometry import CompactSet
from random_fractals.verify import Check, Suite


def _set(*intervals: tuple[float, float]) -> CompactSet:
    k_set = geometry.normalize(intervals)
    assert isinstance(k_set, CompactSet)
    return k_set


def test_exhaustive_oracles_on_hand_cases() -> None:
    unit = _set((0.0, 1.0))
    ends = _set((0.0, 0.0), (1.0, 1.0))
    assert verify.exhaustive_covering_number(unit, 0.25) == 2
    assert verify.exhaustive_packing_number(unit, 0.25) == 2
    assert verify.exhaustive_covering_number(ends, 0.5) == 1
    assert verify.exhaustive_packing_number(ends, 0.5) == 1
    assert verify.exhaustive_covering_number(ends, 0.25) == 2


def test_full_suite_is_at_least_as_large_as_quick() -> None:
    quick = dataclasses.asdict(verify.SUITE_SIZES[Suite.QUICK])
    full = dataclasses.asdict(verify.SUITE_SIZES[Suite.FULL])
    assert all(full[key] >= quick[key] for key in quick)


def test_context_streams_depend_on_label() -> None:
    ctx = verify.Context(
        seed=1, size=verify.SUITE_SIZES[Suite.QUICK], threads=1
    )
    assert ctx.seed_for("a") != ctx.seed_for("b")
    assert ctx.seed_for("a", 1) != ctx.seed_for("a", 0)
    assert ctx.rng("a").random() == ctx.rng("a").random()


def test_run_suite_with_selected_checks() -> None:
    checks = [
        check
        for check in verify.CHECKS
        if check.name in {"alpha_cantor", "sandwich", "greedy_vs_exhaustive"}
    ]
    report = verify.run_suite(Suite.QUICK, 0, checks=checks)
    assert report.passed
    assert report.suite == "quick"
    assert [c.name for c in report.checks] == [
        "alpha_cantor",
        "sandwich",
        "greedy_vs_exhaustive",
    ]


def test_broken_covering_number_is_detected(
    monkeypatch: pytest.MonkeyPatch,
) -> None:
    monkeypatch.setattr(geometry, "covering_number", lambda k_set, r: 0)  # noqa: ARG005
    checks = [
        check
        for check in verify.CHECKS
        if check.name in {"sandwich", "greedy_vs_exhaustive"}
    ]
    report = verify.run_suite(Suite.QUICK, 0, checks=checks)
    assert not report.passed
    assert not any(c.passed for c in report.checks)


@pytest.mark.parametrize(
    "error", [ValueError, ZeroDivisionError, RuntimeError, IndexError]
)
def test_raising_check_is_reported_as_failed(
    error: type[Exception],
) -> None:
    def broken(ctx: verify.Context) -> verify.CheckResult:  # noqa: ARG001
        msg = "solver diverged"
        raise error(msg)

    with capture_logs() as logs:
        report = verify.run_suite(
            Suite.QUICK, 0, checks=[Check("broken", broken)]
        )
    assert not report.passed
    assert report.checks[0].measured == {"error": "solver diverged"}
    assert [log["event"] for log in logs] == ["check raised", "check finished"]


@pytest.mark.slow
def test_quick_suite_passes() -> None:
    report = verify.run_suite(Suite.QUICK, 0, threads=4)
    failed = [c.name for c in report.checks if not c.passed]
    assert failed == []


def test_failing_check_does_not_stop_the_suite() -> None:
    def broken(ctx: verify.Context) -> verify.CheckResult:  # noqa: ARG001
        results: list[verify.CheckResult] = []
        return results[0]

    checks = [
        Check("broken", broken),
        *(c for c in verify.CHECKS if c.name == "alpha_cantor"),
    ]
    report = verify.run_suite(Suite.QUICK, 0, checks=checks)
    assert [c.name for c in report.checks] == ["broken", "alpha_cantor"]
    assert [c.passed for c in report.checks] == [False, True]
