"""
Evaluation pipeline cross-checking the existence classifier against the
localized root search on reference parameter pairs.
"""

import statistics
from collections import defaultdict

from pydantic import BaseModel, Field

from .env import logfire
from .errors import LatticeError
from .localized import classify_existence, scan_localized
from .models import LatticeSpec


class ReferenceCase(BaseModel):
    """Uniform-lattice parameters with the expected occupied gap (None: no mode)."""

    panel: str
    m1: float
    m2: float
    expected_gap: str | None
    tags: list[str] = Field(default_factory=list)


class CaseResult(BaseModel):
    panel: str
    m1: float
    m2: float
    expected_gap: str | None
    classified_gap: str | None
    roots: list[float]
    root_gaps: list[str]
    threshold: float | None
    agrees: bool
    error: str | None = None


class EvaluationReport(BaseModel):
    total_cases: int
    passed: int
    failed: int
    agreement: float
    mean_root_count: float
    results: list[CaseResult]
    results_by_regime: dict[str, dict[str, float]]
    problem_areas: list[str]


def reference_cases() -> list[ReferenceCase]:
    """Eight d_loc reference panels spanning the three gap regimes, with their verdicts."""
    return [
        ReferenceCase(panel="a", m1=-0.9, m2=-0.03, expected_gap="G2", tags=["two-gap"]),
        ReferenceCase(panel="b", m1=-0.9, m2=0.1, expected_gap="G1", tags=["two-gap"]),
        ReferenceCase(panel="c", m1=-0.9, m2=0.25, expected_gap="G1", tags=["two-gap"]),
        ReferenceCase(panel="d", m1=-0.9, m2=0.7, expected_gap=None, tags=["two-gap"]),
        ReferenceCase(panel="e", m1=-0.5, m2=-0.2, expected_gap="G2", tags=["one-gap-above-guided"]),
        ReferenceCase(panel="f", m1=-0.5, m2=0.1, expected_gap=None, tags=["one-gap-above-guided"]),
        ReferenceCase(panel="g", m1=2.0, m2=-2.6, expected_gap="G", tags=["one-gap-above-propagative"]),
        ReferenceCase(panel="h", m1=2.0, m2=-2.0, expected_gap=None, tags=["one-gap-above-propagative"]),
    ]


def _gap_name(m1: float, omega: float) -> str:
    report = classify_existence(m1, 0.0)
    for verdict in report.verdicts:
        lo, hi = verdict.interval
        if lo < omega < hi:
            return verdict.gap
    return "?"


class EvaluationPipeline:
    """Runs every reference case through both existence routes."""

    def __init__(self, cases: list[ReferenceCase] | None = None):
        self.cases = cases or reference_cases()

    def evaluate_case(self, case: ReferenceCase) -> CaseResult:
        with logfire.span("evaluate_case", panel=case.panel, m1=case.m1, m2=case.m2):
            try:
                report = classify_existence(case.m1, case.m2)
                scan = scan_localized(LatticeSpec.uniform(case.m1, case.m2))
            except LatticeError as e:
                return CaseResult(
                    panel=case.panel,
                    m1=case.m1,
                    m2=case.m2,
                    expected_gap=case.expected_gap,
                    classified_gap=None,
                    roots=[],
                    root_gaps=[],
                    threshold=None,
                    agrees=False,
                    error=str(e),
                )
            roots = [mode.omega for mode in scan.modes]
            root_gaps = [_gap_name(case.m1, omega) for omega in roots]
            classified = report.occupied_gap()
            found = root_gaps[0] if len(root_gaps) == 1 else None
            agrees = (
                classified == case.expected_gap
                and len(roots) == report.total_modes
                and found == classified
                and not scan.rejected
            )
            return CaseResult(
                panel=case.panel,
                m1=case.m1,
                m2=case.m2,
                expected_gap=case.expected_gap,
                classified_gap=classified,
                roots=roots,
                root_gaps=root_gaps,
                threshold=report.threshold,
                agrees=agrees,
            )

    def run_full_evaluation(self) -> EvaluationReport:
        with logfire.span("run_full_evaluation", cases=len(self.cases)):
            results = [self.evaluate_case(case) for case in self.cases]

        by_regime: dict[str, list[CaseResult]] = defaultdict(list)
        for case, result in zip(self.cases, results, strict=True):
            for tag in case.tags or ["untagged"]:
                by_regime[tag].append(result)
        results_by_regime = {
            regime: {"cases": float(len(items)), "agreement": sum(r.agrees for r in items) / len(items)}
            for regime, items in sorted(by_regime.items())
        }
        problems = [
            f"panel {r.panel} (m1={r.m1}, m2={r.m2}): "
            + (r.error or f"expected {r.expected_gap}, classified {r.classified_gap}, roots in {r.root_gaps}")
            for r in results
            if not r.agrees
        ]
        passed = sum(r.agrees for r in results)
        report = EvaluationReport(
            total_cases=len(results),
            passed=passed,
            failed=len(results) - passed,
            agreement=passed / len(results) if results else 0.0,
            mean_root_count=statistics.mean(len(r.roots) for r in results) if results else 0.0,
            results=results,
            results_by_regime=results_by_regime,
            problem_areas=problems,
        )
        logfire.info("evaluation complete", passed=passed, failed=report.failed)
        return report


