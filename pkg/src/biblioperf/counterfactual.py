"""Idealized reallocation of a sector's researchers into ranked groups.

The scenario sorts every researcher of a sector by descending score
and deals them into k hypothetical universities of (near) equal size:
group 0 takes the best performers, group k-1 the worst.  Within-group
inequality under this sorting is the natural lower benchmark for the
observed within-university inequality, and the divergence report
measures each real university's distance from it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .concentration import gini_adjusted


@dataclass
class ReallocationScenario:
    sds_id: str
    k: int
    groups: list[list[float]]            # descending assignment, sizes differ by <= 1
    per_group_gini: list[float | None]   # None marks a degenerate (all-zero) group
    observed_national_gini: float | None

    @property
    def reference_gini(self) -> float:
        """Mean per-group Gini over the non-degenerate groups."""
        defined = [g for g in self.per_group_gini if g is not None]
        if not defined:
            raise ValueError("all scenario groups are degenerate")
        return float(np.mean(defined))


def build_scenario(scores, k: int, sds_id: str = "") -> ReallocationScenario:
    """Sort scores descending and deal them into k near-equal groups.

    When n is not divisible by k the first n mod k groups take one
    extra member.  The sort is stable, so callers passing scores in
    researcher-id order get deterministic placement of ties.
    """
    scores = [float(s) for s in scores]
    n = len(scores)
    if k < 2:
        raise ValueError("k must be >= 2")
    if n < 2 * k:
        raise ValueError(f"need at least {2 * k} scores for k={k} groups, got {n}")
    if any(s < 0 for s in scores):
        raise ValueError("scores must be nonnegative")

    ordered = sorted(scores, reverse=True)  # stable: ties keep input order
    base, extra = divmod(n, k)
    groups: list[list[float]] = []
    start = 0
    for g in range(k):
        size = base + (1 if g < extra else 0)
        groups.append(ordered[start:start + size])
        start += size

    per_group_gini = [gini_adjusted(group) for group in groups]
    return ReallocationScenario(
        sds_id=sds_id,
        k=k,
        groups=groups,
        per_group_gini=per_group_gini,
        observed_national_gini=gini_adjusted(scores),
    )


@dataclass(frozen=True)
class DivergenceRow:
    university_id: str
    observed_gini: float
    reference: float
    divergence: float


def divergence_report(
    scenario: ReallocationScenario, observed_ginis: dict[str, float]
) -> list[DivergenceRow]:
    """Observed minus scenario-reference Gini per university, worst first."""
    reference = scenario.reference_gini
    rows = [
        DivergenceRow(u, g, reference, g - reference)
        for u, g in observed_ginis.items()
    ]
    rows.sort(key=lambda r: (-r.divergence, r.university_id))
    return rows
