"""Performance indicators with field standardization and staff weighting.

Two indicators are computed throughout:

* ``p``  -- fractional publication count: each publication contributes
  its author share (1/co-authors under the uniform scheme, or the
  supplied per-link weight under the positional scheme).
* ``ss`` -- citation score: the same shares weighted by the
  publication's citations divided by the median citations of all
  corpus publications of the same year and subject category.

Researcher-level values are averaged over the researcher's
staff-years.  Institution-level values divide the summed shares of an
institution's members by its staff count in the sector, and roll up
to area/university level as staff-weighted averages of the
sector-standardized ratios.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import ClassificationScheme, Corpus

WEIGHT_SCHEMES = ("uniform", "positional")


@dataclass(frozen=True)
class CellStats:
    median_citations: float
    mean_citations: float
    publication_count: int


@dataclass
class CellMedianTable:
    """Per (year, subject category) citation baselines."""

    cells: dict[tuple[int, str], CellStats]

    def standardized(self, year: int, category: str, citations: int) -> float:
        """Citations divided by the cell baseline.

        Zero-median cells fall back to the cell mean; if the mean is
        also zero every value in the cell standardizes to 0.
        """
        try:
            cell = self.cells[(year, category)]
        except KeyError:
            raise KeyError(
                f"no citation baseline for cell ({year}, {category!r}); "
                "baselines must be built from the corpus being scored"
            ) from None
        denom = cell.median_citations if cell.median_citations > 0 else cell.mean_citations
        if denom == 0:
            return 0.0
        return citations / denom


def build_cell_medians(corpus: Corpus) -> CellMedianTable:
    """Median and mean citations for every (year, category) cell present."""
    by_cell: dict[tuple[int, str], list[int]] = {}
    for pub in corpus.publications:
        by_cell.setdefault((pub.year, pub.subject_category), []).append(pub.citation_count)
    cells = {
        key: CellStats(float(np.median(counts)), float(np.mean(counts)), len(counts))
        for key, counts in by_cell.items()
    }
    return CellMedianTable(cells)


@dataclass(frozen=True)
class ResearcherScore:
    researcher_id: str
    p: float
    ss: float


@dataclass(frozen=True)
class SdsScore:
    staff: int
    p: float
    ss: float
    p_norm: float
    ss_norm: float


@dataclass(frozen=True)
class AggregateScore:
    staff: int
    p: float
    ss: float


def _share(link_weight: float, total_coauthors: int, weight_scheme: str) -> float:
    if weight_scheme == "uniform":
        return 1.0 / total_coauthors
    return link_weight


def _check_scheme(weight_scheme: str) -> None:
    if weight_scheme not in WEIGHT_SCHEMES:
        raise ValueError(f"weight_scheme must be one of {WEIGHT_SCHEMES}")


def score_researchers(
    corpus: Corpus, medians: CellMedianTable, weight_scheme: str = "uniform"
) -> dict[str, ResearcherScore]:
    """Per-researcher indicators, averaged over staff-years.

    Researchers without any attributed publication get p = ss = 0.
    """
    _check_scheme(weight_scheme)
    p_raw = {r.researcher_id: 0.0 for r in corpus.researchers}
    ss_raw = {r.researcher_id: 0.0 for r in corpus.researchers}
    for pub in corpus.publications:
        std = medians.standardized(pub.year, pub.subject_category, pub.citation_count)
        for link in pub.author_links:
            share = _share(link.weight, pub.total_coauthors, weight_scheme)
            p_raw[link.researcher_id] += share
            ss_raw[link.researcher_id] += std * share
    return {
        r.researcher_id: ResearcherScore(
            r.researcher_id,
            p_raw[r.researcher_id] / r.staff_years,
            ss_raw[r.researcher_id] / r.staff_years,
        )
        for r in corpus.researchers
    }


def score_sds(
    corpus: Corpus, medians: CellMedianTable, weight_scheme: str = "uniform"
) -> tuple[dict[tuple[str, str], SdsScore], dict[str, tuple[float, float]]]:
    """Per (university, sector) indicators plus per-sector means.

    A university's sector value sums, over publications, the shares of
    the publication's authors belonging to that university and sector,
    divided by the university's staff count in the sector.  Sector
    means run over all universities with staff in the sector; the
    normalized columns divide by those means (0 when a mean is 0).
    """
    _check_scheme(weight_scheme)
    staff: dict[tuple[str, str], int] = {}
    for r in corpus.researchers:
        key = (r.university_id, r.sds_id)
        staff[key] = staff.get(key, 0) + 1

    p_sum = {key: 0.0 for key in staff}
    ss_sum = {key: 0.0 for key in staff}
    by_id = corpus.researchers_by_id
    for pub in corpus.publications:
        std = medians.standardized(pub.year, pub.subject_category, pub.citation_count)
        for link in pub.author_links:
            r = by_id[link.researcher_id]
            share = _share(link.weight, pub.total_coauthors, weight_scheme)
            key = (r.university_id, r.sds_id)
            p_sum[key] += share
            ss_sum[key] += std * share

    raw = {
        key: (p_sum[key] / n, ss_sum[key] / n) for key, n in staff.items()
    }

    by_sds: dict[str, list[tuple[float, float]]] = {}
    for (_, sds_id), values in raw.items():
        by_sds.setdefault(sds_id, []).append(values)
    sds_means = {
        sds_id: (
            sum(v[0] for v in vals) / len(vals),
            sum(v[1] for v in vals) / len(vals),
        )
        for sds_id, vals in sorted(by_sds.items())
    }

    sds_scores = {}
    for key in sorted(staff):
        p, ss = raw[key]
        p_mean, ss_mean = sds_means[key[1]]
        sds_scores[key] = SdsScore(
            staff=staff[key],
            p=p,
            ss=ss,
            p_norm=p / p_mean if p_mean > 0 else 0.0,
            ss_norm=ss / ss_mean if ss_mean > 0 else 0.0,
        )
    return sds_scores, sds_means


def _aggregate(groups: dict, sds_scores, sds_means) -> dict:
    """Staff-weighted mean of sector-standardized ratios per group.

    Sectors whose mean is 0 (nobody produced anything) contribute zero
    weight instead of a 0/0 ratio.
    """
    out = {}
    for group_key, cell_keys in sorted(groups.items()):
        total_staff = sum(sds_scores[k].staff for k in cell_keys)
        p_acc = 0.0
        ss_acc = 0.0
        for k in cell_keys:
            cell = sds_scores[k]
            p_mean, ss_mean = sds_means[k[1]]
            if p_mean > 0:
                p_acc += (cell.p / p_mean) * cell.staff
            if ss_mean > 0:
                ss_acc += (cell.ss / ss_mean) * cell.staff
        out[group_key] = AggregateScore(total_staff, p_acc / total_staff, ss_acc / total_staff)
    return out


def score_uda(
    sds_scores: dict[tuple[str, str], SdsScore],
    sds_means: dict[str, tuple[float, float]],
    scheme: ClassificationScheme,
) -> dict[tuple[str, str], AggregateScore]:
    """Per (university, area) roll-up over the area's sectors.

    Universities with no staff in any sector of an area are absent
    rather than reported as zero rows.
    """
    groups: dict[tuple[str, str], list] = {}
    for key in sds_scores:
        university_id, sds_id = key
        groups.setdefault((university_id, scheme.uda_of(sds_id)), []).append(key)
    return _aggregate(groups, sds_scores, sds_means)


def score_university(
    sds_scores: dict[tuple[str, str], SdsScore],
    sds_means: dict[str, tuple[float, float]],
) -> dict[str, AggregateScore]:
    """Whole-university roll-up over every sector the university is active in."""
    groups: dict[str, list] = {}
    for key in sds_scores:
        groups.setdefault(key[0], []).append(key)
    return _aggregate(groups, sds_scores, sds_means)


@dataclass
class ScoreTable:
    """All computed scores plus the membership map analyses need."""

    researcher_scores: dict[str, ResearcherScore]
    sds_scores: dict[tuple[str, str], SdsScore]
    sds_means: dict[str, tuple[float, float]]
    uda_scores: dict[tuple[str, str], AggregateScore]
    university_scores: dict[str, AggregateScore]
    membership: dict[str, tuple[str, str, str]]  # researcher -> (university, sds, uda)
    scheme: ClassificationScheme

    def researcher_values(self, indicator: str) -> dict[str, float]:
        attr = _indicator_attr(indicator)
        return {rid: getattr(s, attr) for rid, s in self.researcher_scores.items()}


def _indicator_attr(indicator: str) -> str:
    if indicator == "P":
        return "p"
    if indicator == "SS":
        return "ss"
    raise ValueError(f"indicator must be 'P' or 'SS', got {indicator!r}")


def compute_scores(corpus: Corpus, weight_scheme: str = "uniform") -> ScoreTable:
    """Run the full scoring chain on a validated corpus."""
    medians = build_cell_medians(corpus)
    researcher_scores = score_researchers(corpus, medians, weight_scheme)
    sds_scores, sds_means = score_sds(corpus, medians, weight_scheme)
    uda_scores = score_uda(sds_scores, sds_means, corpus.scheme)
    university_scores = score_university(sds_scores, sds_means)
    membership = {
        r.researcher_id: (r.university_id, r.sds_id, corpus.scheme.uda_of(r.sds_id))
        for r in corpus.researchers
    }
    return ScoreTable(
        researcher_scores,
        sds_scores,
        sds_means,
        uda_scores,
        university_scores,
        membership,
        corpus.scheme,
    )


# ---------------------------------------------------------------------------
# Emission
# ---------------------------------------------------------------------------

def fmt(x) -> str:
    """Deterministic shortest-repr float formatting for report files."""
    return repr(float(x))


def write_score_tables(table: ScoreTable, outdir) -> list[Path]:
    """Write the four score files, rows sorted by key."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []

    def _write(name, header, rows):
        path = outdir / name
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)
        written.append(path)

    _write(
        "researcher_scores.csv",
        ["researcher_id", "p", "ss"],
        [
            (rid, fmt(s.p), fmt(s.ss))
            for rid, s in sorted(table.researcher_scores.items())
        ],
    )
    _write(
        "sds_scores.csv",
        ["university_id", "sds_id", "staff", "p", "ss", "p_norm", "ss_norm"],
        [
            (u, s, c.staff, fmt(c.p), fmt(c.ss), fmt(c.p_norm), fmt(c.ss_norm))
            for (u, s), c in sorted(table.sds_scores.items())
        ],
    )
    _write(
        "uda_scores.csv",
        ["university_id", "uda_id", "staff", "p", "ss"],
        [
            (u, a, c.staff, fmt(c.p), fmt(c.ss))
            for (u, a), c in sorted(table.uda_scores.items())
        ],
    )
    _write(
        "university_scores.csv",
        ["university_id", "staff", "p", "ss"],
        [
            (u, c.staff, fmt(c.p), fmt(c.ss))
            for u, c in sorted(table.university_scores.items())
        ],
    )
    return written
