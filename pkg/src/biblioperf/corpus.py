"""Data model, input file parsing, and population filters.

A corpus couples three kinds of records: researchers (with their
institution, field sector and staff-years), publications (with year,
subject category, citation snapshot and co-author count), and the
author links that attribute each publication to the researchers who
produced it.  Everything downstream (scoring, concentration,
dispersion) consumes a validated, immutable Corpus.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

WEIGHT_SUM_TOL = 1e-9


class CorpusValidationError(Exception):
    """Malformed input row or broken cross-reference in corpus files."""


@dataclass(frozen=True)
class ResearcherRecord:
    researcher_id: str
    university_id: str
    sds_id: str
    staff_years: float


@dataclass(frozen=True)
class AuthorLink:
    researcher_id: str
    weight: float


@dataclass(frozen=True)
class PublicationRecord:
    publication_id: str
    year: int
    subject_category: str
    citation_count: int
    total_coauthors: int
    author_links: tuple[AuthorLink, ...]


@dataclass(frozen=True)
class ClassificationScheme:
    """Sector-to-area hierarchy plus the subject-category vocabulary."""

    sds_to_uda: dict[str, str]
    subject_categories: frozenset[str]
    window: tuple[int, int]

    def uda_of(self, sds_id: str) -> str:
        return self.sds_to_uda[sds_id]

    @property
    def window_years(self) -> int:
        return self.window[1] - self.window[0] + 1

    @property
    def uda_ids(self) -> list[str]:
        return sorted(set(self.sds_to_uda.values()))


@dataclass
class Corpus:
    """Validated set of researchers and attributed publications.

    Records are stored sorted by id so that identical inputs always
    produce an identical in-memory corpus; treat instances as
    immutable after construction.
    """

    researchers: tuple[ResearcherRecord, ...]
    publications: tuple[PublicationRecord, ...]
    scheme: ClassificationScheme
    researchers_by_id: dict[str, ResearcherRecord] = field(init=False, repr=False)

    def __post_init__(self):
        self.researchers_by_id = {r.researcher_id: r for r in self.researchers}

    def sds_members(self) -> dict[str, list[ResearcherRecord]]:
        """Researchers grouped by sector, sector ids sorted."""
        groups: dict[str, list[ResearcherRecord]] = {}
        for r in self.researchers:
            groups.setdefault(r.sds_id, []).append(r)
        return dict(sorted(groups.items()))

    def attributed_researcher_ids(self) -> set[str]:
        """Ids of researchers carrying at least one author link."""
        out: set[str] = set()
        for pub in self.publications:
            for link in pub.author_links:
                out.add(link.researcher_id)
        return out


def build_corpus(researchers, publications, scheme) -> Corpus:
    """Normalize record order, run all cross-checks, return a Corpus."""
    researchers = tuple(sorted(researchers, key=lambda r: r.researcher_id))
    publications = tuple(
        sorted(
            (
                PublicationRecord(
                    p.publication_id,
                    p.year,
                    p.subject_category,
                    p.citation_count,
                    p.total_coauthors,
                    tuple(sorted(p.author_links, key=lambda l: l.researcher_id)),
                )
                for p in publications
            ),
            key=lambda p: p.publication_id,
        )
    )
    corpus = Corpus(researchers, publications, scheme)
    validate_corpus(corpus)
    return corpus


def validate_corpus(corpus: Corpus) -> None:
    """Raise CorpusValidationError on any invariant violation."""
    scheme = corpus.scheme
    start, end = scheme.window
    if start > end:
        raise CorpusValidationError(f"window start {start} after end {end}")

    seen_r: set[str] = set()
    for r in corpus.researchers:
        if r.researcher_id in seen_r:
            raise CorpusValidationError(f"duplicate researcher_id {r.researcher_id!r}")
        seen_r.add(r.researcher_id)
        if not (0 < r.staff_years <= scheme.window_years):
            raise CorpusValidationError(
                f"researcher {r.researcher_id!r}: staff_years {r.staff_years} "
                f"outside (0, {scheme.window_years}]"
            )
        if r.sds_id not in scheme.sds_to_uda:
            raise CorpusValidationError(
                f"researcher {r.researcher_id!r}: unknown sds_id {r.sds_id!r}"
            )

    seen_p: set[str] = set()
    for pub in corpus.publications:
        pid = pub.publication_id
        if pid in seen_p:
            raise CorpusValidationError(f"duplicate publication_id {pid!r}")
        seen_p.add(pid)
        if not (start <= pub.year <= end):
            raise CorpusValidationError(
                f"publication {pid!r}: year {pub.year} outside window {start}-{end}"
            )
        if pub.subject_category not in scheme.subject_categories:
            raise CorpusValidationError(
                f"publication {pid!r}: unknown subject_category {pub.subject_category!r}"
            )
        if pub.citation_count < 0:
            raise CorpusValidationError(f"publication {pid!r}: negative citation_count")
        if pub.total_coauthors < 1:
            raise CorpusValidationError(f"publication {pid!r}: total_coauthors < 1")
        if len(pub.author_links) > pub.total_coauthors:
            raise CorpusValidationError(
                f"publication {pid!r}: {len(pub.author_links)} author links exceed "
                f"total_coauthors {pub.total_coauthors}"
            )
        linked: set[str] = set()
        weight_sum = 0.0
        for link in pub.author_links:
            if link.researcher_id in linked:
                raise CorpusValidationError(
                    f"publication {pid!r}: duplicate link to {link.researcher_id!r}"
                )
            linked.add(link.researcher_id)
            if link.researcher_id not in corpus.researchers_by_id:
                raise CorpusValidationError(
                    f"publication {pid!r}: dangling researcher_id {link.researcher_id!r}"
                )
            if not (0 < link.weight <= 1):
                raise CorpusValidationError(
                    f"publication {pid!r}: link weight {link.weight} outside (0, 1]"
                )
            weight_sum += link.weight
        if weight_sum > 1 + WEIGHT_SUM_TOL:
            raise CorpusValidationError(
                f"publication {pid!r}: author link weights sum to {weight_sum} > 1"
            )


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------

RESEARCHERS_HEADER = ["researcher_id", "university_id", "sds_id", "staff_years"]
PUBLICATIONS_HEADER = [
    "publication_id",
    "year",
    "subject_category",
    "citation_count",
    "total_coauthors",
]
LINKS_HEADER = ["publication_id", "researcher_id", "weight"]


def _read_rows(path, expected_header):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise exc
    reader = csv.reader(text.splitlines())
    rows = list(reader)
    if not rows or rows[0] != expected_header:
        raise CorpusValidationError(
            f"{path.name}:1: expected header {','.join(expected_header)}"
        )
    return path.name, rows[1:]


def _parse_field(fname, lineno, field_name, raw, kind):
    try:
        if kind is int:
            return int(raw)
        return float(raw)
    except ValueError:
        raise CorpusValidationError(
            f"{fname}:{lineno}: {field_name}: cannot parse {raw!r}"
        ) from None


def load_scheme(path) -> ClassificationScheme:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CorpusValidationError(f"{path.name}: invalid JSON: {exc}") from None
    for key in ("sds_to_uda", "subject_categories", "window"):
        if key not in data:
            raise CorpusValidationError(f"{path.name}: missing key {key!r}")
    window = data["window"]
    if len(window) != 2 or not all(isinstance(y, int) for y in window):
        raise CorpusValidationError(f"{path.name}: window must be two integers")
    if window[0] > window[1]:
        raise CorpusValidationError(f"{path.name}: window start after end")
    return ClassificationScheme(
        sds_to_uda=dict(data["sds_to_uda"]),
        subject_categories=frozenset(data["subject_categories"]),
        window=(window[0], window[1]),
    )


def load_corpus(researchers_path, publications_path, links_path, scheme_path) -> Corpus:
    """Parse the four input files and return a validated Corpus.

    Row-level problems report file, line and field; cross-reference
    problems (dangling researcher ids, years outside the observation
    window, unknown sectors or categories) name the offending token.
    """
    scheme = load_scheme(scheme_path)

    researchers = []
    fname, rows = _read_rows(researchers_path, RESEARCHERS_HEADER)
    for i, row in enumerate(rows, start=2):
        if len(row) != 4 or not all(row[:3]):
            raise CorpusValidationError(f"{fname}:{i}: expected 4 non-empty fields")
        staff_years = _parse_field(fname, i, "staff_years", row[3], float)
        researchers.append(ResearcherRecord(row[0], row[1], row[2], staff_years))

    pub_rows = {}
    fname, rows = _read_rows(publications_path, PUBLICATIONS_HEADER)
    for i, row in enumerate(rows, start=2):
        if len(row) != 5 or not all(row):
            raise CorpusValidationError(f"{fname}:{i}: expected 5 non-empty fields")
        year = _parse_field(fname, i, "year", row[1], int)
        citations = _parse_field(fname, i, "citation_count", row[3], int)
        coauthors = _parse_field(fname, i, "total_coauthors", row[4], int)
        if row[0] in pub_rows:
            raise CorpusValidationError(
                f"{fname}:{i}: duplicate publication_id {row[0]!r}"
            )
        pub_rows[row[0]] = (year, row[2], citations, coauthors)

    links_by_pub: dict[str, list[AuthorLink]] = {pid: [] for pid in pub_rows}
    fname, rows = _read_rows(links_path, LINKS_HEADER)
    for i, row in enumerate(rows, start=2):
        if len(row) != 3 or not all(row):
            raise CorpusValidationError(f"{fname}:{i}: expected 3 non-empty fields")
        if row[0] not in pub_rows:
            raise CorpusValidationError(
                f"{fname}:{i}: link references unknown publication_id {row[0]!r}"
            )
        weight = _parse_field(fname, i, "weight", row[2], float)
        links_by_pub[row[0]].append(AuthorLink(row[1], weight))

    publications = [
        PublicationRecord(pid, year, cat, cit, coauth, tuple(links_by_pub[pid]))
        for pid, (year, cat, cit, coauth) in pub_rows.items()
    ]
    return build_corpus(researchers, publications, scheme)


def write_corpus(corpus: Corpus, researchers_path, publications_path, links_path, scheme_path) -> None:
    """Serialize a corpus back to the four-file input format.

    Floats use shortest round-trip repr, so load -> write -> load is
    the identity.
    """

    def _write(path, header, rows):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)

    _write(
        researchers_path,
        RESEARCHERS_HEADER,
        [
            (r.researcher_id, r.university_id, r.sds_id, repr(r.staff_years))
            for r in corpus.researchers
        ],
    )
    _write(
        publications_path,
        PUBLICATIONS_HEADER,
        [
            (p.publication_id, p.year, p.subject_category, p.citation_count, p.total_coauthors)
            for p in corpus.publications
        ],
    )
    _write(
        links_path,
        LINKS_HEADER,
        [
            (p.publication_id, l.researcher_id, repr(l.weight))
            for p in corpus.publications
            for l in p.author_links
        ],
    )
    scheme = corpus.scheme
    payload = {
        "sds_to_uda": dict(sorted(scheme.sds_to_uda.items())),
        "subject_categories": sorted(scheme.subject_categories),
        "window": list(scheme.window),
    }
    Path(scheme_path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Population filters
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DroppedSds:
    sds_id: str
    members: int
    active_members: int
    active_fraction: float


def filter_active_sds(corpus: Corpus, threshold: float = 0.5) -> tuple[Corpus, list[DroppedSds]]:
    """Keep only sectors where enough members produced at least one publication.

    A sector survives when the fraction of its member researchers
    holding one or more author links is >= threshold.  Researchers of
    dropped sectors are removed along with their author links;
    publications themselves are kept (they still inform the per-field
    citation baselines).  Idempotent; threshold 0 is the identity.
    """
    if not (0 <= threshold <= 1):
        raise ValueError(f"threshold {threshold} outside [0, 1]")
    attributed = corpus.attributed_researcher_ids()
    dropped: list[DroppedSds] = []
    dropped_ids: set[str] = set()
    for sds_id, members in corpus.sds_members().items():
        active = sum(1 for r in members if r.researcher_id in attributed)
        fraction = active / len(members)
        if fraction < threshold:
            dropped.append(DroppedSds(sds_id, len(members), active, fraction))
            dropped_ids.add(sds_id)
    if not dropped_ids:
        return corpus, dropped

    kept_researchers = [r for r in corpus.researchers if r.sds_id not in dropped_ids]
    kept_ids = {r.researcher_id for r in kept_researchers}
    publications = [
        PublicationRecord(
            p.publication_id,
            p.year,
            p.subject_category,
            p.citation_count,
            p.total_coauthors,
            tuple(l for l in p.author_links if l.researcher_id in kept_ids),
        )
        for p in corpus.publications
    ]
    return build_corpus(kept_researchers, publications, corpus.scheme), dropped


def filter_min_staff(corpus: Corpus, sds_id: str, min_staff: int = 5) -> set[str]:
    """Universities with at least min_staff researchers in the sector."""
    if min_staff < 1:
        raise ValueError("min_staff must be >= 1")
    if sds_id not in corpus.scheme.sds_to_uda:
        raise KeyError(f"unknown sds_id {sds_id!r}")
    counts: dict[str, int] = {}
    for r in corpus.researchers:
        if r.sds_id == sds_id:
            counts[r.university_id] = counts.get(r.university_id, 0) + 1
    return {u for u, n in counts.items() if n >= min_staff}
