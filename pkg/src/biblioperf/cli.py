"""Command-line pipeline: validate, synthesize, score, analyze, report.

Every subcommand recomputes from the corpus files, so invocations are
independent and each emitted file is a pure function of (inputs,
flags).  Report rows are sorted by key and floats use shortest-repr
formatting, which keeps repeated runs byte-identical; ``run`` writes a
manifest of sha256 digests so that can be checked cheaply.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import re
import sys
from dataclasses import dataclass
from pathlib import Path

from . import concentration as conc
from . import corpus as corpus_mod
from . import counterfactual as cf
from . import dispersion as disp
from . import scoring
from .corpus import Corpus, CorpusValidationError, filter_min_staff, load_corpus
from .scoring import ScoreTable, fmt
from .synth import SynthConfig, generate

OUT_ENV_VAR = "BIBLIOPERF_OUT"
NA = "NA"

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2
EXIT_DEGENERATE = 3


class DegenerateAnalysisError(Exception):
    """An analysis stage had no non-degenerate population to work on."""


class PipelineStageError(Exception):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"[{stage}] {cause}")
        self.cause = cause


def _sanitize(token: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]", "-", token)


def _optfmt(x) -> str:
    return NA if x is None else fmt(x)


def _write_csv(path: Path, header, rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return path


def _indicators(selection: str) -> list[str]:
    if selection == "both":
        return ["P", "SS"]
    if selection in ("P", "SS"):
        return [selection]
    raise ValueError(f"indicator must be P, SS or both, got {selection!r}")


# ---------------------------------------------------------------------------
# Pipeline stages
# ---------------------------------------------------------------------------

@dataclass
class RunConfig:
    researchers: Path
    publications: Path
    links: Path
    scheme: Path
    out: Path
    active_threshold: float = 0.5
    min_staff: int = 5
    weights: str = "uniform"
    indicator: str = "both"
    permutations: int = 10_000
    seed: int = 0


def _load_filtered(cfg: RunConfig):
    corpus = load_corpus(cfg.researchers, cfg.publications, cfg.links, cfg.scheme)
    return corpus_mod.filter_active_sds(corpus, cfg.active_threshold)


def stage_scores(table: ScoreTable, outdir: Path) -> list[Path]:
    return scoring.write_score_tables(table, outdir)


def stage_concentration(table: ScoreTable, cfg: RunConfig, outdir: Path) -> tuple[list[Path], dict]:
    """Population summaries at each level, Lorenz points, dot-plot series.

    Returns the summaries keyed by (level, indicator) for reuse by the
    dispersion and report stages.
    """
    written = []
    summaries: dict[tuple[str, str], list[conc.ConcentrationSummary]] = {}
    for indicator in _indicators(cfg.indicator):
        for level in conc.LEVELS:
            rows = conc.concentration_report(table, level, indicator, cfg.min_staff)
            summaries[(level, indicator)] = rows
            written.append(
                _write_csv(
                    outdir / f"concentration_{level}_{indicator}.csv",
                    ["key", "n", "gini", "ratio_b40_t20", "class"],
                    [
                        (
                            s.label,
                            s.n,
                            _optfmt(s.gini),
                            _optfmt(s.bottom40_top20_ratio),
                            s.inequality_class or NA,
                        )
                        for s in rows
                    ],
                )
            )
        for s in summaries[("national_sds", indicator)]:
            if s.lorenz is None:
                continue
            written.append(
                _write_csv(
                    outdir / f"lorenz_{_sanitize(s.label)}_{indicator}.csv",
                    ["pop_frac", "score_frac"],
                    [(fmt(x), fmt(y)) for x, y in s.lorenz],
                )
            )
        by_sds: dict[str, list] = {}
        for s in summaries[("university_sds", indicator)]:
            university_id, sds_id = s.key
            by_sds.setdefault(sds_id, []).append((university_id, s.gini))
        for sds_id, pairs in sorted(by_sds.items()):
            written.append(
                _write_csv(
                    outdir / f"dotplot_university_gini_{_sanitize(sds_id)}_{indicator}.csv",
                    ["key", "value"],
                    [(u, _optfmt(g)) for u, g in sorted(pairs)],
                )
            )
    return written, summaries


def stage_dispersion(table: ScoreTable, cfg: RunConfig, outdir: Path, summaries: dict) -> list[Path]:
    written = []
    indicators = _indicators(cfg.indicator)

    for uda_id in table.scheme.uda_ids:
        for indicator in indicators:
            report = disp.variability_report(table, uda_id, indicator, cfg.min_staff)
            if not report.cv_within:
                continue
            rows = [(u, _optfmt(v)) for u, v in sorted(report.cv_within.items())]
            rows.append(("__between__", _optfmt(report.cv_between)))
            written.append(
                _write_csv(
                    outdir / f"variability_{_sanitize(uda_id)}_{indicator}.csv",
                    ["university_id", "cv_within_pct"],
                    rows,
                )
            )

    uda_summaries = {ind: summaries[("uda", ind)] for ind in indicators}
    corr = disp.correlation_report(table, uda_summaries)
    written.append(
        _write_csv(
            outdir / "correlation.csv",
            ["uda_id", "indicator", "rho", "p"],
            [(r.uda_id, r.indicator, _optfmt(r.rho), _optfmt(r.p_value)) for r in corr],
        )
    )

    tb = disp.top_bottom_report(table, uda_summaries)
    written.append(
        _write_csv(
            outdir / "top_bottom.csv",
            ["uda_id", "indicator", "group_size", "top_mean_gini", "bottom_mean_gini"],
            [
                (r.uda_id, r.indicator, r.group_size, fmt(r.top_mean_gini), fmt(r.bottom_mean_gini))
                for r in tb
            ],
        )
    )

    groups = disp.decile_groups(table, uda_summaries)
    npc_results = {}
    for indicator in indicators:
        strata = groups.get(indicator, {})
        if strata:
            npc_results[indicator] = disp.npc_test(strata, cfg.permutations, cfg.seed)
    if not npc_results:
        raise DegenerateAnalysisError(
            "no area allowed a top/bottom split; permutation test impossible"
        )
    all_udas = sorted({u for r in npc_results.values() for u in r.per_stratum_p})
    rows = []
    for uda_id in all_udas:
        rows.append(
            (
                uda_id,
                _optfmt(npc_results.get("P") and npc_results["P"].per_stratum_p.get(uda_id)),
                _optfmt(npc_results.get("SS") and npc_results["SS"].per_stratum_p.get(uda_id)),
            )
        )
    rows.append(
        (
            "__combined__",
            _optfmt(npc_results["P"].combined_p if "P" in npc_results else None),
            _optfmt(npc_results["SS"].combined_p if "SS" in npc_results else None),
        )
    )
    written.append(_write_csv(outdir / "npc.csv", ["uda_id", "p_P", "p_SS"], rows))
    return written


def stage_counterfactual(
    corpus: Corpus, table: ScoreTable, cfg: RunConfig, outdir: Path, summaries: dict
) -> list[Path]:
    """Reallocation scenario and divergence table per sector and indicator."""
    written = []
    for indicator in _indicators(cfg.indicator):
        values = table.researcher_values(indicator)
        observed: dict[str, dict[str, float]] = {}
        for s in summaries[("university_sds", indicator)]:
            if s.gini is None:
                continue
            university_id, sds_id = s.key
            observed.setdefault(sds_id, {})[university_id] = s.gini

        for sds_id, members in corpus.sds_members().items():
            qualifying = filter_min_staff(corpus, sds_id, cfg.min_staff)
            if len(qualifying) < 2:
                continue
            scores = [
                values[r.researcher_id]
                for r in members
                if r.university_id in qualifying
            ]
            if len(scores) < 2 * len(qualifying):
                continue
            scenario = cf.build_scenario(scores, k=len(qualifying), sds_id=sds_id)
            tag = f"{_sanitize(sds_id)}_{indicator}"
            written.append(
                _write_csv(
                    outdir / f"scenario_{tag}.csv",
                    ["group_index", "size", "gini"],
                    [
                        (g, len(scenario.groups[g]), _optfmt(scenario.per_group_gini[g]))
                        for g in range(scenario.k)
                    ],
                )
            )
            sds_observed = observed.get(sds_id, {})
            if not sds_observed:
                continue
            rows = cf.divergence_report(scenario, sds_observed)
            written.append(
                _write_csv(
                    outdir / f"divergence_{tag}.csv",
                    ["university_id", "observed_gini", "reference", "divergence"],
                    [
                        (r.university_id, fmt(r.observed_gini), fmt(r.reference), fmt(r.divergence))
                        for r in rows
                    ],
                )
            )
    return written


def stage_report(table: ScoreTable, cfg: RunConfig, outdir: Path, summaries: dict) -> list[Path]:
    """Corpus overview plus per-area descriptive rollups of the Ginis."""
    written = []
    per_uda: dict[str, tuple[set, set, int]] = {}
    for _, (university_id, sds_id, uda_id) in sorted(table.membership.items()):
        sdss, universities, staff = per_uda.setdefault(uda_id, (set(), set(), 0))
        sdss.add(sds_id)
        universities.add(university_id)
        per_uda[uda_id] = (sdss, universities, staff + 1)
    rows = [
        (uda_id, len(sdss), len(universities), staff)
        for uda_id, (sdss, universities, staff) in sorted(per_uda.items())
    ]
    rows.append(
        (
            "__total__",
            sum(r[1] for r in rows),
            len({u for _, (_, universities, _) in per_uda.items() for u in universities}),
            sum(r[3] for r in rows),
        )
    )
    written.append(
        _write_csv(
            outdir / "corpus_summary.csv",
            ["uda_id", "n_sds", "n_universities", "staff"],
            rows,
        )
    )

    for (level, indicator), summary_rows in sorted(summaries.items()):
        stats = conc.uda_descriptive_stats(summary_rows)
        written.append(
            _write_csv(
                outdir / f"concentration_stats_{level}_{indicator}.csv",
                ["uda_id", "populations", "weighted_mean_gini", "min", "max", "median", "std"],
                [
                    (
                        s.uda_id,
                        s.populations,
                        _optfmt(s.weighted_mean_gini),
                        _optfmt(s.min),
                        _optfmt(s.max),
                        _optfmt(s.median),
                        _optfmt(s.std),
                    )
                    for s in stats
                ],
            )
        )
    return written


def _stage(name: str, fn, *args):
    try:
        return fn(*args)
    except PipelineStageError:
        raise
    except Exception as exc:
        raise PipelineStageError(name, exc) from exc


def run_pipeline(cfg: RunConfig) -> dict:
    """Execute every stage and return the written manifest."""
    corpus, dropped = _stage("load", _load_filtered, cfg)
    outdir = Path(cfg.out)
    written: list[Path] = []

    written.append(
        _write_csv(
            outdir / "filter_report.csv",
            ["sds_id", "members", "active_members", "active_fraction"],
            [(d.sds_id, d.members, d.active_members, fmt(d.active_fraction)) for d in dropped],
        )
    )
    table = _stage("scoring", scoring.compute_scores, corpus, cfg.weights)
    written.extend(_stage("scoring", stage_scores, table, outdir))
    conc_files, summaries = _stage("concentration", stage_concentration, table, cfg, outdir)
    written.extend(conc_files)
    written.extend(_stage("dispersion", stage_dispersion, table, cfg, outdir, summaries))
    written.extend(_stage("counterfactual", stage_counterfactual, corpus, table, cfg, outdir, summaries))
    written.extend(_stage("report", stage_report, table, cfg, outdir, summaries))

    manifest = {
        "config": {
            "active_threshold": cfg.active_threshold,
            "min_staff": cfg.min_staff,
            "weights": cfg.weights,
            "indicator": cfg.indicator,
            "permutations": cfg.permutations,
            "seed": cfg.seed,
        },
        "inputs": {
            Path(p).name: _digest(Path(p))
            for p in (cfg.researchers, cfg.publications, cfg.links, cfg.scheme)
        },
        "files": {p.name: _digest(p) for p in sorted(set(written))},
    }
    (outdir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return manifest


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


# ---------------------------------------------------------------------------
# Argument parsing and dispatch
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    corpus_args = argparse.ArgumentParser(add_help=False)
    corpus_args.add_argument("--researchers", required=True, type=Path)
    corpus_args.add_argument("--publications", required=True, type=Path)
    corpus_args.add_argument("--links", required=True, type=Path)
    corpus_args.add_argument("--scheme", required=True, type=Path)

    analysis_args = argparse.ArgumentParser(add_help=False)
    analysis_args.add_argument(
        "--out",
        type=Path,
        default=Path(os.environ.get(OUT_ENV_VAR, "biblioperf_out")),
        help=f"output directory (default: ${OUT_ENV_VAR} or ./biblioperf_out)",
    )
    analysis_args.add_argument("--active-threshold", type=float, default=0.5)
    analysis_args.add_argument("--min-staff", type=int, default=5)
    analysis_args.add_argument("--weights", choices=scoring.WEIGHT_SCHEMES, default="uniform")
    analysis_args.add_argument("--indicator", choices=["P", "SS", "both"], default="both")
    analysis_args.add_argument("--permutations", type=int, default=10_000)
    analysis_args.add_argument("--seed", type=int, default=0)

    parser = argparse.ArgumentParser(
        prog="biblioperf",
        description="Research performance indicators and their concentration/dispersion",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("validate", parents=[corpus_args], help="load and validate input files")

    synth_p = sub.add_parser("synth", parents=[analysis_args], help="generate a synthetic corpus")
    synth_p.add_argument("--config", type=Path, help="JSON file of generator settings")
    synth_p.add_argument("--universities", type=int)
    synth_p.add_argument("--sds", type=int)
    synth_p.add_argument("--uda", type=int)
    synth_p.add_argument("--cell-min", type=int)
    synth_p.add_argument("--cell-max", type=int)
    synth_p.add_argument("--skew", type=float)
    synth_p.add_argument("--sorting-strength", type=float)
    synth_p.add_argument("--citation-dispersion", type=float)
    synth_p.add_argument("--window-start", type=int)
    synth_p.add_argument("--window-end", type=int)

    for name, help_text in [
        ("score", "compute and write the score tables"),
        ("concentration", "inequality summaries per population level"),
        ("dispersion", "variability, correlation and permutation test"),
        ("counterfactual", "sorted-reallocation scenarios per sector"),
        ("run", "full pipeline with manifest"),
        ("report", "descriptive-statistics rollups"),
    ]:
        sub.add_parser(name, parents=[corpus_args, analysis_args], help=help_text)
    return parser


def _run_config(args) -> RunConfig:
    return RunConfig(
        researchers=args.researchers,
        publications=args.publications,
        links=args.links,
        scheme=args.scheme,
        out=args.out,
        active_threshold=args.active_threshold,
        min_staff=args.min_staff,
        weights=args.weights,
        indicator=args.indicator,
        permutations=args.permutations,
        seed=args.seed,
    )


def _cmd_validate(args) -> int:
    corpus = load_corpus(args.researchers, args.publications, args.links, args.scheme)
    print(
        f"ok: {len(corpus.researchers)} researchers, "
        f"{len(corpus.publications)} publications, "
        f"{len(corpus.scheme.sds_to_uda)} sectors in scheme"
    )
    return EXIT_OK


def _cmd_synth(args) -> int:
    settings = {}
    if args.config:
        settings.update(json.loads(Path(args.config).read_text(encoding="utf-8")))
    flag_map = {
        "seed": args.seed,
        "n_universities": args.universities,
        "n_sds": args.sds,
        "n_uda": args.uda,
        "skew": args.skew,
        "sorting_strength": args.sorting_strength,
        "citation_dispersion": args.citation_dispersion,
    }
    for key, value in flag_map.items():
        if value is not None:
            settings[key] = value
    cell = list(SynthConfig().researchers_per_cell)
    if "researchers_per_cell" in settings:
        cell = list(settings["researchers_per_cell"])
    if args.cell_min is not None:
        cell[0] = args.cell_min
    if args.cell_max is not None:
        cell[1] = args.cell_max
    settings["researchers_per_cell"] = tuple(cell)
    window = list(SynthConfig().window)
    if "window" in settings:
        window = list(settings["window"])
    if args.window_start is not None:
        window[0] = args.window_start
    if args.window_end is not None:
        window[1] = args.window_end
    settings["window"] = tuple(window)

    config = SynthConfig.from_mapping(settings)
    corpus = generate(config)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    corpus_mod.write_corpus(
        corpus,
        outdir / "researchers.csv",
        outdir / "publications.csv",
        outdir / "author_links.csv",
        outdir / "scheme.json",
    )
    print(
        f"wrote corpus of {len(corpus.researchers)} researchers / "
        f"{len(corpus.publications)} publications to {outdir}"
    )
    return EXIT_OK


def _cmd_partial(args, stages: set[str]) -> int:
    cfg = _run_config(args)
    corpus, _ = _stage("load", _load_filtered, cfg)
    outdir = Path(cfg.out)
    table = _stage("scoring", scoring.compute_scores, corpus, cfg.weights)
    if "score" in stages:
        _stage("scoring", stage_scores, table, outdir)
    needs_summaries = stages & {"concentration", "dispersion", "counterfactual", "report"}
    if needs_summaries:
        conc_files, summaries = _stage("concentration", stage_concentration, table, cfg, outdir)
        if "concentration" not in stages:
            for p in conc_files:  # summaries were only needed in memory
                p.unlink()
        if "dispersion" in stages:
            _stage("dispersion", stage_dispersion, table, cfg, outdir, summaries)
        if "counterfactual" in stages:
            _stage("counterfactual", stage_counterfactual, corpus, table, cfg, outdir, summaries)
        if "report" in stages:
            _stage("report", stage_report, table, cfg, outdir, summaries)
    return EXIT_OK


def _cmd_run(args) -> int:
    manifest = run_pipeline(_run_config(args))
    print(f"wrote {len(manifest['files'])} files to {args.out}")
    return EXIT_OK


def _exit_code(exc: Exception) -> int:
    if isinstance(exc, PipelineStageError):
        exc = exc.cause
    if isinstance(exc, OSError):
        return EXIT_IO
    if isinstance(exc, DegenerateAnalysisError):
        return EXIT_DEGENERATE
    if isinstance(exc, (CorpusValidationError, ValueError, KeyError)):
        return EXIT_VALIDATION
    raise exc


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "validate":
            return _cmd_validate(args)
        if args.command == "synth":
            return _cmd_synth(args)
        if args.command == "run":
            return _cmd_run(args)
        stage_sets = {
            "score": {"score"},
            "concentration": {"concentration"},
            "dispersion": {"dispersion"},
            "counterfactual": {"counterfactual"},
            "report": {"report"},
        }
        return _cmd_partial(args, stage_sets[args.command])
    except Exception as exc:  # mapped to documented exit codes
        code = _exit_code(exc)
        print(f"error: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
