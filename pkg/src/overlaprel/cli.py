"""Command-line interface: ``overlaprel <subcommand> ...``.

Exit codes: 0 success, 1 unreadable or malformed input, 2 grid mismatch,
3 degenerate input (empty pair under the ``error`` policy, zero jackknife
variance, too few studies), 64 bad command-line usage.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .composite import composite_difference
from .errors import DegenerateInputError, DimensionMismatchError, FormatError
from .outliers import DEFAULT_Q_LEVELS, jackknife_test
from .overlap import EMPTY_POLICIES, KINDS, overlap_matrix
from .report import (
    heatmap_svg,
    markdown_report,
    matrix_csv,
    outlier_csv,
    outlier_payload,
    overlap_payload,
    summary_to_dict,
    write_json,
)
from .spectral import summarize
from .synth import PLANT_MODES, SynthConfig, generate, generate_statmaps
from .volume import (
    Format,
    GridDims,
    StudySet,
    load_mask,
    load_statmap,
    save_mask,
    save_statmap,
    threshold_statmap,
)

log = logging.getLogger("overlaprel")

EXIT_OK = 0
EXIT_PARSE = 1
EXIT_DIMS = 2
EXIT_DEGENERATE = 3
EXIT_USAGE = 64

FORMATS = ("json", "csv", "svg")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# input handling ----------------------------------------------------------


def _read_manifest(path):
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"manifest is not valid JSON: {exc.msg}", path=path, offset=exc.pos) from None
    if not isinstance(data, dict):
        raise FormatError("manifest must be a JSON object", path=path)
    return path.parent, data


def _entries(base, data, key, path):
    items = data.get(key) or []
    out = []
    for i, item in enumerate(items):
        if not isinstance(item, dict) or "path" not in item:
            raise FormatError(f"{key}[{i}] needs a 'path'", path=path, field=f"{key}[{i}]")
        out.append((item.get("label"), base / item["path"], item.get("format")))
    return out


def _manifest_dims(data, path):
    dims = data.get("dims")
    if dims is None:
        return None
    try:
        return GridDims(*dims)
    except (TypeError, ValueError, OverflowError) as exc:
        raise FormatError(f"invalid dims: {exc}", path=path, field="dims") from None


def _load_studies(args) -> StudySet:
    if args.manifest:
        base, data = _read_manifest(args.manifest)
        entries = _entries(base, data, "masks", args.manifest)
    else:
        entries = [(None, Path(p), None) for p in args.inputs]
    if len(entries) < 2:
        raise UsageError("at least two masks are required")
    masks = [load_mask(p, fmt, label) for label, p, fmt in entries]
    return StudySet.from_masks(masks, [m.label for m in masks])


def _load_statmaps(args):
    dims = GridDims(*args.dims) if getattr(args, "dims", None) else None
    if args.manifest:
        base, data = _read_manifest(args.manifest)
        entries = _entries(base, data, "statmaps", args.manifest)
        dims = dims or _manifest_dims(data, args.manifest)
    else:
        entries = [(None, Path(p), None) for p in args.inputs]
    if not entries:
        raise UsageError("no statistic maps given")
    maps = [load_statmap(p, fmt, dims, label) for label, p, fmt in entries]
    for m in maps[1:]:
        if m.dims != maps[0].dims:
            raise DimensionMismatchError(f"map {m.label!r} is {m.dims}, expected {maps[0].dims}")
    return maps


def _formats(text: str) -> set:
    chosen = {f.strip().lower() for f in text.split(",") if f.strip()}
    unknown = chosen - set(FORMATS)
    if unknown:
        raise UsageError(f"unknown output format(s): {', '.join(sorted(unknown))}")
    return chosen


def _q_levels(values) -> tuple:
    levels = sorted(set(values or DEFAULT_Q_LEVELS), reverse=True)
    for q in levels:
        if not 0.0 < q < 1.0:
            raise UsageError(f"q levels must lie in (0, 1), got {q}")
    return tuple(levels)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(path: Path, text: str):
    path.write_text(text, encoding="utf-8")
    log.info("wrote %s", path)


# subcommands -------------------------------------------------------------


def cmd_overlap(args) -> int:
    formats = _formats(args.format)
    studies = _load_studies(args)
    jac = overlap_matrix(studies, "jaccard", args.empty_policy)
    dice = jac.as_kind("dice", args.empty_policy)
    out = _out_dir(args)
    if "json" in formats:
        write_json(overlap_payload(dice, jac, studies.dims), out / "overlap.json")
    for m in (dice, jac):
        if "csv" in formats:
            _write(out / f"{m.kind}.csv", matrix_csv(m))
        if "svg" in formats:
            _write(out / f"{m.kind}.svg", heatmap_svg(m))
    return EXIT_OK


def cmd_summarize(args) -> int:
    studies = _load_studies(args)
    kinds = KINDS if args.kind == "both" else (args.kind,)
    base = overlap_matrix(studies, "jaccard", args.empty_policy)
    summaries = [summary_to_dict(summarize(base.as_kind(k, args.empty_policy))) for k in kinds]
    payload = {"artifact": "summary", "labels": list(studies.labels), "summaries": summaries}
    write_json(payload, _out_dir(args) / "summary.json")
    return EXIT_OK


def _emit_outliers(report, out: Path, formats: set) -> dict:
    payload = outlier_payload(report)
    out.mkdir(parents=True, exist_ok=True)
    if "json" in formats:
        write_json(payload, out / "outliers.json")
    if "csv" in formats:
        _write(out / "outliers.csv", outlier_csv(report))
    if "svg" in formats:
        _write(out / f"{report.kind}.svg", heatmap_svg(report.matrix))
    return payload


def cmd_outliers(args) -> int:
    formats = _formats(args.format)
    q_levels = _q_levels(args.q)
    out = _out_dir(args)
    if not args.critical:
        studies = _load_studies(args)
        report = jackknife_test(studies, args.kind, q_levels, args.empty_policy)
        _emit_outliers(report, out, formats)
        return EXIT_OK

    # robustness sweep: re-threshold the same maps at each critical value
    maps = _load_statmaps(args)
    if len(maps) < 2:
        raise UsageError("at least two statistic maps are required")
    runs = []
    for c in args.critical:
        studies = StudySet.from_masks([threshold_statmap(m, c, args.side) for m in maps])
        report = jackknife_test(studies, args.kind, q_levels, args.empty_policy)
        payload = _emit_outliers(report, out / f"critical_{c:g}", formats)
        runs.append({"critical": float(c), "report": payload})
    labels = [m.label for m in maps]
    stable = {}
    for q in q_levels:
        key = format(q, "g")
        sets = [set(run["report"]["flagged"][key]) for run in runs]
        stable[key] = [lab for lab in labels if all(lab in s for s in sets)]
    identical = {
        format(q, "g"): all(run["report"]["flagged"][format(q, "g")] == runs[0]["report"]["flagged"][format(q, "g")]
                            for run in runs)
        for q in q_levels
    }
    sweep = {
        "artifact": "sweep",
        "side": args.side,
        "critical_values": [float(c) for c in args.critical],
        "q_levels": list(q_levels),
        "stable": stable,
        "identical": identical,
        "runs": runs,
    }
    if "json" in formats:
        write_json(sweep, out / "stability.json")
    if "csv" in formats:
        header = ["label"] + [f"c{c:g}_q{format(q, 'g')}" for c in args.critical for q in q_levels]
        header += [f"stable_q{format(q, 'g')}" for q in q_levels]
        rows = [",".join(header)]
        for lab in labels:
            row = [lab]
            for run in runs:
                row += [str(int(lab in run["report"]["flagged"][format(q, "g")])) for q in q_levels]
            row += [str(int(lab in stable[format(q, "g")])) for q in q_levels]
            rows.append(",".join(row))
        _write(out / "stability.csv", "\n".join(rows) + "\n")
    return EXIT_OK


def _resolve_indices(spec, labels) -> list:
    out = []
    for token in spec or []:
        for part in str(token).split(","):
            part = part.strip()
            if not part:
                continue
            if part in labels:
                out.append(labels.index(part))
            elif part.isdigit() and int(part) < len(labels):
                out.append(int(part))
            else:
                raise UsageError(f"unknown study {part!r}")
    return sorted(set(out))


def cmd_composite(args) -> int:
    maps = _load_statmaps(args)
    labels = [m.label for m in maps]
    exclude = _resolve_indices(args.exclude, labels)
    if len(exclude) >= len(maps):
        raise UsageError("cannot exclude every study")
    all_map, kept_map, all_mask, kept_mask, diff = composite_difference(maps, exclude, args.critical, args.side)
    out = _out_dir(args)
    suffix = ".nii" if args.map_format == "nifti1" else ".f32"
    save_statmap(all_map, out / f"composite_all{suffix}")
    save_statmap(kept_map, out / f"composite_kept{suffix}")
    save_mask(all_mask, out / "composite_all.msk", Format.MSK1)
    save_mask(kept_mask, out / "composite_kept.msk", Format.MSK1)
    save_mask(diff.gained, out / "diff.gained.msk", Format.MSK1)
    save_mask(diff.lost, out / "diff.lost.msk", Format.MSK1)
    d = all_map.dims
    write_json(
        {
            "artifact": "composite",
            "dims": [d.nx, d.ny, d.nz],
            "labels": labels,
            "excluded": [labels[i] for i in exclude],
            "critical": float(args.critical),
            "side": args.side,
            "active_all": all_mask.count(),
            "active_kept": kept_mask.count(),
            "gained": diff.gained.count(),
            "lost": diff.lost.count(),
        },
        out / "composite.json",
    )
    return EXIT_OK


def _parse_plant(text: str):
    try:
        j, mode = text.split(":")
        j = int(j)
    except ValueError:
        raise UsageError(f"plants are written INDEX:MODE, got {text!r}") from None
    if mode not in PLANT_MODES:
        raise UsageError(f"unknown plant mode {mode!r}")
    return (j, mode)


def cmd_simulate(args) -> int:
    try:
        config = SynthConfig(
            GridDims(*args.dims),
            args.M,
            args.core_rate,
            args.noise_rate,
            args.dropout,
            tuple(_parse_plant(p) for p in args.plant or ()),
            args.seed,
        )
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    out = _out_dir(args)
    studies = generate(config)
    manifest = {"artifact": "manifest", "dims": list(args.dims), "config": config.to_dict(), "masks": []}
    for m in studies:
        name = f"{m.label}.msk"
        save_mask(m, out / name, Format.MSK1)
        manifest["masks"].append({"label": m.label, "path": name, "format": "MSK1"})
    if args.statmaps:
        manifest["effect"] = float(args.effect)
        manifest["statmaps"] = []
        for smap in generate_statmaps(config, args.effect):
            name = f"{smap.label}.f32"
            save_statmap(smap, out / name, Format.F32RAW)
            manifest["statmaps"].append({"label": smap.label, "path": name, "format": "F32RAW"})
    write_json(manifest, out / "manifest.json")
    return EXIT_OK


def cmd_report(args) -> int:
    payloads = []
    for p in args.inputs:
        try:
            payloads.append(json.loads(Path(p).read_text(encoding="utf-8")))
        except json.JSONDecodeError as exc:
            raise FormatError(f"not valid JSON: {exc.msg}", path=p, offset=exc.pos) from None
    try:
        text = markdown_report(payloads)
    except (KeyError, ValueError) as exc:
        raise FormatError(f"unrecognised artifact: {exc}") from None
    if args.out == "-":
        sys.stdout.write(text)
    else:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        _write(out, text)
    return EXIT_OK


# parser ------------------------------------------------------------------


def _add_inputs(p, what="mask files"):
    p.add_argument("inputs", nargs="*", help=f"{what} (ignored when --manifest is given)")
    p.add_argument("--manifest", help="JSON manifest listing studies in order")


def _add_common(p, kinds=KINDS):
    p.add_argument("--kind", choices=kinds, default="jaccard")
    p.add_argument("--empty-policy", choices=EMPTY_POLICIES, default="error")
    p.add_argument("--out", default=".", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="overlaprel", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("overlap", help="pairwise Dice and Jaccard matrices")
    _add_inputs(p)
    p.add_argument("--empty-policy", choices=EMPTY_POLICIES, default="error")
    p.add_argument("--out", default=".")
    p.add_argument("--format", default="json,csv", help="comma list of json,csv,svg")
    p.set_defaults(func=cmd_overlap)

    p = sub.add_parser("summarize", help="summarized multiple overlap coefficient")
    _add_inputs(p)
    _add_common(p, KINDS + ("both",))
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("outliers", help="jackknife outlier test (optionally a threshold sweep)")
    _add_inputs(p, "mask files, or statistic maps with --critical")
    _add_common(p)
    p.add_argument("--q", type=float, action="append", help="FDR level; repeatable (default 0.05 and 0.01)")
    p.add_argument("--critical", type=float, nargs="+", help="threshold statistic maps at each value and rerun")
    p.add_argument("--side", choices=("greater", "less", "two-sided"), default="greater")
    p.add_argument("--dims", type=int, nargs=3, metavar=("NX", "NY", "NZ"), help="grid of F32RAW maps")
    p.add_argument("--format", default="json,csv", help="comma list of json,csv,svg")
    p.set_defaults(func=cmd_outliers)

    p = sub.add_parser("composite", help="mean statistic maps with and without excluded studies")
    _add_inputs(p, "statistic maps")
    p.add_argument("--dims", type=int, nargs=3, metavar=("NX", "NY", "NZ"), help="grid of F32RAW maps")
    p.add_argument("--exclude", action="append", help="labels or 0-based positions to leave out")
    p.add_argument("--critical", type=float, required=True)
    p.add_argument("--side", choices=("greater", "less", "two-sided"), default="greater")
    p.add_argument("--map-format", choices=("f32raw", "nifti1"), default="f32raw")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_composite)

    p = sub.add_parser("simulate", help="write a synthetic study set and manifest")
    p.add_argument("--dims", type=int, nargs=3, metavar=("NX", "NY", "NZ"), default=[32, 32, 8])
    p.add_argument("--M", type=int, default=12)
    p.add_argument("--core-rate", type=float, default=0.02)
    p.add_argument("--noise-rate", type=float, default=0.005)
    p.add_argument("--dropout", type=float, default=0.2)
    p.add_argument("--plant", action="append", help="INDEX:MODE with MODE in disjoint, shifted, empty")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--statmaps", action="store_true", help="also write t-like F32RAW maps")
    p.add_argument("--effect", type=float, default=5.0, help="signal added to statistic maps")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("report", help="merge JSON artifacts into a markdown summary")
    p.add_argument("inputs", nargs="+", help="JSON artifacts")
    p.add_argument("--out", default="-", help="markdown file, or - for stdout")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"overlaprel: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FormatError, OSError) as exc:
        print(f"overlaprel: cannot read input: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except DimensionMismatchError as exc:
        print(f"overlaprel: dimension mismatch: {exc}", file=sys.stderr)
        return EXIT_DIMS
    except DegenerateInputError as exc:
        print(f"overlaprel: degenerate input: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except ValueError as exc:
        # too few studies for the requested statistic, duplicate labels, ...
        print(f"overlaprel: invalid input: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE


if __name__ == "__main__":
    sys.exit(main())
