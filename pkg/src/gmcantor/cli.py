"""``gmcantor`` command line.

Exit codes: 0 success, 1 certification or validation failure, 2 usage or
contract error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

from .embedding import CHECKED, STRICT, atlas_from_json, atlas_summary, atlas_to_json, build_atlas
from .errors import CertificationError, DepthError, DomainError, GMError, SearchFailure, UnsupportedOperation
from .exact import ExactScalar
from .extension import build_extension, extension_to_json, verify_extension
from .gmtower import (
    build_tower_from_words,
    growth_check,
    odometer_tower,
    random_simple_tower,
    tower_from_json,
    tower_to_json,
    validate_gm,
)
from .verify import (
    conjugacy_check,
    disjointness_check,
    exhaustive_level_maxima,
    lrs_sample_check,
    per_level_maxima,
    quotient_sweep,
    theoretical_bound,
    w_membership_check,
)

OK, FAILED, USAGE = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    action: str
    inputs: tuple = ()
    out: str | None = None
    depth: int | None = None
    mode: str = STRICT
    seed: int = 0
    samples: int = 1000
    horizon: int = 100_000
    n_levels: int = 3

    def __post_init__(self) -> None:
        for name in ("samples", "horizon", "n_levels"):
            if getattr(self, name) < 1:
                raise UsageError(f"--{name.replace('_', '-')} must be positive")
        if self.depth is not None and self.depth < 1:
            raise UsageError("--depth must be positive")
        if self.mode not in (STRICT, CHECKED):
            raise UsageError(f"unknown mode {self.mode!r}")


def _dump(data: dict) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":")) + "\n"


def _write(path: str | None, data: dict) -> None:
    text = _dump(data)
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _read_json(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DomainError(f"{path} is not valid JSON: {exc}") from exc


def _ints(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from exc


def _load_atlas(path: str):
    data = _read_json(path)
    if "tower" not in data:
        raise UsageError(f"{path} is not an atlas file")
    return atlas_from_json(data)


# tower


def cmd_tower(args: argparse.Namespace) -> int:
    if args.action == "validate":
        data = _read_json(args.file)
        try:
            tower = tower_from_json(data, validate=False)
        except DomainError as exc:
            print(f"invalid tower: {exc}")
            return FAILED
        diags = validate_gm(tower)
        for d in diags:
            print(d)
        if not diags:
            print(f"ok: height {tower.height}, vertex counts {tower.vertex_counts}")
        return FAILED if diags else OK

    sources = [args.bases is not None, args.words is not None, args.random]
    if sum(sources) != 1:
        raise UsageError("tower build needs exactly one of --bases, --words, --random")
    if args.bases is not None:
        tower = odometer_tower(_ints(args.bases))
    elif args.words is not None:
        tower = build_tower_from_words(_read_json(args.words), meta={"generator": "words"})
    else:
        if args.levels is None or args.seed is None:
            raise UsageError("--random needs --levels and --seed")
        counts = _ints(args.cycles) if args.cycles else [2] * args.levels
        tower = random_simple_tower(args.seed, args.levels, counts, args.budget)
    diags = validate_gm(tower)
    for d in diags:
        print(d, file=sys.stderr)
    if args.strict and not growth_check(tower):
        print(f"warning: growth s_(m+1) > 4 s_m^2 fails for vertex counts {tower.vertex_counts}", file=sys.stderr)
    _write(args.out, tower_to_json(tower))
    return FAILED if diags else OK


# atlas


def cmd_atlas(args: argparse.Namespace) -> int:
    if args.action == "summary":
        _write(args.out, atlas_summary(_load_atlas(args.file)))
        return OK
    cfg = RunConfig("atlas", "build", (args.file,), args.out, args.depth, args.mode)
    tower = tower_from_json(_read_json(args.file))
    if cfg.depth is None or cfg.depth + 1 > tower.height:
        raise UsageError(f"--depth must be at most tower height - 1 = {tower.height - 1}")
    try:
        atlas = build_atlas(tower, cfg.depth, cfg.mode)
    except CertificationError as exc:
        print(f"certification failed at {exc.where}: {exc.inequality}: {exc}")
        return FAILED
    for c in atlas.certificates:
        print(f"level {c.level}: {c.name}: {'holds' if c.holds else 'FAILS'}{' ' + c.detail if c.detail else ''}")
    bad = w_membership_check(atlas)
    for prefix, hits in bad:
        print(f"thread {list(prefix)} meets W at levels {hits}")
    _write(cfg.out, atlas_to_json(atlas, materialize=args.materialize))
    return FAILED if bad else OK


# verify


def _level_table(reports: list, atlas) -> dict:
    maxima = per_level_maxima(reports)
    out = {}
    for k in sorted({q.level for q in reports}):
        qs = [q for q in reports if q.level == k]
        row = {
            "pairs": len(qs),
            "crossings": sum(q.crossing for q in qs),
            "theoretical_log2_approx": round(theoretical_bound(atlas.s(k)).log2_abs(), 9),
        }
        if k in maxima:
            row["max_bound_log2_approx"] = round(maxima[k].log2_abs(), 9)
            if k >= 2:
                row["max_within_theory"] = maxima[k] <= theoretical_bound(atlas.s(k))
        out[str(k)] = row
    return out


def cmd_verify(args: argparse.Namespace) -> int:
    atlas = _load_atlas(args.file)
    cfg = RunConfig("verify", args.action, (args.file,), args.out, args.depth, atlas.mode, args.seed, args.samples)
    depth = cfg.depth if cfg.depth is not None else atlas.depth
    report: dict = {"command": f"verify {args.action}", "depth": depth, "mode": atlas.mode}
    if args.action == "quotients":
        report.update(samples=cfg.samples, seed=cfg.seed, min_level=args.min_level)
        try:
            qs = quotient_sweep(atlas, depth, cfg.samples, cfg.seed, args.min_level)
        except CertificationError as exc:
            report["certification_error"] = {"where": exc.where, "inequality": exc.inequality, "message": str(exc)}
            _write(cfg.out, report)
            return FAILED
        violations = [q for q in qs if q.within_theory is False]
        report["per_level"] = _level_table(qs, atlas)
        report["violations"] = [q.to_record(args.exact) for q in violations]
        ok = not violations
    elif args.action == "lrs":
        lrs = lrs_sample_check(atlas, depth, cfg.samples, cfg.seed)
        report.update(samples=cfg.samples, seed=cfg.seed, lrs=lrs.to_record(args.exact))
        ok = lrs.ok
    elif args.action == "conjugacy":
        ok = conjugacy_check(atlas, depth)
        report["holds"] = ok
    else:
        ok = disjointness_check(atlas)
        bad = w_membership_check(atlas)
        report["holds"] = ok
        report["w_membership_violations"] = [{"thread": list(p), "levels": h} for p, h in bad]
        ok = ok and not bad
    report["ok"] = ok
    _write(cfg.out, report)
    print(f"verify {args.action}: {'ok' if ok else 'VIOLATIONS'}")
    return OK if ok else FAILED


# extension


def cmd_extend(args: argparse.Namespace) -> int:
    atlas = _load_atlas(args.file)
    cfg = RunConfig("extend", "build", (args.file,), args.out, None, atlas.mode, args.seed, args.samples, args.horizon, args.levels)
    try:
        ext = build_extension(atlas, cfg.n_levels, cfg.horizon)
    except SearchFailure as exc:
        print(f"search failed at level {exc.level} (depth {exc.depth}, horizon {exc.horizon}): {exc}")
        return FAILED
    except CertificationError as exc:
        print(f"certification failed at {exc.where}: {exc.inequality}: {exc}")
        return FAILED
    report = verify_extension(ext, cfg.samples, cfg.seed)
    data = extension_to_json(ext)
    data["atlas"] = {"tower": tower_to_json(atlas.tower), "depth": atlas.depth, "mode": atlas.mode}
    _write(cfg.out, data)
    if args.report:
        Path(args.report).write_text(_dump(report.to_record()))
    print("periods: " + " ".join(map(str, ext.periods)))
    for c in report.conditions + report.closing:
        if not c.holds:
            print(f"level {c.level}: {c.name}: FAILS")
    if report.violations:
        print(f"{len(report.violations)} sampled pairs not contracted")
    return OK if report.ok else FAILED


# plot data


def _tsv(path: Path, header: list[str], rows: list) -> None:
    lines = ["\t".join(header)] + ["\t".join(str(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


def cmd_export(args: argparse.Namespace) -> int:
    data = _read_json(args.file)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if "spirals" in data:
        rows = []
        for n, pts in sorted(data["spirals"].items(), key=lambda kv: int(kv[0])):
            for p in pts:
                lift = ExactScalar.from_record(p["lift"])
                rows.append((n, p["j"], len(pts), round(lift.log2_abs(), 9)))
        _tsv(out / "spirals.tsv", ["level", "j", "period", "lift_log2_approx"], rows)
        return OK
    atlas = atlas_from_json(data)
    rows = []
    for m in range(1, atlas.depth + 1):
        for i in range(1, atlas.s(m) + 1):
            d = atlas.D(m, i)
            rows.append(
                (
                    m,
                    i,
                    atlas.indexing(m).vertex(i),
                    f"{d.lo.approx():.17g}",
                    round(atlas.diam_A(m, i).log2_abs(), 9),
                    round(atlas.diam_D(m, i).log2_abs(), 9),
                )
            )
    _tsv(out / "intervals.tsv", ["level", "index", "vertex", "D_lo_approx", "diam_A_log2_approx", "diam_D_log2_approx"], rows)
    maxima = exhaustive_level_maxima(atlas)
    qrows = [
        (k, round(v.log2_abs(), 9), round(theoretical_bound(atlas.s(k)).log2_abs(), 9)) for k, v in sorted(maxima.items())
    ]
    _tsv(out / "quotients.tsv", ["level", "max_bound_log2_approx", "theoretical_log2_approx"], qrows)
    return OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gmcantor", description="Graph-cover towers, exact embeddings and certificates.")
    sub = p.add_subparsers(dest="command", required=True)

    tower = sub.add_parser("tower").add_subparsers(dest="action", required=True)
    tb = tower.add_parser("build")
    tb.add_argument("--bases")
    tb.add_argument("--words")
    tb.add_argument("--random", action="store_true")
    tb.add_argument("--levels", type=int)
    tb.add_argument("--seed", type=int)
    tb.add_argument("--cycles", help="comma-separated r_1..r_L for --random")
    tb.add_argument("--budget", type=int, default=6, help="maximum word length for --random")
    tb.add_argument("--strict", action="store_true", help="warn when the growth condition fails")
    tb.add_argument("--out")
    tv = tower.add_parser("validate")
    tv.add_argument("file")

    atlas = sub.add_parser("atlas").add_subparsers(dest="action", required=True)
    ab = atlas.add_parser("build")
    ab.add_argument("file")
    ab.add_argument("--depth", type=int, required=True)
    ab.add_argument("--mode", choices=[STRICT, CHECKED], default=STRICT)
    ab.add_argument("--materialize", action="store_true", help="store exact endpoints")
    ab.add_argument("--out")
    asum = atlas.add_parser("summary")
    asum.add_argument("file")
    asum.add_argument("--out")

    verify = sub.add_parser("verify")
    verify.add_argument("action", choices=["quotients", "lrs", "conjugacy", "disjointness"])
    verify.add_argument("file")
    verify.add_argument("--depth", type=int)
    verify.add_argument("--samples", type=int, default=1000)
    verify.add_argument("--seed", type=int, default=0)
    verify.add_argument("--min-level", type=int, default=1)
    verify.add_argument("--exact", action="store_true", help="include exact records of bounds")
    verify.add_argument("--out")

    extend = sub.add_parser("extend").add_subparsers(dest="action", required=True)
    eb = extend.add_parser("build")
    eb.add_argument("file")
    eb.add_argument("--levels", type=int, default=3)
    eb.add_argument("--horizon", type=int, default=100_000)
    eb.add_argument("--samples", type=int, default=1000)
    eb.add_argument("--seed", type=int, default=0)
    eb.add_argument("--out")
    eb.add_argument("--report")

    export = sub.add_parser("export").add_subparsers(dest="action", required=True)
    ep = export.add_parser("plotdata")
    ep.add_argument("file", help="atlas or extension JSON")
    ep.add_argument("--out", required=True, help="output directory")
    return p


COMMANDS = {"tower": cmd_tower, "atlas": cmd_atlas, "verify": cmd_verify, "extend": cmd_extend, "export": cmd_export}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return USAGE if exc.code else OK
    try:
        return COMMANDS[args.command](args)
    except (UsageError, DepthError, UnsupportedOperation) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE
    except (DomainError, GMError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return FAILED


if __name__ == "__main__":
    sys.exit(main())
