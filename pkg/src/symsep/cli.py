"""Command-line front end.

Exit codes: 0 ok, 2 config error, 3 I/O error, 4 dimension/validation error,
5 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .ensembles import EnsembleSpec, RngStream, sample_matrix
from .errors import ConfigError, IOFailure, SymsepError
from .expharness import (
    ExperimentConfig,
    chi_fit,
    concentration_sweep,
    levy_bound_check,
    results_document,
    run_ne_distribution,
    timed,
)
from .states import DensityMatrix
from .symmetry import ChargeFamily, ChargeOperator, twirl
from .witness import decide_symsep, number_entanglement

WORKERS_ENV = "SYMSEP_WORKERS"


# --- file helpers ----------------------------------------------------------------------


def _read_text(path) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise IOFailure(f"cannot read {path}: {exc.strerror}") from None


def _write_text(path, text: str) -> None:
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise IOFailure(f"cannot write {path}: {exc.strerror}") from None


def _load_json(path, what: str) -> dict:
    text = _read_text(path)
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{what} {path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(obj, dict):
        raise ConfigError(f"{what} {path}: expected a JSON object")
    return obj


def read_states(path) -> list[tuple[int, DensityMatrix]]:
    """Parse a JSON-lines state file; returns ``(line_number, state)`` pairs."""
    out = []
    for lineno, line in enumerate(_read_text(path).splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
        if "header" in obj:
            continue
        try:
            out.append((lineno, DensityMatrix.from_dict(obj)))
        except SymsepError as exc:
            raise type(exc)(f"{path}:{lineno}: {exc}") from None
    return out


def _dump_lines(header: dict | None, rows) -> str:
    lines = [json.dumps({"header": header})] if header is not None else []
    lines.extend(json.dumps(r) for r in rows)
    return "".join(line + "\n" for line in lines)


class _ChargeSource:
    """Resolves a charge file against the dims of each state."""

    def __init__(self, path):
        self.path = path
        self.obj = _load_json(path, "charge file")
        self._cache = {}

    def family(self, dims) -> ChargeFamily:
        dims = tuple(dims)
        if dims not in self._cache:
            if "kind" not in self.obj:
                raise ConfigError(f"charge file {self.path}: a charge family needs key 'kind'")
            self._cache[dims] = ChargeFamily.from_dict(self.obj, dims)
        return self._cache[dims]

    def local_A(self, dims) -> ChargeOperator:
        if "kind" not in self.obj:
            # a bare ChargeOperator is taken as N_A
            return ChargeOperator.from_dict(self.obj, dims[0])
        fam = self.family(dims)
        if fam.local is None:
            raise ConfigError("NE needs a charge family with local charges")
        return fam.local[0]


def _with_line(fn, lineno, path):
    try:
        return fn()
    except SymsepError as exc:
        raise type(exc)(f"{path}:{lineno}: {exc}") from None


# --- commands --------------------------------------------------------------------------


def cmd_gen(args) -> int:
    spec_obj = _load_json(args.spec, "ensemble spec")
    spec = EnsembleSpec.from_dict(spec_obj)
    family = None
    if args.charge:
        family = ChargeFamily.from_dict(_load_json(args.charge, "charge file"), spec.dims)
    if args.count < 0:
        raise ConfigError("--count must be non-negative")
    header = {"spec": spec.to_dict(), "seed": args.seed, "count": args.count, "code_version": __version__}
    if family is not None:
        header["charge"] = family.to_dict()
    rows = []
    for i in range(args.count):
        m = sample_matrix(spec, RngStream(args.seed, i).generator(), family)
        rows.append(DensityMatrix(m, spec.dims).to_dict())
    _write_text(args.out, _dump_lines(header, rows))
    return 0


def cmd_ne(args) -> int:
    charge = _ChargeSource(args.charge)
    states = read_states(args.states)
    vals = []
    for lineno, rho in states:
        nA = _with_line(lambda: charge.local_A(rho.dims), lineno, args.states)
        vals.append(_with_line(lambda: number_entanglement(rho, nA, rho.dims), lineno, args.states))
    if args.format == "json":
        text = json.dumps({"ne": vals}) + "\n"
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if vals:
            w.writerow(["index", "ne"])
        for i, v in enumerate(vals):
            w.writerow([i, repr(float(v))])
        text = buf.getvalue()
    _write_text(args.out, text)
    return 0


def cmd_twirl(args) -> int:
    charge = _ChargeSource(args.charge)
    rows = []
    for lineno, rho in read_states(args.states):
        fam = _with_line(lambda: charge.family(rho.dims), lineno, args.states)
        if args.localize and fam.local is not None:
            fam = fam.localized()
        rows.append(_with_line(lambda: twirl(rho, fam), lineno, args.states).to_dict())
    _write_text(args.out, _dump_lines({"charge": charge.obj, "localized": bool(args.localize)}, rows))
    return 0


def cmd_decide(args) -> int:
    charge = _ChargeSource(args.charge)
    rows = []
    for lineno, rho in read_states(args.states):
        fam = _with_line(lambda: charge.family(rho.dims), lineno, args.states)
        rows.append(_with_line(lambda: decide_symsep(rho, fam, rho.dims), lineno, args.states).to_dict())
    _write_text(args.out, _dump_lines(None, rows))
    return 0


def _dims_tag(dims) -> str:
    return "x".join(str(d) for d in dims)


def cmd_experiment(args) -> int:
    obj = _load_json(args.config, "experiment config")
    sweep = obj.pop("sweep", None)
    if args.seed is not None:
        obj["seed"] = args.seed
    if args.workers is not None:
        obj["workers"] = args.workers
    elif WORKERS_ENV in os.environ and "workers" not in obj:
        obj["workers"] = int(os.environ[WORKERS_ENV])
    cfg = ExperimentConfig.from_dict(obj)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IOFailure(f"cannot create {out}: {exc.strerror}") from None

    if sweep is None:
        stats, wall = timed(run_ne_distribution, cfg)
        fit = _try_fit(stats.samples)
        dA, dB = cfg.ensemble.dims
        levy = levy_bound_check(stats, 2 * dA**2 * dB**2) if stats.sample_count else None
        doc = results_document(cfg, stats, fit, wall, {"levy": levy.to_dict() if levy else None})
        _write_text(out / "results.json", json.dumps(doc, indent=2) + "\n")
        _write_text(out / "histogram.csv", stats.histogram_csv())
        _write_text(out / "ne_values.csv", "".join(f"{float(v)!r}\n" for v in stats.samples))
        if args.svg and stats.sample_count:
            from .plotting import histogram_figure

            histogram_figure(stats, fit, out / "histogram.svg", cfg.label or _dims_tag(cfg.ensemble.dims))
        return 0

    dims_list = [tuple(int(x) for x in d) for d in sweep]
    report, wall = timed(concentration_sweep, dims_list, cfg)
    fits = []
    for dims, stats in report.rows:
        tag = _dims_tag(dims)
        fit = _try_fit(stats.samples)
        fits.append(fit)
        _write_text(out / f"histogram_{tag}.csv", stats.histogram_csv())
        _write_text(out / f"ne_values_{tag}.csv", "".join(f"{float(v)!r}\n" for v in stats.samples))
    doc = {
        "config": cfg.to_dict(),
        "sweep": report.to_dict(),
        "chi_fits": [f.to_dict() if f else None for f in fits],
        "metadata": {"code_version": __version__, "mixture_size": cfg.ensemble.mixture_size() or "(d_A*d_B)^2"},
        "wall_time": wall,
    }
    _write_text(out / "results.json", json.dumps(doc, indent=2) + "\n")
    if args.svg:
        from .plotting import sweep_figure

        sweep_figure(report.rows, fits, out / "sweep.svg", cfg.label)
    return 0


def _try_fit(values):
    try:
        return chi_fit(values)
    except SymsepError:
        return None


def cmd_fit(args) -> int:
    text = _read_text(args.samples)
    vals = []
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not row:
            continue
        try:
            vals.append(float(row[-1]))
        except ValueError:
            if lineno == 1:
                continue  # header
            raise ConfigError(f"{args.samples}:{lineno}: not a number: {row[-1]!r}") from None
    fit = chi_fit(np.asarray(vals))
    doc = fit.to_dict()
    doc["pdf_normalization"] = fit.normalization()
    _write_text(args.out, json.dumps(doc, indent=2) + "\n")
    return 0


# --- entry point -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="symsep", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="sample states from an ensemble spec (JSON-lines)")
    g.add_argument("spec")
    g.add_argument("--count", type=int, default=10)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--charge", help="charge family JSON for ensembles that need one")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    n = sub.add_parser("ne", help="number entanglement of each state")
    n.add_argument("states")
    n.add_argument("--charge", required=True)
    n.add_argument("--out", required=True)
    n.add_argument("--format", choices=("csv", "json"), default="csv")
    n.set_defaults(func=cmd_ne)

    t = sub.add_parser("twirl", help="twirl each state by a charge family")
    t.add_argument("states")
    t.add_argument("--charge", required=True)
    t.add_argument("--localize", action="store_true", help="twirl by the localized family")
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_twirl)

    d = sub.add_parser("decide", help="decide symmetric separability of each state")
    d.add_argument("states")
    d.add_argument("--charge", required=True)
    d.add_argument("--out", required=True)
    d.set_defaults(func=cmd_decide)

    e = sub.add_parser("experiment", help="run an NE distribution experiment or sweep")
    e.add_argument("config")
    e.add_argument("--out", required=True, help="output directory")
    e.add_argument("--seed", type=int)
    e.add_argument("--workers", type=int, help=f"default from ${WORKERS_ENV} or the config")
    e.add_argument("--svg", action="store_true", help="also write SVG figures")
    e.set_defaults(func=cmd_experiment)

    f = sub.add_parser("fit", help="fit a chi distribution to a column of samples")
    f.add_argument("samples")
    f.add_argument("--out", required=True)
    f.set_defaults(func=cmd_fit)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SymsepError as exc:
        print(f"symsep {args.command}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
