"""Command line interface: ``stergm fit | lrtest | simulate | stats``.

Exit codes: 0 success, 1 user or input error, 2 statistical degeneracy
(nonexistent MLE or a fit that did not converge).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .graph import Decision, EnumerationBudgetError, GraphError
from .inference import FitConfig, NestingError, fit_per_time, lr_test, maximize, wald_tests
from .likelihood import CompiledPanel, ThetaVector, resolve_threads
from .serialization import (
    FIT_SCHEMA,
    FormatError,
    dumps_fit,
    fit_document,
    fit_from_dict,
    parse_panel,
    serialize_panel,
)
from .simulate import BernoulliDecisions, ConstantDecisions, ReplayAttributes, SimConfig, simulate_panel
from .statistics import ModelSpec, eval_vector
from .terms import TermSyntaxError, parse_terms

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_DEGENERATE = 2

log = logging.getLogger("stergm")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad flags; 2 is reserved for degeneracy here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _read_bytes(path: str) -> bytes:
    if path == "-":
        return sys.stdin.buffer.read()
    return Path(path).read_bytes()


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _spec(args) -> ModelSpec:
    return ModelSpec(tuple(parse_terms(args.formation)), tuple(parse_terms(args.persistence)))


def _fmt(x: float, width: int = 9) -> str:
    if x is None or not np.isfinite(x):
        return f"{'-':>{width}}"
    return f"{x:{width}.3f}"


def format_fit_table(fit) -> str:
    lines = [f"{'parameter':<42}{'estimate':>10}{'se':>9}{'z':>9}{'p':>9}  sig"]
    for name, est, se, flag, w in zip(fit.names, fit.theta_hat, fit.se, fit.existence_flags, wald_tests(fit)):
        if flag != "ok":
            shown = {"at_upper_boundary": "+inf", "at_lower_boundary": "-inf"}.get(flag, "n/a")
            lines.append(f"{name:<42}{shown:>10}{'-':>9}{'-':>9}{'-':>9}  ({flag})")
        elif w is None:
            lines.append(f"{name:<42}{_fmt(est, 10)}{_fmt(se)}{'-':>9}{'-':>9}")
        else:
            lines.append(f"{name:<42}{_fmt(est, 10)}{_fmt(se)}{w.z:9.3f}{w.p_value:9.3f}  {w.stars}")
    lines.append(f"log-likelihood {fit.loglik:.4f}; residual deviance {fit.residual_deviance:.2f} "
                 f"on {fit.n_transitions} transitions; status {fit.status}")
    lines.append("Significance levels: 0.05*, 0.01**, 0.001***")
    return "\n".join(lines) + "\n"


# --- subcommands -------------------------------------------------------------


def cmd_fit(args) -> int:
    panel = parse_panel(_read_bytes(args.data))
    spec = _spec(args)
    config = FitConfig(grad_tol=args.tol, max_iters=args.max_iters, threads=args.threads)
    compiled = CompiledPanel.build(panel, spec, config.budget, config.threads)
    fit = maximize(panel, spec, config, compiled=compiled)
    per_time = fit_per_time(panel, spec, config) if args.by_time else None
    doc = fit_document(fit, per_time)
    table = format_fit_table(fit)
    if per_time:
        for s in per_time:
            table += f"\n-- transition step {s.step} --\n"
            table += format_fit_table(s.fit) if s.fit is not None else f"error: {s.error}\n"
    if args.out:
        _emit(dumps_fit(doc), args.out)
        sys.stdout.write(table)
    else:
        sys.stdout.write(dumps_fit(doc))
        sys.stderr.write(table)
    return EXIT_DEGENERATE if fit.status in ("mle_nonexistent", "not_converged") else EXIT_OK


def _load_fit(path: str):
    try:
        doc = json.loads(_read_bytes(path))
    except json.JSONDecodeError as exc:
        raise FormatError("$", f"{path}: invalid JSON: {exc}") from None
    return fit_from_dict(doc)


def cmd_lrtest(args) -> int:
    reduced = _load_fit(args.reduced)
    full = _load_fit(args.full)
    if reduced.panel_digest != full.panel_digest:
        raise UsageError("fits were computed on different data (panel digests differ)")
    if full.n_params - reduced.n_params <= 0:
        raise UsageError("the full model must have more parameters than the reduced model")
    res = lr_test(reduced, full)
    sys.stdout.write(f"{'model':<10}{'residual deviance':>20}{'deviance (df)':>18}{'p value':>10}\n")
    sys.stdout.write(f"{'reduced':<10}{reduced.residual_deviance:>20.2f}{'---':>18}{'---':>10}\n")
    sys.stdout.write(f"{'full':<10}{full.residual_deviance:>20.2f}"
                     f"{f'{res.deviance:.2f} ({res.df})':>18}{res.p_value:>10.3f}\n")
    if args.json:
        sys.stdout.write(json.dumps({"deviance": res.deviance, "df": res.df, "p_value": res.p_value}) + "\n")
    return EXIT_OK


def _attr_source(text: str):
    kind, _, arg = text.partition(":")
    if kind == "bernoulli":
        p = float(arg) if arg else 0.5
        if not 0 <= p <= 1:
            raise UsageError(f"cooperation probability must be in [0, 1], got {p}")
        return BernoulliDecisions(p)
    if kind == "constant":
        if not arg:
            return ConstantDecisions(Decision.COOPERATE)
        if len(arg) == 1:
            return ConstantDecisions(Decision.parse(arg))
        return ConstantDecisions(tuple(Decision.parse(c) for c in arg))
    if kind == "replay":
        if not arg:
            raise UsageError("replay needs a panel path: replay:PATH")
        return ReplayAttributes.from_panel(parse_panel(_read_bytes(arg)))
    raise UsageError(f"unknown attribute source {text!r}; use bernoulli:P, constant:DECISIONS or replay:PATH")


def _load_theta(path: str | None, spec: ModelSpec) -> ThetaVector:
    if path is None:
        return ThetaVector.zeros(spec)
    try:
        doc = json.loads(_read_bytes(path))
    except json.JSONDecodeError as exc:
        raise FormatError("$", f"{path}: invalid JSON: {exc}") from None
    if isinstance(doc, dict) and doc.get("schema_version") == FIT_SCHEMA:
        doc = doc["theta"]
    if not isinstance(doc, dict) or "formation" not in doc or "persistence" not in doc:
        raise FormatError("$", "theta file needs 'formation' and 'persistence' arrays")
    f, p = doc["formation"], doc["persistence"]
    if len(f) != spec.n_formation or len(p) != spec.n_persistence:
        raise UsageError(
            f"theta has {len(f)}+{len(p)} entries but the model has {spec.n_formation}+{spec.n_persistence} terms"
        )
    if any(v is None for v in list(f) + list(p)):
        raise UsageError("theta contains null entries (nonexistent estimates) and cannot be simulated")
    return ThetaVector(f, p)


def cmd_simulate(args) -> int:
    spec = _spec(args)
    theta = _load_theta(args.theta_file, spec)
    config = SimConfig(
        theta=theta,
        spec=spec,
        games=args.games,
        n=args.n,
        initial_ties=args.initial_ties,
        transitions=args.transitions,
        seed=args.seed,
        attribute_source=_attr_source(args.attr_source),
    )
    panel = simulate_panel(config)
    data = serialize_panel(panel)
    if args.out:
        Path(args.out).write_bytes(data)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    return EXIT_OK


def cmd_stats(args) -> int:
    panel = parse_panel(_read_bytes(args.data))
    spec = _spec(args)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["game", "t", "side", "term", "value"])
    for g, t, tv in panel.transitions():
        gid = panel.games[g].game_id
        for side, terms, graph in (("formation", spec.formation, tv.y_plus),
                                   ("persistence", spec.persistence, tv.y_minus)):
            for term, value in zip(terms, eval_vector(terms, graph, tv.attrs)):
                writer.writerow([gid, t, side, term.render(), repr(float(value))])
    _emit(buf.getvalue(), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="stergm", description="Exact STERGM inference for small dynamic networks.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def model_flags(p):
        p.add_argument("--formation", default="", help="formation terms, e.g. 'edges,triangles'")
        p.add_argument("--persistence", default="", help="persistence terms")

    p = sub.add_parser("fit", help="maximum likelihood fit")
    p.add_argument("--data", required=True, help="stergm-panel/1 JSON file ('-' for stdin)")
    model_flags(p)
    p.add_argument("--by-time", action="store_true", help="also fit each transition step separately")
    p.add_argument("--tol", type=float, default=1e-8, help="gradient infinity-norm tolerance")
    p.add_argument("--max-iters", type=int, default=500)
    p.add_argument("--threads", type=int, default=None, help="worker threads (default: STERGM_THREADS or all cores)")
    p.add_argument("--out", help="write the fit document here instead of stdout")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("lrtest", help="deviance test between two nested fits")
    p.add_argument("reduced", help="fit document of the smaller model")
    p.add_argument("full", help="fit document of the larger model")
    p.add_argument("--json", action="store_true", help="also print the result as JSON")
    p.set_defaults(func=cmd_lrtest)

    p = sub.add_parser("simulate", help="simulate a panel of games")
    model_flags(p)
    p.add_argument("--n", type=int, default=6)
    p.add_argument("--games", type=int, default=20)
    p.add_argument("--transitions", type=int, default=7)
    p.add_argument("--initial-ties", type=int, default=5)
    p.add_argument("--theta-file", help="JSON with 'formation'/'persistence' arrays, or a fit document")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--attr-source", default="bernoulli:0.5",
                   help="bernoulli:P | constant:C|D|N or per-node string | replay:PANEL.json")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("stats", help="observed statistics per transition as CSV")
    p.add_argument("--data", required=True)
    model_flags(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_stats)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "threads", None) is not None:
        args.threads = resolve_threads(args.threads)
    try:
        return args.func(args)
    except (FormatError, TermSyntaxError, GraphError, NestingError, UsageError,
            EnumerationBudgetError, OSError, ValueError) as exc:
        sys.stderr.write(f"stergm {args.command}: error: {exc}\n")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
