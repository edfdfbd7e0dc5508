"""JSON formats for panels (``stergm-panel/1``) and fits (``stergm-fit/1``)."""

from __future__ import annotations

import hashlib
import json
import math
from typing import Any

import numpy as np

from .graph import MAX_NODES, MIN_NODES, AttributeTable, Game, Panel, SmallGraph, Snapshot
from .inference import AT_LOWER, AT_UPPER, FitResult, SliceFit, wald_tests
from .statistics import ModelSpec
from .terms import parse_terms, render_terms

PANEL_SCHEMA = "stergm-panel/1"
FIT_SCHEMA = "stergm-fit/1"


class FormatError(ValueError):
    """Document does not match its schema; ``path`` locates the problem."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


# --- panels ------------------------------------------------------------------


def _expect(cond: bool, path: str, message: str) -> None:
    if not cond:
        raise FormatError(path, message)


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def _field(obj: dict, key: str, path: str):
    _expect(isinstance(obj, dict), path, "expected an object")
    _expect(key in obj, path, f"missing field {key!r}")
    return obj[key]


def _parse_snapshot(raw, n: int, path: str) -> Snapshot:
    t = _field(raw, "t", path)
    _expect(_is_int(t), f"{path}.t", "expected an integer")
    edges = _field(raw, "edges", path)
    _expect(isinstance(edges, list), f"{path}.edges", "expected an array")
    seen = set()
    mask_pairs = []
    for e, pair in enumerate(edges):
        epath = f"{path}.edges[{e}]"
        _expect(isinstance(pair, list) and len(pair) == 2 and all(_is_int(v) for v in pair),
                epath, "expected a pair of integers [i, j]")
        i, j = pair
        _expect(0 <= i < n and 0 <= j < n, epath, f"node index out of range for n={n}: {pair}")
        _expect(i < j, epath, f"edge {pair} must satisfy i < j")
        _expect((i, j) not in seen, epath, f"duplicate edge {pair}")
        seen.add((i, j))
        mask_pairs.append((i, j))
    attrs = _field(raw, "attrs", path)
    apath = f"{path}.attrs"
    decision = _field(attrs, "decision", apath)
    wealth = _field(attrs, "wealth", apath)
    _expect(isinstance(decision, list) and len(decision) == n, f"{apath}.decision", f"expected {n} entries")
    _expect(isinstance(wealth, list) and len(wealth) == n, f"{apath}.wealth", f"expected {n} entries")
    for k, d in enumerate(decision):
        _expect(d in ("C", "D", "N"), f"{apath}.decision[{k}]", f"expected 'C', 'D' or 'N', got {d!r}")
    for k, w in enumerate(wealth):
        _expect(_is_int(w), f"{apath}.wealth[{k}]", f"expected an integer, got {w!r}")
    return Snapshot(t, SmallGraph.from_edges(n, mask_pairs), AttributeTable(decision, wealth))


def panel_from_dict(doc: Any) -> Panel:
    _expect(isinstance(doc, dict), "$", "expected an object")
    version = _field(doc, "schema_version", "$")
    _expect(version == PANEL_SCHEMA, "$.schema_version", f"expected {PANEL_SCHEMA!r}, got {version!r}")
    games_raw = _field(doc, "games", "$")
    _expect(isinstance(games_raw, list), "$.games", "expected an array")
    games = []
    ids = set()
    for g, raw in enumerate(games_raw):
        path = f"$.games[{g}]"
        gid = _field(raw, "game_id", path)
        _expect(isinstance(gid, str), f"{path}.game_id", "expected a string")
        _expect(gid not in ids, f"{path}.game_id", f"duplicate game id {gid!r}")
        ids.add(gid)
        n = _field(raw, "n", path)
        _expect(_is_int(n) and MIN_NODES <= n <= MAX_NODES, f"{path}.n",
                f"expected an integer in [{MIN_NODES}, {MAX_NODES}]")
        times = _field(raw, "times", path)
        _expect(isinstance(times, list) and len(times) >= 2, f"{path}.times", "expected at least 2 snapshots")
        snaps = [_parse_snapshot(s, n, f"{path}.times[{k}]") for k, s in enumerate(times)]
        for k in range(1, len(snaps)):
            _expect(snaps[k].t > snaps[k - 1].t, f"{path}.times[{k}].t", "times must be strictly ascending")
        games.append(Game(gid, n, tuple(snaps)))
    return Panel(tuple(games))


def parse_panel(data: bytes | str) -> Panel:
    """Decode and validate a ``stergm-panel/1`` document."""
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError("$", f"input is not UTF-8: {exc}") from None
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise FormatError("$", f"invalid JSON: {exc}") from None
    return panel_from_dict(doc)


def panel_to_dict(panel: Panel) -> dict:
    return {
        "schema_version": PANEL_SCHEMA,
        "games": [
            {
                "game_id": game.game_id,
                "n": game.n,
                "times": [
                    {
                        "t": s.t,
                        "edges": [list(e) for e in s.graph.edges()],
                        "attrs": {
                            "decision": [d.value for d in s.attrs.decision],
                            "wealth": list(s.attrs.wealth),
                        },
                    }
                    for s in game.snapshots
                ],
            }
            for game in panel.games
        ],
    }


def serialize_panel(panel: Panel) -> bytes:
    return (json.dumps(panel_to_dict(panel), separators=(",", ":")) + "\n").encode("utf-8")


def panel_digest(panel: Panel) -> str:
    canon = json.dumps(panel_to_dict(panel), sort_keys=True, separators=(",", ":"))
    return "sha256:" + hashlib.sha256(canon.encode("utf-8")).hexdigest()


# --- fits --------------------------------------------------------------------


def _num(x) -> float | None:
    # JSON has no inf/nan; withheld or divergent values become null
    x = float(x)
    return x if math.isfinite(x) else None


def _vec(xs) -> list:
    return [_num(x) for x in xs]


def _wald_rows(fit: FitResult) -> list[dict]:
    rows = []
    for name, w, flag in zip(fit.names, wald_tests(fit), fit.existence_flags):
        if w is None:
            rows.append({"name": name, "z": None, "p_value": None, "stars": None, "existence": flag})
        else:
            rows.append({"name": name, "z": w.z, "p_value": w.p_value, "stars": w.stars, "existence": flag})
    return rows


def fit_to_dict(fit: FitResult) -> dict:
    d_f = fit.spec.n_formation
    return {
        "schema_version": FIT_SCHEMA,
        "spec": {"formation": render_terms(fit.spec.formation),
                 "persistence": render_terms(fit.spec.persistence)},
        "parameters": fit.names,
        "theta": {"formation": _vec(fit.theta_hat[:d_f]), "persistence": _vec(fit.theta_hat[d_f:])},
        "se": {"formation": _vec(fit.se[:d_f]), "persistence": _vec(fit.se[d_f:])},
        "cov": [_vec(row) for row in fit.cov],
        "loglik": fit.loglik,
        "residual_deviance": fit.residual_deviance,
        "n_params": fit.n_params,
        "n_transitions": fit.n_transitions,
        "convergence": {
            "converged": fit.converged,
            "iterations": fit.iterations,
            "message": fit.message,
            "gradient": _vec(fit.gradient),
            "singular_information": fit.singular_information,
            "status": fit.status,
        },
        "existence_flags": list(fit.existence_flags),
        "divergence": fit.divergence(),
        "wald": _wald_rows(fit),
        "panel_digest": fit.panel_digest,
    }


def fit_document(fit: FitResult, per_time: list[SliceFit] | None = None) -> dict:
    doc = fit_to_dict(fit)
    if per_time is not None:
        doc["per_time"] = [
            {"step": s.step, "error": s.error, "fit": None if s.fit is None else fit_to_dict(s.fit)}
            for s in per_time
        ]
    return doc


def dumps_fit(doc: dict) -> str:
    # repr-based float output is the shortest string that re-parses to the same double
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def _arr(xs, fill=math.nan) -> np.ndarray:
    return np.array([fill if x is None else float(x) for x in xs], dtype=np.float64)


def fit_from_dict(doc: Any) -> FitResult:
    _expect(isinstance(doc, dict), "$", "expected an object")
    version = _field(doc, "schema_version", "$")
    _expect(version == FIT_SCHEMA, "$.schema_version", f"expected {FIT_SCHEMA!r}, got {version!r}")
    spec_raw = _field(doc, "spec", "$")
    try:
        spec = ModelSpec(tuple(parse_terms(_field(spec_raw, "formation", "$.spec"))),
                         tuple(parse_terms(_field(spec_raw, "persistence", "$.spec"))))
    except ValueError as exc:
        raise FormatError("$.spec", str(exc)) from None
    flags = list(_field(doc, "existence_flags", "$"))
    theta = np.concatenate([_arr(doc["theta"]["formation"]), _arr(doc["theta"]["persistence"])])
    for k, f in enumerate(flags):
        if f == AT_UPPER:
            theta[k] = math.inf
        elif f == AT_LOWER:
            theta[k] = -math.inf
    conv = _field(doc, "convergence", "$")
    se = np.concatenate([_arr(doc["se"]["formation"]), _arr(doc["se"]["persistence"])])
    d = spec.n_params
    cov = np.array([_arr(row) for row in doc["cov"]]).reshape(d, d)
    _expect(len(theta) == d and len(flags) == d, "$.theta", f"expected {d} parameters")
    return FitResult(
        spec=spec,
        theta_hat=theta,
        se=se,
        cov=cov,
        loglik=float(doc["loglik"]),
        residual_deviance=float(doc["residual_deviance"]),
        n_params=int(doc["n_params"]),
        converged=bool(conv["converged"]),
        existence_flags=flags,
        iterations=int(conv["iterations"]),
        message=conv.get("message", ""),
        gradient=_arr(conv.get("gradient", [])),
        singular_information=bool(conv.get("singular_information", False)),
        n_transitions=int(doc.get("n_transitions", 0)),
        panel_digest=doc.get("panel_digest"),
    )


def loads_fit(text: str | bytes) -> FitResult:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError("$", f"invalid JSON: {exc}") from None
    return fit_from_dict(doc)
