"""Command-line front end: ``pargame <command> [game source] [transforms] [options]``.

Exit codes: 0 when every asserted check passes, 1 when an analysis check
fails (or the input game is invalid), 2 on usage errors.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from fractions import Fraction
from pathlib import Path

from . import bounds as bd
from .game import (
    AnchoredPredicate,
    Game,
    GameError,
    anchor,
    build_free_uniform,
    build_ghz,
    build_random,
    repeat,
    restrict,
    validate,
)
from .graph import build_connection_graph, check_invariants
from .io import (
    SCHEMA_VERSION,
    GameFileError,
    game_digest,
    parse_game_file,
    parse_strategy_file,
    render_report,
    strategy_to_dict,
)
from .rounding import DEFAULT_ROUNDING_BUDGET, DEFAULT_STRATEGY_BUDGET, ZeroMass, pipeline
from .spectral import (
    anchored_canonical_paths,
    congestion,
    shortest_canonical_paths,
    spectral_report,
    validate_paths,
)
from .value import BEST_RESPONSE, DEFAULT_BUDGET, METHODS, BudgetExceeded, game_value, value_sequence

COMMANDS = ("validate", "graph", "spectral", "congestion", "value", "bound", "anchor", "repeat", "roundsim")


class UsageError(Exception):
    pass


class _Transform(argparse.Action):
    """Record --anchor/--reps in command-line order."""

    def __call__(self, parser, namespace, values, option_string=None):
        chain = list(getattr(namespace, "transforms", None) or [])
        chain.append((self.dest, values))
        namespace.transforms = chain


def _rational(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from None


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pargame", description="Analyse multiplayer games and their parallel repetitions.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    for name in COMMANDS:
        p = sub.add_parser(name)
        src = p.add_argument_group("game source")
        src.add_argument("--game", type=Path, help="JSON game file")
        src.add_argument("--gen", choices=("ghz", "free", "random"), help="built-in generator")
        src.add_argument("--k", type=_positive_int, default=2, help="players (free, random)")
        src.add_argument("--d", type=_positive_int, default=2, help="questions per player (free, random)")
        src.add_argument("--answers", type=_positive_int, default=2, help="answers per player (free, random)")
        src.add_argument("--seed", type=int, default=0, help="random generator seed")
        src.add_argument("--support", type=_positive_int, help="support size (random)")
        tr = p.add_argument_group("transforms (applied left to right)")
        tr.add_argument("--anchor", dest="anchor", type=_rational, action=_Transform, metavar="ALPHA")
        tr.add_argument("--reps", dest="reps", type=_positive_int, action=_Transform, metavar="N")
        p.add_argument("--method", choices=METHODS, default=BEST_RESPONSE)
        p.add_argument("--budget", type=_positive_int, default=DEFAULT_BUDGET)
        p.add_argument("--threads", type=_positive_int, default=1)
        p.add_argument("--tol", type=float, default=1e-8)
        p.add_argument("--out", type=Path, help="write the report here instead of stdout")
        p.add_argument("--csv", type=Path, help="CSV side output (graph edges, roundsim distances)")
        if name == "bound":
            p.add_argument("--c", type=float, default=1.0, help="the unspecified universal constant")
            p.add_argument("--epsilon", type=_rational, help="explicit epsilon (skips the game)")
            p.add_argument("--lam", type=float, help="explicit lambda (skips the game)")
            p.add_argument("--answer-count", type=_positive_int, help="explicit |A| (skips the game)")
            p.add_argument("--value-reps", type=_positive_int, default=0, help="measure val(G^n) for n up to this")
        if name == "roundsim":
            p.add_argument("--strategy", type=Path, help="strategy file for the repeated game")
            p.add_argument("--epsilon", type=_rational, help="override 1 - val(G)")
            p.add_argument("--strategy-budget", type=_positive_int, default=DEFAULT_STRATEGY_BUDGET)
            p.add_argument("--rounding-budget", type=_positive_int, default=DEFAULT_ROUNDING_BUDGET)
        p.set_defaults(transforms=[])
    return parser


# --------------------------------------------------------------------------
# game assembly


def _base_game(args) -> Game:
    if (args.game is None) == (args.gen is None):
        raise UsageError("give exactly one of --game and --gen")
    if args.game is not None:
        if not args.game.exists():
            raise UsageError(f"no such game file: {args.game}")
        return parse_game_file(args.game)
    if args.gen == "ghz":
        return build_ghz()
    if args.gen == "free":
        return build_free_uniform(args.k, args.d, args.answers)
    return build_random(args.seed, k=args.k, d=args.d, answers=args.answers, support_size=args.support)


def _assemble(args, reps_is_n: bool):
    """Apply transforms; returns (base, game, n, alpha of the last anchoring)."""
    chain = list(args.transforms)
    n = None
    if reps_is_n:
        reps = [v for kind, v in chain if kind == "reps"]
        if len(reps) > 1:
            raise UsageError("--reps given more than once; here it sets the repetition count")
        if reps:
            if chain[-1][0] != "reps":
                raise UsageError("--reps sets the repetition count and must come after every --anchor")
            n = reps[0]
            chain = chain[:-1]
    base = _base_game(args)
    game, alpha = base, None
    for kind, value in chain:
        if kind == "anchor":
            game = anchor(game, value)
            alpha = value
        else:
            game = repeat(game, value)
            alpha = None
    return base, game, n, alpha


def _command_echo(argv: list[str]) -> list[str]:
    out, skip = [], False
    for tok in argv:
        if skip:
            skip = False
            continue
        if tok in ("--threads", "--out"):
            skip = True
            continue
        if tok.startswith(("--threads=", "--out=")):
            continue
        out.append(tok)
    return out


def _symbols(game: Game, x) -> list:
    return list(game.question_symbols(x))


def _summary(game: Game) -> dict:
    return {
        "players": game.k,
        "question_sizes": list(game.question_sizes),
        "answer_sizes": list(game.answer_sizes),
        "answer_count": game.answer_count,
        "support_size": len(game.support),
        "digest": game_digest(game),
    }


def _check(name: str, ok: bool, asserted: bool = True, **extra) -> dict:
    return {"name": name, "pass": bool(ok), "asserted": asserted, **extra}


def _is_free(game: Game) -> bool:
    k = game.k
    margs = []
    for t in range(k):
        m: dict = {}
        for x in game.support:
            m[x[t]] = m.get(x[t], Fraction(0)) + game.prob[x]
        margs.append(m)
    domain = 1
    for m in margs:
        domain *= len(m)
    if domain != len(game.support):
        return False
    return all(game.prob[x] == math.prod(margs[t][x[t]] for t in range(k)) for x in game.support)


# --------------------------------------------------------------------------
# commands


def cmd_validate(args, out):
    base, game, _, _ = _assemble(args, False)
    problems = validate(game)
    out["game"] = _summary(game)
    out["violations"] = [str(v) for v in problems]
    return [_check("game is valid", not problems)]


def cmd_graph(args, out):
    _, game, _, _ = _assemble(args, False)
    graph = build_connection_graph(game)
    out["game"] = _summary(game)
    rows = []
    for (i, j), w in graph.weights.items():
        rows.append({"x": _symbols(game, graph.vertices[i]), "y": _symbols(game, graph.vertices[j]), "rho": w})
    out["graph"] = {
        "vertices": [_symbols(game, v) for v in graph.vertices],
        "weights": rows,
        "components": [[_symbols(game, graph.vertices[i]) for i in comp] for comp in graph.components],
        "component_count": len(graph.components),
        "rho_min": graph.rho_min,
    }
    if args.csv:
        with open(args.csv, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["x", "y", "rho"])
            for r in rows:
                writer.writerow([" ".join(map(str, r["x"])), " ".join(map(str, r["y"])), f"{r['rho'].numerator}/{r['rho'].denominator}"])
    problems = check_invariants(graph)
    out["invariant_problems"] = problems
    return [_check("connection graph invariants", not problems)]


def _spectral_section(game: Game, tol: float) -> tuple[dict, list[dict]]:
    graph = build_connection_graph(game)
    rep = spectral_report(graph, tol)
    section = {
        "lambda": rep.lambda2,
        "residual": rep.residual,
        "component_count": rep.component_count,
        "zero_multiplicity": rep.zero_multiplicity,
        "spectrum": [float(v) for v in rep.spectrum],
        "component_gaps": rep.component_gaps,
        "lower_bounds": rep.lower_bounds,
        "rho_min": graph.rho_min,
    }
    checks = [_check(c["name"], c["pass"], c.get("asserted", True)) for c in rep.checks]
    return section, checks


def cmd_spectral(args, out):
    _, game, _, _ = _assemble(args, False)
    out["game"] = _summary(game)
    section, checks = _spectral_section(game, args.tol)
    out["spectral"] = section
    return checks


def cmd_congestion(args, out):
    _, game, _, _ = _assemble(args, False)
    graph = build_connection_graph(game)
    out["game"] = _summary(game)
    if len(graph.components) != 1:
        out["congestion"] = {"note": "graph is disconnected; no path system exists", "component_count": len(graph.components)}
        return [_check("graph connected", False, asserted=False)]
    anchored = isinstance(game.predicate, AnchoredPredicate)
    paths = anchored_canonical_paths(graph) if anchored else shortest_canonical_paths(graph)
    validate_paths(graph, paths)
    cong = congestion(graph, paths)
    lam = spectral_report(graph, args.tol).lambda2
    worst = cong.worst_edge
    out["congestion"] = {
        "paths": paths.name,
        "zeta": cong.zeta,
        "inverse_zeta": 1 / cong.zeta,
        "worst_edge": None if worst is None else [_symbols(game, graph.vertices[v]) for v in worst],
        "max_path_length": paths.max_length,
        "lambda": lam,
    }
    checks = [_check("lambda >= 1/zeta", lam >= float(1 / cong.zeta) - args.tol)]
    if anchored:
        checks.append(_check("canonical path length <= 2k", paths.max_length <= 2 * game.k))
    return checks


def _value(game: Game, args):
    return game_value(game, args.method, args.budget, args.threads)


def cmd_value(args, out):
    _, game, _, _ = _assemble(args, False)
    out["game"] = _summary(game)
    try:
        res = _value(game, args)
    except BudgetExceeded as exc:
        part = exc.partial
        out["value"] = {
            "complete": False,
            "lower_bound": part.value,
            "enumerated_count": part.enumerated_count,
            "space": part.space,
            "message": str(exc),
        }
        return [_check("search within budget", False)]
    out["value"] = {
        "value": res.value,
        "method": res.method,
        "enumerated_count": res.enumerated_count,
        "space": res.space,
        "complete": True,
        "witness": strategy_to_dict(game, res.witness),
    }
    return []


def _bound_params_from_game(game: Game, args):
    res = _value(game, args)
    graph = build_connection_graph(game)
    rep = spectral_report(graph, args.tol)
    lam = rep.lambda2 if rep.lambda2 is not None else 0.0
    lam = min(max(lam, 0.0), 1.0)
    return res.value, lam, graph, rep


def _bound_dict(b: bd.Bound) -> dict:
    return {"value": b.value, "exponent": b.exponent, "guaranteed": b.guaranteed, "note": b.note}


def cmd_bound(args, out):
    out["log_base"] = "2 (natural exp)"
    explicit = [args.epsilon, args.lam, args.answer_count]
    checks = []
    if any(v is not None for v in explicit):
        if any(v is None for v in explicit):
            raise UsageError("explicit bounds need --epsilon, --lam and --answer-count together")
        if args.game is not None or args.gen is not None or any(kind == "anchor" for kind, _ in args.transforms):
            raise UsageError("explicit bound parameters cannot be combined with a game")
        reps = [v for kind, v in args.transforms if kind == "reps"]
        if len(reps) != 1:
            raise UsageError("bound needs exactly one --reps N (the repetition count)")
        n = reps[0]
        try:
            p = bd.BoundParams(args.epsilon, args.lam, n, args.answer_count, c=args.c)
        except bd.BoundError as exc:
            raise UsageError(str(exc)) from None
        out["params"] = {"epsilon": p.epsilon, "lambda": p.lam, "n": n, "answer_count": p.answer_count, "c": p.c}
        out["theorem_bound"] = _bound_dict(bd.theorem_bound(p))
        out["min_reps"] = bd.min_reps(p.epsilon, p.lam) if p.epsilon > 0 and p.lam > 0 else None
        return checks
    _, game, n, alpha = _assemble(args, True)
    if n is None:
        raise UsageError("bound needs --reps N (the repetition count)")
    val, lam, graph, rep = _bound_params_from_game(game, args)
    eps = 1 - val
    out["game"] = _summary(game)
    p = bd.BoundParams(eps, lam, n, game.answer_count, c=args.c, k=game.k, alpha=alpha, rho_min=graph.rho_min)
    out["params"] = {
        "value": val,
        "epsilon": eps,
        "lambda": lam,
        "n": n,
        "answer_count": game.answer_count,
        "c": args.c,
        "component_count": rep.component_count,
    }
    thm = bd.theorem_bound(p)
    out["theorem_bound"] = _bound_dict(thm)
    out["lambda_zero"] = lam <= args.tol
    out["min_reps"] = bd.min_reps(eps, lam) if eps > 0 and lam > args.tol else None
    cor = {}
    if _is_free(game):
        cor["free"] = _bound_dict(bd.corollary_bound(bd.FREE, p))
    if alpha is not None:
        cor["anchored"] = _bound_dict(bd.corollary_bound(bd.ANCHORED, p))
        certified = float(alpha) ** game.k / (8 * game.k)
        checks.append(_check("lambda >= alpha^k/(8k)", lam >= certified - args.tol))
        if thm.value and eps > 0:
            anch = bd.corollary_bound(bd.ANCHORED, p)
            checks.append(_check("theorem bound at measured lambda <= anchored bound", thm.value <= anch.value * (1 + 1e-12)))
    if rep.component_count == 1:
        cor["connected"] = _bound_dict(bd.corollary_bound(bd.CONNECTED, p))
    out["corollary_bounds"] = cor
    if rep.component_count > 1:
        out["components"] = _component_bounds(game, graph, n, args)
    if args.value_reps:
        seq = value_sequence(game, args.value_reps, args.method, args.budget, args.threads)
        measured = seq.values
        out["measured"] = {
            "values": measured,
            "decay_exponents": [bd.decay_exponent(v, i + 1) for i, v in enumerate(measured)],
            "largest_c": bd.largest_c(measured, eps, lam, game.answer_count) if measured else None,
            "truncated": seq.truncated,
            "reason": seq.reason,
        }
    return checks


def _component_bounds(game: Game, graph, n: int, args) -> list[dict]:
    """Per-component evaluation for a disconnected connection graph (reported only)."""
    rows = []
    for comp in graph.components:
        sub = restrict(game, [graph.vertices[i] for i in comp])
        row = {"vertices": [_symbols(game, graph.vertices[i]) for i in comp]}
        try:
            v = _value(sub, args).value
        except BudgetExceeded:
            row["value"] = None
            rows.append(row)
            continue
        row["value"] = v
        row["epsilon"] = 1 - v
        if len(comp) < 2:
            row["lambda"] = None
            row["bound"] = {"value": 1.0, "guaranteed": False, "note": "vacuous: single vertex"}
        else:
            lam = spectral_report(build_connection_graph(sub), args.tol).lambda2
            row["lambda"] = lam
            sp = bd.BoundParams(1 - v, min(max(lam, 0.0), 1.0), n, game.answer_count, c=args.c)
            row["bound"] = _bound_dict(bd.theorem_bound(sp))
        rows.append(row)
    return rows


def cmd_anchor(args, out):
    if not any(kind == "anchor" for kind, _ in args.transforms):
        raise UsageError("anchor needs --anchor ALPHA")
    # value law for the last anchoring step: val = 1 - (1-alpha)^k (1 - val(G))
    chain = list(args.transforms)
    last = max(i for i, (kind, _) in enumerate(chain) if kind == "anchor")
    args.transforms = chain[:last]
    _, before, _, _ = _assemble(args, False)
    alpha = chain[last][1]
    args.transforms = chain
    _, game, _, _ = _assemble(args, False)
    out["base"] = _summary(before)
    out["game"] = _summary(game)
    out["alpha"] = alpha
    try:
        vb, va = _value(before, args).value, _value(game, args).value
    except BudgetExceeded as exc:
        out["value"] = {"complete": False, "message": str(exc)}
        return [_check("search within budget", False)]
    expected = 1 - (1 - alpha) ** game.k * (1 - vb)
    out["value"] = {"base": vb, "anchored": va, "predicted": expected}
    return [_check("val(anchor) = 1 - (1-alpha)^k (1 - val)", va == expected)]


def cmd_repeat(args, out):
    chain = list(args.transforms)
    if not chain or chain[-1][0] != "reps":
        raise UsageError("repeat needs a trailing --reps N")
    n = chain[-1][1]
    args.transforms = chain[:-1]
    _, before, _, _ = _assemble(args, False)
    args.transforms = chain
    game = repeat(before, n)
    out["base"] = _summary(before)
    out["game"] = _summary(game)
    out["n"] = n
    try:
        vb, vr = _value(before, args).value, _value(game, args).value
    except BudgetExceeded as exc:
        out["value"] = {"complete": False, "message": str(exc)}
        return [_check("search within budget", False)]
    out["value"] = {"base": vb, "repeated": vr, "base_power": vb**n}
    return [
        _check("val(G^n) >= val(G)^n", vr >= vb**n),
        _check("val(G^n) <= val(G)", vr <= vb),
    ]


def cmd_roundsim(args, out):
    _, game, n, _ = _assemble(args, True)
    if n is None:
        raise UsageError("roundsim needs --reps N (the repetition count)")
    strategy = None
    if args.strategy is not None:
        strategy = parse_strategy_file(repeat(game, n), args.strategy)
    rep = pipeline(
        game,
        n,
        strategy=strategy,
        epsilon=args.epsilon,
        strategy_budget=args.strategy_budget,
        rounding_budget=args.rounding_budget,
        threads=args.threads,
    )
    ctx = rep.context
    s = rep.subset
    out["game"] = _summary(game)
    out["log_base"] = "2"
    out["strategy"] = {"provenance": rep.strategy_provenance, "value": rep.strategy_value}
    out["base_value"] = rep.base_value
    out["epsilon"] = rep.epsilon
    out["lambda"] = rep.lam
    out["events"] = {
        "p_W": ctx.p_w,
        "p_Wi": [ctx.events.p_wi(i) for i in range(n)],
        "p_WS": ctx.p_ws,
    }
    out["subset"] = {
        "S": [j + 1 for j in s.S],
        "status": s.status,
        "qualifies": s.qualifies,
        "loss": s.loss,
        "loss_target": rep.epsilon / 2,
        "t_cap": s.t_cap,
        "hypothesis_lhs": s.hypothesis_lhs,
        "hypothesis_rhs": s.hypothesis_rhs,
        "searched": s.searched,
    }
    out["m"] = ctx.m
    out["delta"] = rep.delta
    out["sqrt_delta"] = math.sqrt(rep.delta) if math.isfinite(rep.delta) else rep.delta
    out["independence"] = {
        "ok": rep.independence.ok,
        "cells_checked": rep.independence.checked,
        "counterexample": None if rep.independence.counterexample is None else repr(rep.independence.counterexample),
    }
    if rep.undefined:
        out["undefined"] = rep.undefined
    else:
        diag = rep.diagnostic
        out["diagnostic"] = diag
        ratio = float(diag) / rep.lam if rep.lam else None
        out["distance_bound_path"] = {
            "diagnostic_over_lambda": ratio,
            "sqrt_plus_linear": None if ratio is None else math.sqrt(ratio) + ratio,
            "average_distance": rep.average_distance,
        }
        out["coordinates"] = [
            {
                "i": c.i + 1,
                "lemma_term": c.lemma_term,
                "average_distance": c.dist.average_distance,
                "spread": c.dist.spread,
                "normalization": c.dist.g_bar_norm,
                "support_size": len(c.dist.keys),
                "single_shot_exact": c.single_exact,
                "single_shot_global": c.single_tilde,
            }
            for c in rep.coordinates
        ]
        out["single_shot"] = {
            "exact_conditional": rep.single_exact,
            "global": rep.single_tilde,
            "average_conditional_win": rep.ws_average,
            "question_weighted_conditional_win": rep.mu_average,
            "hidden_constant_target": 1 - float(rep.epsilon) / 2,
        }
        if args.csv:
            with open(args.csv, "w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(["i", "x", "distance"])
                for c in rep.coordinates:
                    for x, d in zip(game.support, c.dist.distances):
                        writer.writerow([c.i + 1, " ".join(map(str, game.question_symbols(x))), f"{d:.15g}"])
    return [_check(c["name"], c["pass"], c["asserted"]) for c in rep.checks()]


HANDLERS = {
    "validate": cmd_validate,
    "graph": cmd_graph,
    "spectral": cmd_spectral,
    "congestion": cmd_congestion,
    "value": cmd_value,
    "bound": cmd_bound,
    "anchor": cmd_anchor,
    "repeat": cmd_repeat,
    "roundsim": cmd_roundsim,
}


def run(argv: list[str]) -> tuple[int, str, argparse.Namespace]:
    """Execute one command; returns (exit code, report text, parsed args).

    Usage errors raise SystemExit(2) through argparse.
    """
    parser = build_parser()
    args = parser.parse_args(argv)
    out: dict = {"schema_version": SCHEMA_VERSION, "command": _command_echo(argv)}
    try:
        checks = HANDLERS[args.command](args, out)
    except UsageError as exc:
        parser.error(str(exc))
    except (GameFileError, GameError) as exc:
        out["error"] = str(exc)
        violations = getattr(exc, "violations", [])
        if violations:
            out["violations"] = [str(v) for v in violations]
        checks = [_check("input game is valid", False)]
    except ZeroMass as exc:
        out["error"] = str(exc)
        checks = [_check("conditioning events have positive mass", False)]
    out["checks"] = checks
    ok = all(c["pass"] for c in checks if c["asserted"])
    out["result"] = "pass" if ok else "fail"
    return (0 if ok else 1), render_report(out), args


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    code, text, args = run(argv)
    if args.out is not None:
        args.out.write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
