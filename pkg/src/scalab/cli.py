"""Command-line interface: one subcommand per decision procedure or
construction, one machine-readable JSON document on stdout, a short human
summary on stderr.

Exit codes: 0 for a true/successful result, 1 for false, 2 for errors
(including usage), 3 for an exceeded enumeration budget. Rationals are
serialized as "p/q" strings throughout. Space-time diagrams render as plain
text or binary PGM (both byte-exact for fixed inputs), or as a PNG figure for
reports.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import asdict, is_dataclass
from fractions import Fraction

from . import core, ppt_pfa, simulation, symbolic, weighted
from .core import (Budget, FormatError, PeriodicConfig, ResourceExhausted,
                   ScaError, SpaceTime, Word, format_fraction, parse_sca,
                   symbol_token, to_document)

EXIT_TRUE, EXIT_FALSE, EXIT_ERROR, EXIT_EXHAUSTED = 0, 1, 2, 3


def _encode(obj):
    """Recursive JSON encoding: Fractions as "p/q", Words as records, symbols
    as canonical tokens."""
    if isinstance(obj, Fraction):
        return format_fraction(obj)
    if isinstance(obj, Word):
        return {"symbols": [symbol_token(s) for s in obj.symbols],
                "offset": obj.offset}
    if isinstance(obj, PeriodicConfig):
        return {"period": _encode(obj.period), "phase": obj.phase}
    if isinstance(obj, (core.Alphabet,)):
        return [symbol_token(s) for s in obj.symbols]
    if is_dataclass(obj) and not isinstance(obj, type):
        return {k: _encode(v) for k, v in asdict(obj).items()}
    if isinstance(obj, dict):
        return {_key(k): _encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_encode(v) for v in obj]
    if isinstance(obj, (str, int, float, bool)) or obj is None:
        return obj
    return str(obj)


def _key(k):
    if isinstance(k, str):
        return k
    if isinstance(k, tuple):
        return ",".join(symbol_token(x) if not isinstance(x, tuple) else _key(x)
                        for x in k)
    return str(k)


def _load_sca(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_sca(fh.read())


def _load_pfa(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        return ppt_pfa.parse_pfa(fh.read())


def _word(a, text: str, offset: int = 0) -> Word:
    mode = "comma" if any(len(symbol_token(s)) > 1 for s in a.states.symbols) \
        else "concat"
    toks = tuple(text.split(",")) if mode == "comma" else tuple(text)
    for t in toks:
        if t not in a.states:
            raise ScaError(f"symbol {t!r} is not a state")
    return Word(toks, offset)


def _rword(a, text: str) -> Word:
    mode = "comma" if any(len(symbol_token(s)) > 1 for s in a.random.symbols) \
        else "concat"
    toks = tuple(text.split(",")) if mode == "comma" else tuple(text)
    for t in toks:
        if t not in a.random:
            raise ScaError(f"symbol {t!r} is not a random symbol")
    return Word(toks, 0)


def _params(text: str) -> simulation.RescaleParams:
    try:
        m, t, z = (int(x) for x in text.split(","))
    except ValueError:
        raise FormatError(f"bad rescale parameters {text!r}: use m,t,z") from None
    return simulation.RescaleParams(m, t, z)


def _mapping(text: str) -> dict:
    """Parse 'a=b,c=d' or a JSON object."""
    text = text.strip()
    if text.startswith("{"):
        return dict(json.loads(text))
    out = {}
    for part in text.split(","):
        if "=" not in part:
            raise FormatError(f"bad mapping entry {part!r}: use from=to")
        src, dst = part.split("=", 1)
        out[src] = dst
    return out


# ---------------------------------------------------------------------------
# diagram rendering


def render_diagram(d: SpaceTime, style: str = "text") -> bytes:
    """Render a sampled diagram: one row per time step.

    text: symbol tokens per row, space-separated when multi-character.
    pgm:  binary P5, state index i mapped to level round(255*i/(|Q|-1)).
    Both are byte-exact functions of the diagram.
    """
    rows = [r.period.symbols for r in d.rows]
    if not rows:
        raise ScaError("empty diagram")
    if style == "text":
        toks = [[symbol_token(s) for s in row] for row in rows]
        sep = "" if all(len(t) == 1 for row in toks for t in row) else " "
        return ("\n".join(sep.join(row) for row in toks) + "\n").encode()
    if style == "pgm":
        symbols = sorted({s for row in rows for s in row}, key=symbol_token)
        order = {s: i for i, s in enumerate(symbols)}
        hi = max(1, len(symbols) - 1)
        w, h = len(rows[0]), len(rows)
        body = bytes(round(255 * order[s] / hi) for row in rows for s in row)
        return f"P5\n{w} {h}\n255\n".encode() + body
    raise ScaError(f"unknown style {style!r}")


def render_png(d: SpaceTime, path: str) -> None:
    """Report-style figure of the diagram via matplotlib."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    import numpy as np

    rows = [r.period.symbols for r in d.rows]
    symbols = sorted({s for row in rows for s in row}, key=symbol_token)
    order = {s: i for i, s in enumerate(symbols)}
    grid = np.array([[order[s] for s in row] for row in rows])
    fig, ax = plt.subplots(figsize=(max(3, grid.shape[1] / 8),
                                    max(2, grid.shape[0] / 8)))
    ax.imshow(grid, cmap="viridis", interpolation="nearest")
    ax.set_xlabel("cell")
    ax.set_ylabel("time")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


# ---------------------------------------------------------------------------
# subcommands


def _budget(args) -> Budget:
    return Budget(max_table=args.max_table, max_enum=args.max_enum,
                  max_states=args.max_states)


def cmd_prob(args, budget):
    a = _load_sca(args.sca)
    u = _word(a, args.window)
    k = core.canonicalize(a).radius
    target = _word(a, args.target, offset=u.offset + k * args.t)
    p = core.cylinder_prob(a, u, target, args.t, budget)
    return True, {"value": p}


def cmd_distribution(args, budget):
    a = _load_sca(args.sca)
    u = _word(a, args.window)
    dist = core.pushforward_distribution(a, u, args.t, budget)
    probs = {"".join(symbol_token(s) for s in w): p
             for w, p in sorted(dist.probs.items())}
    return True, {"offset": dist.offset, "probs": probs}


def cmd_simulate(args, budget):
    a = _load_sca(args.sca)
    cfg = PeriodicConfig(_word(a, args.config), args.phase)
    seed = args.seed if args.seed is not None else int(os.environ.get("SCA_SEED", "0"))
    d = core.sample_diagram(a, cfg, args.steps, seed, budget)
    rendered = render_diagram(d, "text").decode()
    if args.render:
        path = args.render
        if path.endswith(".png"):
            render_png(d, path)
        elif path.endswith(".pgm"):
            with open(path, "wb") as fh:
                fh.write(render_diagram(d, "pgm"))
        else:
            with open(path, "wb") as fh:
                fh.write(render_diagram(d, "text"))
    return True, {"seed": seed, "rows": rendered.splitlines(),
                  "rendered_to": args.render}


def cmd_deterministic(args, budget):
    a = _load_sca(args.sca)
    return core.is_deterministic(a), {}


def cmd_cfca(args, budget):
    a = _load_sca(args.sca)
    return core.is_cfca(a), {}


def cmd_equal(args, budget):
    a, b = _load_sca(args.a), _load_sca(args.b)
    pre = weighted.prime_factor_precheck(a, b)
    eq = weighted.stochastic_equal(a, b, args.t, budget)
    return eq, {"precheck": pre.value}


def cmd_nd_equal(args, budget):
    a, b = _load_sca(args.a), _load_sca(args.b)
    v = symbolic.ndet_equal(a, b, args.t, budget)
    return v.answer, {"witness": _encode(v.witness)}


def _verdict_cmd(fn):
    def run(args, budget):
        a = _load_sca(args.sca)
        v = fn(a, budget)
        return v.answer, {"witness": _encode(v.witness)}
    return run


def cmd_ppt_cfca(args, budget):
    a = _load_sca(args.sca)
    th = ppt_pfa.parse_threshold(args.threshold)
    if not isinstance(th, ppt_pfa.ExponentialThreshold):
        raise FormatError("this decision takes an exponential threshold (exp:a,l)")
    res = ppt_pfa.ppt_decide_cfca(a, args.x, args.y, args.z, th, budget)
    return res.answer, {"witness": _encode(res.witness), "detail": res.detail}


def cmd_ppt_sca(args, budget):
    a = _load_sca(args.sca)
    th = ppt_pfa.parse_threshold(args.threshold)
    if not isinstance(th, ppt_pfa.SuperexponentialThreshold):
        raise FormatError("this decision takes a slowly-decaying threshold (sup:t,c,d)")
    res = ppt_pfa.ppt_decide_sca(a, args.x, args.y, args.z, th, budget)
    return res.answer, {"witness": _encode(res.witness), "detail": res.detail}


def cmd_pfa_prob(args, budget):
    p = _load_pfa(args.pfa)
    u = tuple(args.word) if args.word else ()
    return True, {"value": ppt_pfa.pfa_accept_prob(p, u)}


def cmd_encode_pfa(args, budget):
    p = _load_pfa(args.pfa)
    return True, {"sca": to_document(ppt_pfa.encode_pfa(p))}


def cmd_rescale(args, budget):
    a = _load_sca(args.sca)
    out = simulation.rescale_sca(a, _params(args.params), budget)
    return True, {"sca": to_document(out)}


def cmd_restrict(args, budget):
    a = _load_sca(args.sca)
    inj = simulation.Injection(_mapping(args.map))
    try:
        out = simulation.check_restriction(a, inj)
    except simulation.StabilityError as exc:
        return False, {"error": str(exc), "witness": _encode(exc.witness)}
    return True, {"sca": to_document(out)}


def cmd_project(args, budget):
    a = _load_sca(args.sca)
    pi = simulation.Surjection(_mapping(args.map))
    try:
        out = simulation.check_projection(a, pi)
    except simulation.CompatibilityError as exc:
        return False, {"error": str(exc), "witness": _encode(exc.witness)}
    return True, {"sca": to_document(out)}


def cmd_simulates(args, budget):
    a, b = _load_sca(args.a), _load_sca(args.b)
    inj = simulation.Injection(_mapping(args.inject)) if args.inject else None
    surj = simulation.Surjection(_mapping(args.project)) if args.project else None
    ok = simulation.simulates(a, b, _params(args.pa), _params(args.pb),
                              (inj, surj), args.mode, budget)
    return ok, {}


def cmd_search_sim(args, budget):
    a, b = _load_sca(args.a), _load_sca(args.b)
    bounds = simulation.SearchBounds(args.max_m, args.max_t, args.max_z)
    res = simulation.search_simulation(a, b, bounds, args.mode, budget)
    if isinstance(res, simulation.NotFoundWithinBounds):
        return False, {"not_found_within_bounds": True,
                       "precheck_short_circuit": res.precheck_short_circuit}
    return True, {"witness": _encode(res)}


def cmd_cfca_host(args, budget):
    a = _load_sca(args.sca)
    host, inj = simulation.cfca_host(a)
    return True, {"host": to_document(host),
                  "injection": {symbol_token(k): symbol_token(v)
                                for k, v in inj.mapping.items()}}


def cmd_coupling(args, budget):
    a, b = _load_sca(args.a), _load_sca(args.b)
    w = _word(a, args.window)
    res = simulation.build_finite_coupling(a, b, w, args.n, budget)
    if isinstance(res, simulation.CouplingInfeasible):
        return False, {"infeasible_output": _encode(res.output),
                       "left": res.left_probability,
                       "right": res.right_probability}
    table = {f"{_key(v1)}|{_key(v2)}": p for (v1, v2), p in sorted(res.table.items())}
    return True, {"table": table,
                  "marginals_uniform": res.marginals_uniform,
                  "equal_output_mass": res.equal_output_mass}


def cmd_gadget(args, budget):
    f = _load_sca(args.sca)
    return True, {"sca": to_document(simulation.gadget(args.kind, f))}


def cmd_conserve(args, budget):
    a = _load_sca(args.sca)
    v = core.conservation_check(a, args.bound, args.t, budget)
    payload = {}
    if not v.conserving:
        payload = {"witness_input": _encode(v.witness_input),
                   "witness_output": _encode(v.witness_output),
                   "input_sum": v.input_sum, "output_sum": v.output_sum}
    return v.conserving, payload


def build_parser() -> argparse.ArgumentParser:
    limits = argparse.ArgumentParser(add_help=False)
    limits.add_argument("--max-table", type=int, default=core.DEFAULT_BUDGET.max_table)
    limits.add_argument("--max-enum", type=int, default=core.DEFAULT_BUDGET.max_enum)
    limits.add_argument("--max-states", type=int, default=core.DEFAULT_BUDGET.max_states)
    p = argparse.ArgumentParser(
        prog="scalab", parents=[limits],
        description="Exact decision procedures and constructions for "
                    "one-dimensional stochastic cellular automata.")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, **kw):
        sp = sub.add_parser(name, parents=[limits], **kw)
        sp.set_defaults(fn=fn)
        return sp

    sp = add("prob", cmd_prob, help="exact probability of a window image")
    sp.add_argument("--sca", required=True)
    sp.add_argument("--window", required=True)
    sp.add_argument("--target", required=True)
    sp.add_argument("--t", type=int, default=1)

    sp = add("distribution", cmd_distribution, help="full image distribution of a window")
    sp.add_argument("--sca", required=True)
    sp.add_argument("--window", required=True)
    sp.add_argument("--t", type=int, default=1)

    sp = add("simulate", cmd_simulate, help="sample a space-time diagram")
    sp.add_argument("--sca", required=True)
    sp.add_argument("--config", required=True, help="period word")
    sp.add_argument("--phase", type=int, default=0)
    sp.add_argument("--steps", type=int, default=10)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--render", default=None,
                    help="write diagram to file (.txt, .pgm or .png)")

    sp = add("deterministic", cmd_deterministic, help="is the rule deterministic?")
    sp.add_argument("--sca", required=True)

    sp = add("cfca", cmd_cfca, help="was the rule authored correlation-free?")
    sp.add_argument("--sca", required=True)

    sp = add("equal", cmd_equal, help="equality of stochastic global functions")
    sp.add_argument("--a", required=True)
    sp.add_argument("--b", required=True)
    sp.add_argument("--t", type=int, default=1)

    sp = add("nd-equal", cmd_nd_equal, help="equality of non-deterministic global functions")
    sp.add_argument("--a", required=True)
    sp.add_argument("--b", required=True)
    sp.add_argument("--t", type=int, default=1)

    for name, fn, hlp in (
            ("noisy", symbolic.is_noisy, "can any configuration reach any other in one step?"),
            ("surjective", symbolic.is_surjective, "is the dynamics surjective?"),
            ("injective", symbolic.is_injective, "is the dynamics injective?"),
            ("preinjective", symbolic.is_preinjective, "is the dynamics pre-injective?")):
        sp = add(name, _verdict_cmd(fn), help=hlp)
        sp.add_argument("--sca", required=True)

    sp = add("ppt-cfca", cmd_ppt_cfca,
             help="pattern probability threshold, correlation-free rules")
    sp.add_argument("--sca", required=True)
    sp.add_argument("--x", required=True)
    sp.add_argument("--y", required=True)
    sp.add_argument("--z", required=True)
    sp.add_argument("--threshold", required=True, help="exp:alpha,lambda")

    sp = add("ppt-sca", cmd_ppt_sca,
             help="pattern probability threshold, general rules")
    sp.add_argument("--sca", required=True)
    sp.add_argument("--x", required=True)
    sp.add_argument("--y", required=True)
    sp.add_argument("--z", required=True)
    sp.add_argument("--threshold", required=True, help="sup:theta,c,d")

    sp = add("pfa-prob", cmd_pfa_prob, help="acceptance probability of a word")
    sp.add_argument("--pfa", required=True)
    sp.add_argument("--word", default="")

    sp = add("encode-pfa", cmd_encode_pfa, help="embed a PFA into an SCA")
    sp.add_argument("--pfa", required=True)

    sp = add("rescale", cmd_rescale, help="pack, iterate and shift")
    sp.add_argument("--sca", required=True)
    sp.add_argument("--params", required=True, help="m,t,z")

    sp = add("restrict", cmd_restrict, help="restrict to a stable sub-alphabet")
    sp.add_argument("--sca", required=True)
    sp.add_argument("--map", required=True, help="new=host,... injection")

    sp = add("project", cmd_project, help="merge states through a compatible map")
    sp.add_argument("--sca", required=True)
    sp.add_argument("--map", required=True, help="state=target,... surjection")

    sp = add("simulates", cmd_simulates, help="verify a simulation at fixed parameters")
    sp.add_argument("--a", required=True)
    sp.add_argument("--b", required=True)
    sp.add_argument("--pa", default="1,1,0", help="m,t,z for the simulated side")
    sp.add_argument("--pb", default="1,1,0", help="m,t,z for the simulator")
    sp.add_argument("--inject", default=None)
    sp.add_argument("--project", default=None)
    sp.add_argument("--mode", choices=("D", "N", "S"), default="S")

    sp = add("search-sim", cmd_search_sim, help="bounded search for a simulation witness")
    sp.add_argument("--a", required=True)
    sp.add_argument("--b", required=True)
    sp.add_argument("--max-m", type=int, default=2)
    sp.add_argument("--max-t", type=int, default=2)
    sp.add_argument("--max-z", type=int, default=1)
    sp.add_argument("--mode", choices=("D", "N", "S"), default="S")

    sp = add("cfca-host", cmd_cfca_host, help="correlation-free host construction")
    sp.add_argument("--sca", required=True)

    sp = add("coupling", cmd_coupling, help="finite coupling of two random sources")
    sp.add_argument("--a", required=True)
    sp.add_argument("--b", required=True)
    sp.add_argument("--window", required=True)
    sp.add_argument("--n", type=int, default=0)

    sp = add("gadget", cmd_gadget, help="reduction gadgets from deterministic rules")
    sp.add_argument("--sca", required=True)
    sp.add_argument("--kind", choices=("surjectivity-lift", "square-noise"),
                    required=True)

    sp = add("conserve", cmd_conserve, help="number conservation on bounded supports")
    sp.add_argument("--sca", required=True)
    sp.add_argument("--bound", type=int, default=3)
    sp.add_argument("--t", type=int, default=1)

    return p


def dispatch(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_ERROR if exc.code else EXIT_TRUE
    budget = _budget(args)
    started = time.monotonic()
    try:
        ok, payload = args.fn(args, budget)
        status = "true" if ok else "false"
        code = EXIT_TRUE if ok else EXIT_FALSE
    except ResourceExhausted as exc:
        status, payload, code = "resource-exhausted", {"error": str(exc)}, EXIT_EXHAUSTED
    except (ScaError, OSError) as exc:
        status, payload, code = "error", {"error": str(exc)}, EXIT_ERROR
    ms = int((time.monotonic() - started) * 1000)
    doc = {"status": status, "payload": _encode(payload), "timing_ms": ms}
    json.dump(doc, sys.stdout, indent=1, ensure_ascii=False)
    sys.stdout.write("\n")
    print(f"{args.command}: {status} ({ms} ms)", file=sys.stderr)
    return code


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
