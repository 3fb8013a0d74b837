"""Syntax and exact semantics of one-dimensional stochastic cellular automata.

A stochastic cellular automaton (SCA) is a quintuple (Q, R, V, V', f): a state
alphabet Q, a random-symbol alphabet R, two integer neighborhoods V and V',
and a total local rule f mapping (Q-word over V, R-word over V') to a state.
One syntactic object yields three dynamics: deterministic (fix the random
input), non-deterministic (quantify over it) and stochastic (draw it uniformly
and independently at every step).

All probabilities are exact rationals (`fractions.Fraction`); no floating
point enters any decision path. Enumeration sizes are guarded by an explicit
`Budget` and overruns raise `ResourceExhausted`, never truncate silently.
"""

from __future__ import annotations

import itertools
import json
import math
import random as _random
from dataclasses import dataclass, replace
from fractions import Fraction
from functools import cached_property
from typing import Callable, Iterable, Mapping, Optional, Sequence, Union

Symbol = Union[str, tuple]

RESERVED_CHARS = ("|", ",")


class ScaError(ValueError):
    """Base class for validation and format errors."""


class FormatError(ScaError):
    """A document does not conform to the external SCA/PFA format."""


class NotCfca(ScaError):
    """Operation requires a correlation-free automaton (V' = {0})."""


class NotDeterministic(ScaError):
    """Operation requires a deterministic automaton."""


class ResourceExhausted(RuntimeError):
    """An explicit enumeration budget was exceeded."""


@dataclass(frozen=True)
class Budget:
    """Hard limits for the exhaustive enumerations.

    max_table  - largest rule table that may be materialized
    max_enum   - largest number of enumeration steps in one operation
    max_states - largest automaton / subset construction
    max_period - largest periodic configuration (lcm of periods)
    """

    max_table: int = 2_000_000
    max_enum: int = 20_000_000
    max_states: int = 500_000
    max_period: int = 100_000


DEFAULT_BUDGET = Budget()


class Meter:
    """Counts enumeration steps against a limit."""

    def __init__(self, limit: int):
        self.limit = limit
        self.used = 0

    def charge(self, n: int = 1) -> None:
        self.used += n
        if self.used > self.limit:
            raise ResourceExhausted(
                f"enumeration budget exceeded ({self.used} > {self.limit})")


# ---------------------------------------------------------------------------
# alphabets, words, configurations


@dataclass(frozen=True)
class Alphabet:
    """Ordered alphabet of distinct tokens; the order fixes every canonical
    enumeration (lexicographic products, rank intervals, document output)."""

    symbols: tuple

    def __post_init__(self):
        if not self.symbols:
            raise ScaError("alphabet must be non-empty")
        if len(set(self.symbols)) != len(self.symbols):
            raise ScaError("alphabet has duplicate tokens")

    @cached_property
    def index(self) -> dict:
        return {s: i for i, s in enumerate(self.symbols)}

    def __len__(self) -> int:
        return len(self.symbols)

    def __contains__(self, s) -> bool:
        return s in self.index

    def __iter__(self):
        return iter(self.symbols)

    def words(self, length: int) -> Iterable[tuple]:
        return itertools.product(self.symbols, repeat=length)


@dataclass(frozen=True)
class Word:
    """Finite word together with the absolute position of its first symbol."""

    symbols: tuple
    offset: int = 0

    def __len__(self) -> int:
        return len(self.symbols)

    def positions(self) -> range:
        return range(self.offset, self.offset + len(self.symbols))


def word(text, offset: int = 0) -> Word:
    """Build a Word from a string of single-character tokens or any iterable."""
    return Word(tuple(text), offset)


@dataclass(frozen=True)
class PeriodicConfig:
    """Bi-infinite configuration repeating `period`; cell x holds
    period[(x - phase) mod len]."""

    period: Word
    phase: int = 0

    def __post_init__(self):
        if len(self.period) < 1:
            raise ScaError("period must be non-empty")

    def cell(self, x: int):
        p = self.period.symbols
        return p[(x - self.phase) % len(p)]

    def aligned(self) -> "PeriodicConfig":
        """Equivalent configuration with phase 0."""
        if self.phase % len(self.period) == 0:
            return PeriodicConfig(Word(self.period.symbols, 0), 0)
        p = self.period.symbols
        n = len(p)
        rot = tuple(p[(x - self.phase) % n] for x in range(n))
        return PeriodicConfig(Word(rot, 0), 0)


@dataclass(frozen=True)
class WordDistribution:
    """Exact distribution over equal-length words at a common offset."""

    offset: int
    probs: Mapping[tuple, Fraction]

    def __post_init__(self):
        total = sum(self.probs.values(), Fraction(0))
        if total != 1:
            raise ScaError(f"distribution sums to {total}, not 1")
        lengths = {len(w) for w in self.probs}
        if len(lengths) > 1:
            raise ScaError("support words have mixed lengths")
        for p in self.probs.values():
            if not (0 < p <= 1):
                raise ScaError("probabilities must lie in (0,1]")

    def prob(self, symbols: tuple) -> Fraction:
        return self.probs.get(tuple(symbols), Fraction(0))


@dataclass(frozen=True)
class SpaceTime:
    """Sampled space-time diagram; row t+1 = F(row t, randomness row t)."""

    rows: tuple
    randomness: tuple


# ---------------------------------------------------------------------------
# the automaton


@dataclass(frozen=True, eq=True)
class Sca:
    """A 1D stochastic cellular automaton.

    `v` / `v_prime` are the declared neighborhoods; `read_v` / `read_vp` are
    the coordinates the stored table actually keys on (always subsets of the
    declared ones). Canonicalization pads the declared neighborhoods to
    {-k,..,k} without touching the table, so padding never blows up storage.

    cfca_flag records whether the automaton was authored with V' = {0}
    (correlation-free); it is preserved by canonicalization since padding
    destroys the syntactic shape but not the semantics.
    """

    states: Alphabet
    random: Alphabet
    v: tuple
    v_prime: tuple
    read_v: tuple
    read_vp: tuple
    table: Mapping
    cfca_flag: bool
    values: Optional[Mapping] = None
    name: str = ""

    def __post_init__(self):
        if not self.v or not self.v_prime:
            raise ScaError("neighborhoods must be non-empty")
        if set(self.read_v) - set(self.v) or set(self.read_vp) - set(self.v_prime):
            raise ScaError("read coordinates must lie in the declared neighborhoods")

    # -- basic geometry

    @property
    def radius(self) -> int:
        return max(abs(p) for p in self.v + self.v_prime)

    @property
    def window(self) -> int:
        """Canonical window width 2k+1."""
        return 2 * self.radius + 1

    def is_canonical(self) -> bool:
        k = self.radius
        span = tuple(range(-k, k + 1))
        return self.v == span and self.v_prime == span

    # -- rule evaluation on canonical windows

    def rule(self, qword: tuple, rword: tuple):
        """Rule value for support-keyed words (over read_v / read_vp)."""
        return self.table[(qword, rword)]

    def _indices(self, k: int):
        qi = tuple(p + k for p in self.read_v)
        ri = tuple(p + k for p in self.read_vp)
        return qi, ri

    def __repr__(self):
        return (f"Sca({self.name or 'anonymous'}, |Q|={len(self.states)}, "
                f"|R|={len(self.random)}, V={list(self.v)}, V'={list(self.v_prime)})")


def make_sca(states: Sequence, random_symbols: Sequence, v: Sequence[int],
             v_prime: Sequence[int], fn: Union[Callable, Mapping],
             name: str = "", values: Optional[Mapping] = None) -> Sca:
    """Construct an SCA from a rule function or an explicit table.

    A callable `fn` receives (q-word over v, r-word over v_prime) and must
    return a state; it is tabulated over the full domain.
    """
    Q = Alphabet(tuple(states))
    R = Alphabet(tuple(random_symbols))
    v = tuple(sorted(v))
    vp = tuple(sorted(v_prime))
    if len(set(v)) != len(v) or len(set(vp)) != len(vp):
        raise ScaError("neighborhood coordinates must be distinct")
    if callable(fn):
        table = {}
        for qw in Q.words(len(v)):
            for rw in R.words(len(vp)):
                out = fn(qw, rw)
                if out not in Q:
                    raise ScaError(f"rule output {out!r} not a state")
                table[(qw, rw)] = out
    else:
        table = dict(fn)
        expected = len(Q) ** len(v) * len(R) ** len(vp)
        if len(table) != expected:
            raise ScaError("rule table is not total")
        for (qw, rw), out in table.items():
            if out not in Q:
                raise ScaError(f"rule output {out!r} not a state")
    cfca = vp == (0,)
    return Sca(Q, R, v, vp, v, vp, table, cfca, values, name)


# ---------------------------------------------------------------------------
# document format


def _token_mode(tokens) -> str:
    return "concat" if all(isinstance(t, str) and len(t) == 1 for t in tokens) else "comma"


def _split_tokens(text: str, alphabet: Alphabet, mode: str, where: str) -> tuple:
    if mode == "comma":
        parts = tuple(text.split(","))
    else:
        parts = tuple(text)
    for p in parts:
        if p not in alphabet:
            raise FormatError(f"{where}: symbol {p!r} not in declared alphabet")
    return parts


def _join_tokens(symbols: tuple, mode: str) -> str:
    toks = [symbol_token(s) for s in symbols]
    return ",".join(toks) if mode == "comma" else "".join(toks)


def symbol_token(s: Symbol) -> str:
    """Canonical printable token for a (possibly product) symbol; components
    are joined with ';' so tokens never contain the reserved characters."""
    if isinstance(s, str):
        return s
    return "(" + ";".join(symbol_token(x) for x in s) + ")"


def parse_fraction(text) -> Fraction:
    if isinstance(text, Fraction):
        return text
    if isinstance(text, int):
        return Fraction(text)
    try:
        return Fraction(str(text))
    except (ValueError, ZeroDivisionError) as exc:
        raise FormatError(f"bad rational {text!r}: {exc}") from None


def format_fraction(x: Fraction) -> str:
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}" if x.denominator != 1 else str(x.numerator)


def _check_tokens(tokens, what: str):
    seen = set()
    for t in tokens:
        if not isinstance(t, str) or not t:
            raise FormatError(f"{what}: tokens must be non-empty strings")
        if any(c in t for c in RESERVED_CHARS):
            raise FormatError(f"{what}: token {t!r} contains a reserved character")
        if t in seen:
            raise FormatError(f"{what}: duplicate token {t!r}")
        seen.add(t)


def parse_sca(document: Union[str, dict]) -> Sca:
    """Parse the external JSON description of an SCA.

    Accepts either the explicit `rule` table (with optional `default`) or
    the correlation-free `local_distribution` form, which is compiled to a
    random alphabet of size lcm of the denominators.
    """
    if isinstance(document, str):
        try:
            doc = json.loads(document)
        except json.JSONDecodeError as exc:
            raise FormatError(f"line {exc.lineno}, col {exc.colno}: {exc.msg}") from None
    else:
        doc = document
    if not isinstance(doc, dict):
        raise FormatError("top-level document must be an object")

    for key in ("states", "neighborhood"):
        if key not in doc:
            raise FormatError(f"missing key {key!r}")
    states = doc["states"]
    _check_tokens(states, "states")
    Q = Alphabet(tuple(states))
    v = tuple(doc["neighborhood"])
    if not v or len(set(v)) != len(v) or list(v) != sorted(v):
        raise FormatError("neighborhood must be a sorted list of distinct integers")

    name = doc.get("name", "")
    values = None
    if "values" in doc:
        values = {}
        for tok, val in doc["values"].items():
            if tok not in Q:
                raise FormatError(f"values: unknown state {tok!r}")
            if not isinstance(val, int) or val < 0:
                raise FormatError(f"values: {tok!r} must map to a nonnegative integer")
            values[tok] = val

    if "local_distribution" in doc:
        return _parse_cfca_form(doc, Q, v, name, values)

    for key in ("random", "random_neighborhood", "rule"):
        if key not in doc:
            raise FormatError(f"missing key {key!r}")
    _check_tokens(doc["random"], "random")
    R = Alphabet(tuple(doc["random"]))
    vp = tuple(doc["random_neighborhood"])
    if not vp or len(set(vp)) != len(vp) or list(vp) != sorted(vp):
        raise FormatError("random_neighborhood must be a sorted list of distinct integers")

    qmode = _token_mode(Q.symbols)
    rmode = _token_mode(R.symbols)
    table = {}
    for key, out in doc["rule"].items():
        if "|" not in key:
            raise FormatError(f"rule key {key!r}: expected 'qword|rword'")
        lhs, rhs = key.split("|", 1)
        qw = _split_tokens(lhs, Q, qmode, f"rule key {key!r}")
        rw = _split_tokens(rhs, R, rmode, f"rule key {key!r}")
        if len(qw) != len(v) or len(rw) != len(vp):
            raise FormatError(f"rule key {key!r}: pattern lengths do not match neighborhoods")
        if out not in Q:
            raise FormatError(f"rule entry {key!r}: output {out!r} not a state")
        table[(qw, rw)] = out

    total = len(Q) ** len(v) * len(R) ** len(vp)
    if len(table) < total:
        default = doc.get("default")
        if default is None:
            missing = _first_missing(Q, R, v, vp, table)
            raise FormatError(f"rule not total: no entry for {missing} and no default")
        if default not in Q:
            raise FormatError(f"default {default!r} not a state")
        for qw in Q.words(len(v)):
            for rw in R.words(len(vp)):
                table.setdefault((qw, rw), default)
    return Sca(Q, R, v, vp, v, vp, table, vp == (0,), values, name)


def _first_missing(Q, R, v, vp, table):
    for qw in Q.words(len(v)):
        for rw in R.words(len(vp)):
            if (qw, rw) not in table:
                return f"{_join_tokens(qw, _token_mode(Q.symbols))}|" \
                       f"{_join_tokens(rw, _token_mode(R.symbols))}"
    return "?"


def _parse_cfca_form(doc, Q, v, name, values):
    qmode = _token_mode(Q.symbols)
    dists = {}
    for key, dist in doc["local_distribution"].items():
        qw = _split_tokens(key, Q, qmode, f"local_distribution key {key!r}")
        if len(qw) != len(v):
            raise FormatError(f"local_distribution key {key!r}: wrong pattern length")
        probs = {}
        for tok, ptext in dist.items():
            if tok not in Q:
                raise FormatError(f"local_distribution {key!r}: unknown state {tok!r}")
            p = parse_fraction(ptext)
            if not (0 <= p <= 1):
                raise FormatError(f"local_distribution {key!r}: probability out of range")
            if p > 0:
                probs[tok] = p
        if sum(probs.values(), Fraction(0)) != 1:
            raise FormatError(f"local_distribution {key!r}: probabilities do not sum to 1")
        dists[qw] = probs
    expected = len(Q) ** len(v)
    if len(dists) != expected:
        raise FormatError("local_distribution is not total over neighborhood words")

    m = 1
    for probs in dists.values():
        for p in probs.values():
            m = m * p.denominator // math.gcd(m, p.denominator)
    R = Alphabet(tuple(str(i) for i in range(m)))
    table = {}
    for qw, probs in dists.items():
        outs = []
        for state in Q.symbols:  # canonical fill: declared state order
            if state in probs:
                outs.extend([state] * int(probs[state] * m))
        assert len(outs) == m
        for i, out in enumerate(outs):
            table[(qw, (str(i),))] = out
    return Sca(Q, R, tuple(v), (0,), tuple(v), (0,), table, True, values, name)


def to_document(a: Sca) -> dict:
    """Serialize back to the external JSON form (read-support neighborhoods)."""
    read_v = a.read_v or (0,)
    read_vp = a.read_vp or (0,)
    qmode = _token_mode([symbol_token(s) for s in a.states])
    rmode = _token_mode([symbol_token(s) for s in a.random])
    rule = {}
    for qw in itertools.product(a.states.symbols, repeat=len(read_v)):
        for rw in itertools.product(a.random.symbols, repeat=len(read_vp)):
            key_q = qw if a.read_v else ()
            key_r = rw if a.read_vp else ()
            out = a.table[(key_q, key_r)]
            rule[f"{_join_tokens(qw, qmode)}|{_join_tokens(rw, rmode)}"] = symbol_token(out)
    doc = {
        "states": [symbol_token(s) for s in a.states],
        "random": [symbol_token(s) for s in a.random],
        "neighborhood": list(read_v),
        "random_neighborhood": list(read_vp),
        "rule": rule,
    }
    if a.name:
        doc["name"] = a.name
    if a.values is not None:
        doc["values"] = {symbol_token(s): int(x) for s, x in a.values.items()}
    return doc


# ---------------------------------------------------------------------------
# canonical form and support trimming


def canonicalize(a: Sca) -> Sca:
    """Pad both neighborhoods to {-k,..,k}; the stored table is untouched, so
    the stochastic global function is unchanged and storage does not grow."""
    if a.is_canonical():
        return a
    k = a.radius
    span = tuple(range(-k, k + 1))
    return replace(a, v=span, v_prime=span)


def _dependent_coords(table, side: int, arity: int):
    """Indices of coordinates (on q-side 0 / r-side 1) the table depends on."""
    dependent = []
    for i in range(arity):
        seen = {}
        dep = False
        for (qw, rw), out in table.items():
            w = qw if side == 0 else rw
            reduced = (qw[:i] + qw[i + 1:], rw) if side == 0 else (qw, rw[:i] + rw[i + 1:])
            prev = seen.get(reduced)
            if prev is None:
                seen[reduced] = out
            elif prev != out:
                dep = True
                break
        if dep:
            dependent.append(i)
    return dependent


def trim_unused(a: Sca) -> Sca:
    """Drop table coordinates the rule provably ignores.

    The stochastic global function is unchanged; the effective radius may
    shrink, which keeps the de Bruijn constructions small. cfca_flag is
    preserved (it reflects the as-authored shape).
    """
    qdep = _dependent_coords(a.table, 0, len(a.read_v))
    rdep = _dependent_coords(a.table, 1, len(a.read_vp))
    if len(qdep) == len(a.read_v) and len(rdep) == len(a.read_vp):
        return a
    new_rv = tuple(a.read_v[i] for i in qdep)
    new_rvp = tuple(a.read_vp[i] for i in rdep)
    new_table = {}
    for (qw, rw), out in a.table.items():
        key = (tuple(qw[i] for i in qdep), tuple(rw[i] for i in rdep))
        new_table[key] = out
    # declared neighborhoods shrink to the support hull (but stay non-empty)
    v = new_rv or (0,)
    vp = new_rvp or (0,)
    trimmed = replace(a, v=v, v_prime=vp, read_v=new_rv, read_vp=new_rvp,
                      table=new_table)
    # a drop can expose further independent coordinates
    return trim_unused(trimmed) if (len(qdep) < len(a.read_v) or len(rdep) < len(a.read_vp)) else trimmed


# ---------------------------------------------------------------------------
# classification


def is_deterministic(a: Sca) -> bool:
    """True iff the rule output never depends on the random word."""
    seen = {}
    for (qw, _rw), out in a.table.items():
        prev = seen.get(qw)
        if prev is None:
            seen[qw] = out
        elif prev != out:
            return False
    return True


def is_cfca(a: Sca) -> bool:
    return a.cfca_flag


def local_distribution(a: Sca) -> dict:
    """For a CFCA, the map from neighborhood words to output distributions:
    value(u)(g) = #{r in R : f(u, r) = g} / |R|."""
    if not a.cfca_flag:
        raise NotCfca("local_distribution requires V' = {0}")
    counts: dict = {}
    nR = len(a.random)
    arity = len(a.read_vp)  # 0 if the rule ignores randomness, else 1
    for qw in itertools.product(a.states.symbols, repeat=len(a.read_v)):
        dist: dict = {}
        if arity == 0:
            dist[a.table[(qw, ())]] = Fraction(1)
        else:
            for r in a.random.symbols:
                out = a.table[(qw, (r,))]
                dist[out] = dist.get(out, Fraction(0)) + Fraction(1, nR)
        counts[qw] = dist
    return counts


# ---------------------------------------------------------------------------
# one-step and multi-step semantics


def apply_window(a: Sca, u: Word, s: Word) -> Word:
    """Apply one step on a finite window: output cell j is the rule at
    absolute position j+k, so the result has length |u|-2k at offset+k."""
    a = canonicalize(a)
    k = a.radius
    n = len(u)
    if len(s) != n:
        raise ScaError(f"window length mismatch: |u|={n}, |s|={len(s)}")
    if n < 2 * k + 1:
        raise ScaError(f"window too short: need at least {2 * k + 1} cells")
    for sym in u.symbols:
        if sym not in a.states:
            raise ScaError(f"symbol {sym!r} not a state")
    for sym in s.symbols:
        if sym not in a.random:
            raise ScaError(f"symbol {sym!r} not a random symbol")
    qi, ri = a._indices(k)
    uu, ss = u.symbols, s.symbols
    out = tuple(
        a.table[(tuple(uu[j + i] for i in qi), tuple(ss[j + i] for i in ri))]
        for j in range(n - 2 * k)
    )
    return Word(out, u.offset + k)


def step_periodic(a: Sca, c: PeriodicConfig, s: PeriodicConfig,
                  budget: Budget = DEFAULT_BUDGET) -> PeriodicConfig:
    """One synchronous step on a periodic configuration with a periodic
    randomness row; the result period is the lcm of the input periods."""
    a = canonicalize(a)
    pc, ps = len(c.period), len(s.period)
    L = pc * ps // math.gcd(pc, ps)
    if L > budget.max_period:
        raise ResourceExhausted(f"period {L} exceeds bound {budget.max_period}")
    out = tuple(
        a.table[(tuple(c.cell(x + p) for p in a.read_v),
                 tuple(s.cell(x + p) for p in a.read_vp))]
        for x in range(L)
    )
    return PeriodicConfig(Word(out, 0), 0)


def _needed_chain(a: Sca, targets: Sequence[int], t: int):
    """Cell positions needed at each intermediate step to determine `targets`
    after t steps, plus the per-layer randomness positions."""
    rv, rvp = a.read_v, a.read_vp
    need_q = [sorted(set(targets))]
    for _ in range(t):
        prev = need_q[-1]
        need_q.append(sorted({z + p for z in prev for p in rv}))
    need_q.reverse()  # need_q[i] = cells of row i required, row 0 = input
    need_r = []
    for i in range(1, t + 1):
        need_r.append(sorted({z + p for z in need_q[i] for p in rvp}))
    return need_q, need_r


def _evolve(a: Sca, row: dict, layers: Sequence[dict], need_q) -> dict:
    """Drive `row` (pos -> state) through len(layers) steps, keeping only the
    positions listed in need_q per step."""
    rv, rvp = a.read_v, a.read_vp
    for i, layer in enumerate(layers, start=1):
        nxt = {}
        for z in need_q[i]:
            key = (tuple(row[z + p] for p in rv), tuple(layer[z + p] for p in rvp))
            nxt[z] = a.table[key]
        row = nxt
    return row


def iterate_sca(a: Sca, t: int, budget: Budget = DEFAULT_BUDGET) -> Sca:
    """The t-step automaton: same states, random alphabet R^t (one product
    symbol carries the t layers at a cell), neighborhoods {-kt,..,kt}. Its
    one-step stochastic global function equals the t-step function of `a`."""
    if t < 1:
        raise ScaError("t must be >= 1")
    a = canonicalize(a)
    if t == 1:
        return a
    k = a.radius
    need_q, need_r = _needed_chain(a, [0], t)
    qcells = need_q[0]
    rcells = sorted(set().union(*[set(c) for c in need_r]))
    nQ, nR = len(a.states), len(a.random)
    size = nQ ** len(qcells) * (nR ** t) ** len(rcells)
    if size > budget.max_table:
        raise ResourceExhausted(f"iterate table would have {size} entries")

    rt_symbols = tuple(itertools.product(a.random.symbols, repeat=t))
    table = {}
    for qw in itertools.product(a.states.symbols, repeat=len(qcells)):
        row0 = dict(zip(qcells, qw))
        for rw in itertools.product(rt_symbols, repeat=len(rcells)):
            omega = dict(zip(rcells, rw))
            layers = [
                {p: omega[p][i] for p in need_r[i]}
                for i in range(t)
            ]
            out = _evolve(a, row0, layers, need_q)[0]
            table[(qw, rw)] = out
    K = k * t
    span = tuple(range(-K, K + 1)) if K > 0 else (0,)
    return Sca(a.states, Alphabet(rt_symbols), span, span,
               tuple(qcells), tuple(rcells), table,
               cfca_flag=(K == 0), values=a.values,
               name=f"{a.name}^{t}" if a.name else "")


def _one_step_distribution(a: Sca, symbols: tuple, meter: Meter) -> dict:
    """Distribution of the (|u|-2k)-cell image of a window, by exhaustive
    enumeration over the randomness cells that matter."""
    k = a.radius
    n = len(symbols)
    out_pos = list(range(k, n - k))
    need_r = sorted({z + p for z in out_pos for p in a.read_vp})
    rv, rvp = a.read_v, a.read_vp
    count = len(a.random) ** len(need_r)
    meter.charge(count)
    weight = Fraction(1, count)
    dist: dict = {}
    table = a.table
    for rw in itertools.product(a.random.symbols, repeat=len(need_r)):
        layer = dict(zip(need_r, rw))
        img = tuple(
            table[(tuple(symbols[z + p] for p in rv),
                   tuple(layer[z + p] for p in rvp))]
            for z in out_pos
        )
        dist[img] = dist.get(img, Fraction(0)) + weight
    return dist


def pushforward_distribution(a: Sca, u: Word, t: int = 1,
                             budget: Budget = DEFAULT_BUDGET) -> WordDistribution:
    """Exact distribution of the t-step image of the window u.

    Computed layer by layer: the one-step image distribution of u, then the
    pushforward of each support word at t-1 steps, convolved. This is the
    reference oracle for every probability in the system.
    """
    if t < 1:
        raise ScaError("t must be >= 1")
    a = canonicalize(a)
    k = a.radius
    if len(u) < 2 * k * t + 1:
        raise ScaError(f"window of length {len(u)} too short for t={t} (needs {2 * k * t + 1})")
    for sym in u.symbols:
        if sym not in a.states:
            raise ScaError(f"symbol {sym!r} not a state")
    meter = Meter(budget.max_enum)
    cache: dict = {}

    def push(symbols: tuple, steps: int) -> dict:
        key = (symbols, steps)
        if key in cache:
            return cache[key]
        first = _one_step_distribution(a, symbols, meter)
        if steps == 1:
            cache[key] = first
            return first
        acc: dict = {}
        for mid, p in first.items():
            for out, q in push(mid, steps - 1).items():
                acc[out] = acc.get(out, Fraction(0)) + p * q
        cache[key] = acc
        return acc

    dist = push(u.symbols, t)
    return WordDistribution(u.offset + k * t, dist)


def cylinder_prob(a: Sca, u: Word, target: Word, t: int = 1,
                  budget: Budget = DEFAULT_BUDGET) -> Fraction:
    """Exact probability that the t-step image of window u equals target."""
    a = canonicalize(a)
    k = a.radius
    if len(target) != len(u) - 2 * k * t:
        raise ScaError(f"target length {len(target)} != {len(u)} - 2*{k}*{t}")
    dist = pushforward_distribution(a, u, t, budget)
    return dist.prob(target.symbols)


# ---------------------------------------------------------------------------
# sampling

RNG_NOTE = ("Sampling uses random.Random (Mersenne Twister); cells are drawn "
            "row-major over the period, index = randrange(|R|) into the "
            "declared order of the random alphabet.")


def sample_diagram(a: Sca, c: PeriodicConfig, steps: int, seed: int,
                   budget: Budget = DEFAULT_BUDGET) -> SpaceTime:
    """Sample a space-time diagram; bit-reproducible for fixed (a, c, steps,
    seed). Each randomness row is drawn cell-wise uniformly over R, one value
    per period cell."""
    if steps < 0:
        raise ScaError("steps must be >= 0")
    a = canonicalize(a)
    rng = _random.Random(seed)
    cur = c.aligned()
    L = len(cur.period)
    rows = [cur]
    rrows = []
    nR = len(a.random)
    syms = a.random.symbols
    for _ in range(steps):
        rrow = PeriodicConfig(Word(tuple(syms[rng.randrange(nR)] for _ in range(L)), 0), 0)
        rrows.append(rrow)
        cur = step_periodic(a, cur, rrow, budget)
        rows.append(cur)
    return SpaceTime(tuple(rows), tuple(rrows))


def estimate_cylinder_prob(a: Sca, u: Word, target: Word, t: int,
                           samples: int, seed: int) -> Fraction:
    """Monte-Carlo frequency of `target` over seeded window samples; used only
    to cross-check the exact enumeration, never inside a decision."""
    a = canonicalize(a)
    k = a.radius
    n = len(u)
    rng = _random.Random(seed)
    syms = a.random.symbols
    nR = len(syms)
    hits = 0
    tgt = target.symbols
    for _ in range(samples):
        cur = u
        for _layer in range(t):
            rword = Word(tuple(syms[rng.randrange(nR)] for _ in range(len(cur))), cur.offset)
            cur = apply_window(a, cur, rword)
        if cur.symbols == tgt:
            hits += 1
    return Fraction(hits, samples)


# ---------------------------------------------------------------------------
# number conservation


@dataclass(frozen=True)
class ConservationVerdict:
    conserving: bool
    witness_input: Optional[Word] = None
    witness_output: Optional[Word] = None
    input_sum: Optional[int] = None
    output_sum: Optional[int] = None

    def __bool__(self):
        return self.conserving


def _state_values(a: Sca) -> dict:
    if a.values is not None:
        return dict(a.values)
    try:
        return {s: int(s) for s in a.states}
    except (TypeError, ValueError):
        raise ScaError("conservation check needs integer-valued states "
                       "(declare `values` in the document)") from None


def _image_set(a: Sca, row: dict, out_pos, meter: Meter):
    """All positive-probability images of the cells `out_pos` of a finite
    window; per-cell supports for CFCA, randomness enumeration otherwise."""
    rv, rvp = a.read_v, a.read_vp
    if a.cfca_flag:
        per_cell = []
        for z in out_pos:
            qw = tuple(row[z + p] for p in rv)
            if rvp:
                outs = sorted({a.table[(qw, (r,))] for r in a.random.symbols},
                              key=a.states.index.__getitem__)
            else:
                outs = [a.table[(qw, ())]]
            per_cell.append(outs)
        total = 1
        for outs in per_cell:
            total *= len(outs)
        meter.charge(total)
        return [dict(zip(out_pos, combo)) for combo in itertools.product(*per_cell)]
    need_r = sorted({z + p for z in out_pos for p in rvp})
    meter.charge(len(a.random) ** len(need_r))
    images = set()
    for rw in itertools.product(a.random.symbols, repeat=len(need_r)):
        layer = dict(zip(need_r, rw))
        img = tuple(
            a.table[(tuple(row[z + p] for p in rv), tuple(layer[z + p] for p in rvp))]
            for z in out_pos
        )
        images.add(img)
    return [dict(zip(out_pos, img)) for img in sorted(images)]


def _sum_dp(a: Sca, row: dict, out_lo: int, out_hi: int, values: dict,
            meter: Meter) -> dict:
    """Achievable output-value sums of cells out_lo..out_hi with an exemplar
    randomness word per sum. Scans randomness positions left to right keeping
    only (window suffix, partial sum), so it is exact but never enumerates
    full randomness words."""
    rv, rvp = a.read_v, a.read_vp
    table = a.table
    if not rvp:
        s = sum(values[table[(tuple(row[z + p] for p in rv), ())]]
                for z in range(out_lo, out_hi + 1))
        return {s: ()}
    mn, mx = min(rvp), max(rvp)
    W = mx - mn + 1
    ridx = tuple(q - mn for q in rvp)
    p_lo, p_hi = out_lo + mn, out_hi + mx
    states = {((), 0): ()}
    for p in range(p_lo, p_hi + 1):
        z = p - mx
        nxt: dict = {}
        for (suffix, acc), prefix in states.items():
            for r in a.random.symbols:
                meter.charge()
                win = (suffix + (r,))[-W:]
                acc2 = acc
                if z >= out_lo:
                    qw = tuple(row[z + q] for q in rv)
                    rw = tuple(win[i] for i in ridx)
                    acc2 = acc + values[table[(qw, rw)]]
                key = (win if p < p_hi else (), acc2)
                if key not in nxt:
                    nxt[key] = prefix + (r,)
        states = nxt
    return {acc: prefix for (_suf, acc), prefix in states.items()}


def conservation_check(a: Sca, support_bound: int, t: int = 1,
                       budget: Budget = DEFAULT_BUDGET) -> ConservationVerdict:
    """Exhaustively check that every finite configuration with support inside
    a window of `support_bound` cells keeps its cell-value sum, almost surely,
    after t steps. Returns the first violation as a witness."""
    if support_bound < 1 or t < 1:
        raise ScaError("support_bound and t must be >= 1")
    a = canonicalize(a)
    values = _state_values(a)
    zeros = [s for s in a.states if values[s] == 0]
    if not zeros:
        raise ScaError("no zero-valued background state")
    bg = zeros[0]
    k = a.radius
    meter = Meter(budget.max_enum)

    # the all-background window must map to background deterministically,
    # otherwise infinite sums are not even defined
    bg_q = tuple(bg for _ in a.read_v)
    for rw in itertools.product(a.random.symbols, repeat=len(a.read_vp)):
        meter.charge()
        if a.table[(bg_q, rw)] != bg:
            return ConservationVerdict(False, Word((bg,) * a.window),
                                       Word((a.table[(bg_q, rw)],)), 0, None)

    B = support_bound
    for w in itertools.product(a.states.symbols, repeat=B):
        target = sum(values[s] for s in w)
        base = dict(zip(range(B), w))
        if t == 1 and not a.cfca_flag:
            out_lo, out_hi = -k, B - 1 + k
            full = {p: base.get(p, bg) for p in range(out_lo - k, out_hi + k + 1)}
            sums = _sum_dp(a, full, out_lo, out_hi, values, meter)
            bad = [s for s in sums if s != target]
            if bad:
                got = bad[0]
                rword = sums[got]
                layer = dict(zip(range(out_lo + min(a.read_vp), out_hi + max(a.read_vp) + 1), rword))
                out = tuple(
                    a.table[(tuple(full[z + p] for p in a.read_v),
                             tuple(layer[z + p] for p in a.read_vp))]
                    for z in range(out_lo, out_hi + 1)
                )
                return ConservationVerdict(False, Word(w, 0), Word(out, out_lo),
                                           target, got)
            continue
        frontier = [base]
        for step in range(t):
            lo2, hi2 = -k * (step + 1), B - 1 + k * (step + 1)
            out_pos = list(range(lo2, hi2 + 1))
            nxt = []
            for row in frontier:
                # pad with background: cells outside the previous active range
                # evolve from all-background windows, verified stable above
                full = {p: row.get(p, bg)
                        for p in range(lo2 - k, hi2 + k + 1)}
                nxt.extend(_image_set(a, full, out_pos, meter))
            seen = set()
            frontier = []
            for row in nxt:
                key = tuple(sorted(row.items()))
                if key not in seen:
                    seen.add(key)
                    frontier.append(row)
            if len(frontier) > budget.max_states:
                raise ResourceExhausted("conservation frontier too large")
        for row in frontier:
            got = sum(values[s] for s in row.values())
            if got != target:
                lo2 = min(row)
                out = tuple(row[p] for p in sorted(row))
                return ConservationVerdict(False, Word(w, 0), Word(out, lo2),
                                           target, got)
    return ConservationVerdict(True)
