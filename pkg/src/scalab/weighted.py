"""Weighted de Bruijn automata and exact equivalence of rational-weighted
automata; the decision procedure for equality of stochastic global functions.

The pair automaton of an SCA reads a word over Q ∪ (Q×Q): first the 2k
leftmost input cells (the prologue), then pairs (input cell, output cell)
with the output lagging k cells behind. The weight of such a word is exactly
the probability that the one-step image of the input window carries the
output word, so equality of stochastic global functions reduces to weighted
language equivalence, which is decidable over the rationals by a span/basis
computation.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from .core import (Budget, DEFAULT_BUDGET, NotCfca, ResourceExhausted, Sca,
                   ScaError, canonicalize, format_fraction, is_deterministic,
                   iterate_sca, local_distribution, symbol_token, trim_unused)


@dataclass(frozen=True)
class PairWord:
    """Prologue of 2k input cells followed by (input, output) pairs."""

    prologue: tuple
    body: tuple  # of (input symbol, output symbol)


def encode_pair_word(a: Sca, v: tuple, u: tuple) -> PairWord:
    """The pair word whose weight is the probability that window v maps to u:
    v supplies the prologue and the input components, u the outputs."""
    a = canonicalize(a)
    ell = a.window
    if len(v) != len(u) + ell - 1:
        raise ScaError(f"need |v| = |u| + {ell - 1}, got {len(v)} and {len(u)}")
    return PairWord(tuple(v[:ell - 1]),
                    tuple(zip(v[ell - 1:], u)))


class WeightedAutomaton:
    """Finite automaton with Fraction weights over the pair alphabet.

    Stored in explicit transition-list form; `arcs[label][src]` is a list of
    (dst, weight) with strictly positive weights. The linear representation
    (initial vector, per-label matrices, final vector) is implicit in this
    encoding and is what the equivalence check walks over.
    """

    def __init__(self, labels, names, initial, finals, arcs):
        self.labels = tuple(labels)
        self.names = tuple(names)
        self.n = len(names)
        self.initial = initial
        self.finals = frozenset(finals)
        self.arcs = arcs

    def successors(self, label):
        return self.arcs.get(label, {})

    def weight_of(self, m: PairWord) -> Fraction:
        """Sum over accepting paths of the product of transition weights;
        0 when no path recognizes the word."""
        vec = {self.initial: Fraction(1)}
        labels = [("P", q) for q in m.prologue] + [("B", x, y) for x, y in m.body]
        for label in labels:
            arcs = self.arcs.get(label)
            if not arcs:
                return Fraction(0)
            nxt: dict = {}
            for src, w in vec.items():
                for dst, tw in arcs.get(src, ()):
                    nxt[dst] = nxt.get(dst, Fraction(0)) + w * tw
            if not nxt:
                return Fraction(0)
            vec = nxt
        return sum((w for s, w in vec.items() if s in self.finals), Fraction(0))

    def export_table(self) -> str:
        """Debug dump: one line per transition (state, symbol, state, weight)."""
        lines = []
        for label in self.labels:
            for src, outs in sorted(self.arcs.get(label, {}).items()):
                for dst, w in outs:
                    if label[0] == "P":
                        lab = symbol_token(label[1])
                    else:
                        lab = f"({symbol_token(label[1])},{symbol_token(label[2])})"
                    lines.append(f"{self.names[src]}\t{lab}\t{self.names[dst]}\t{format_fraction(w)}")
        return "\n".join(lines)


def _state_name(qw, rw=None):
    q = "".join(symbol_token(x) for x in qw) or "e"
    if rw is None:
        return q
    r = "".join(symbol_token(x) for x in rw) or "e"
    return f"{q}/{r}"


def pair_alphabet(a: Sca):
    """Labels of the pair automaton, tagged so that prologue letters cannot
    collide with (input, output) pairs when states are product symbols."""
    qs = a.states.symbols
    return tuple(("P", q) for q in qs) + tuple(
        ("B", x, y) for x in qs for y in qs)


def weighted_debruijn(a: Sca, budget: Budget = DEFAULT_BUDGET) -> WeightedAutomaton:
    """The weighted pair automaton: states are (Q-window, R-window) prefixes
    of length < window width, all transitions weigh 1/|R|.

    Initialization transitions consume a prologue input cell while guessing a
    random cell; main transitions slide the joint window and emit the pair
    (rightmost input, rule output). Every state except the empty prefix is
    accepting; for radius 0 the empty prefix is the whole automaton and is
    accepting too, so one-cell bodies are recognized.
    """
    a = canonicalize(a)
    k = a.radius
    ell = a.window
    nQ, nR = len(a.states), len(a.random)
    count = sum((nQ * nR) ** j for j in range(ell))
    if count > budget.max_states:
        raise ResourceExhausted(f"pair automaton would have {count} states")

    index = {}
    names = []
    for j in range(ell):
        for qw in itertools.product(a.states.symbols, repeat=j):
            for rw in itertools.product(a.random.symbols, repeat=j):
                index[(qw, rw)] = len(names)
                names.append(_state_name(qw, rw))
    w = Fraction(1, nR)
    qi, ri = a._indices(k)
    arcs: dict = {}

    def add(label, src, dst):
        arcs.setdefault(label, {}).setdefault(src, []).append((dst, w))

    for (qw, rw), src in index.items():
        j = len(qw)
        if j < ell - 1:
            for q in a.states.symbols:
                for r in a.random.symbols:
                    add(("P", q), src, index[(qw + (q,), rw + (r,))])
        else:
            for q in a.states.symbols:
                for r in a.random.symbols:
                    full_q, full_r = qw + (q,), rw + (r,)
                    out = a.table[(tuple(full_q[i] for i in qi),
                                   tuple(full_r[i] for i in ri))]
                    add(("B", q, out), src, index[(full_q[1:], full_r[1:])])
    i0 = index[((), ())]
    finals = set(index.values()) - {i0} if ell > 1 else {i0}
    return WeightedAutomaton(pair_alphabet(a), names, i0, finals, arcs)


def cfca_weighted(a: Sca, budget: Budget = DEFAULT_BUDGET) -> WeightedAutomaton:
    """Deterministic weighted automaton for a correlation-free rule: states
    are Q-prefixes only, prologue transitions weigh 1 and each main transition
    carries the local output probability. At most one positive-weight
    transition leaves a state per symbol, so weights multiply along the unique
    recognizing path."""
    if not a.cfca_flag:
        raise NotCfca("cfca_weighted requires V' = {0}")
    a = canonicalize(a)
    k = a.radius
    ell = a.window
    nQ = len(a.states)
    count = sum(nQ ** j for j in range(ell))
    if count > budget.max_states:
        raise ResourceExhausted(f"automaton would have {count} states")
    dist = local_distribution(a)
    qidx = tuple(p + k for p in a.read_v)

    index = {}
    names = []
    for j in range(ell):
        for qw in itertools.product(a.states.symbols, repeat=j):
            index[qw] = len(names)
            names.append(_state_name(qw))
    arcs: dict = {}

    def add(label, src, dst, w):
        arcs.setdefault(label, {}).setdefault(src, []).append((dst, w))

    for qw, src in index.items():
        j = len(qw)
        if j < ell - 1:
            for q in a.states.symbols:
                add(("P", q), src, index[qw + (q,)], Fraction(1))
        else:
            for q in a.states.symbols:
                full = qw + (q,)
                d = dist[tuple(full[i] for i in qidx)]
                for out, p in d.items():
                    add(("B", q, out), src, index[full[1:]], p)
    i0 = index[()]
    finals = set(index.values()) - {i0} if ell > 1 else {i0}
    return WeightedAutomaton(pair_alphabet(a), names, i0, finals, arcs)


def weight_of(w: WeightedAutomaton, m: PairWord) -> Fraction:
    return w.weight_of(m)


# ---------------------------------------------------------------------------
# equivalence over the rationals


def reduce_bisimulation(w: WeightedAutomaton) -> WeightedAutomaton:
    """Quotient by weighted forward bisimulation: states are merged when they
    are equi-final and give the same per-label weight into every class of the
    current partition. The quotient recognizes the same weighted series, so
    running the equivalence check on it is sound; it collapses the dead
    window components that de Bruijn states of product rules carry around."""
    part = [0 if s in w.finals else 1 for s in range(w.n)]
    nclasses = 2
    while True:
        sigs = {}
        for s in range(w.n):
            sig = [part[s]]
            for li, label in enumerate(w.labels):
                outs = w.arcs.get(label, {}).get(s)
                if outs:
                    agg: dict = {}
                    for dst, tw in outs:
                        c = part[dst]
                        agg[c] = agg.get(c, Fraction(0)) + tw
                    sig.append((li, tuple(sorted(agg.items()))))
            sigs[s] = tuple(sig)
        order: dict = {}
        new_part = []
        for s in range(w.n):
            key = sigs[s]
            if key not in order:
                order[key] = len(order)
            new_part.append(order[key])
        if len(order) == nclasses:
            break
        part, nclasses = new_part, len(order)
    if nclasses == w.n:
        return w
    reps: dict = {}
    for s in range(w.n):
        reps.setdefault(part[s], s)
    arcs: dict = {}
    for label in w.labels:
        srcs = w.arcs.get(label, {})
        out: dict = {}
        for c, rep in reps.items():
            outs = srcs.get(rep)
            if outs:
                agg: dict = {}
                for dst, tw in outs:
                    agg[part[dst]] = agg.get(part[dst], Fraction(0)) + tw
                out[c] = list(agg.items())
        if out:
            arcs[label] = out
    names = tuple(f"[{w.names[reps[c]]}]" for c in range(nclasses))
    finals = {part[s] for s in w.finals}
    return WeightedAutomaton(w.labels, names, part[w.initial], finals, arcs)


def _reduce(vec: dict, basis: list) -> dict:
    """Reduce a sparse vector against an echelon basis (pivot, vector)."""
    for pivot, bvec in basis:
        c = vec.get(pivot)
        if c:
            factor = c / bvec[pivot]
            for i, x in bvec.items():
                nv = vec.get(i, Fraction(0)) - factor * x
                if nv:
                    vec[i] = nv
                else:
                    vec.pop(i, None)
    return vec


def wa_equivalent(w1: WeightedAutomaton, w2: WeightedAutomaton) -> bool:
    """Exact equivalence of two rational-weighted automata.

    Walks the span of reachable joint weight vectors: start from the joint
    initial vector, close under the transition matrices of both automata, and
    keep a basis in echelon form. The automata are equivalent iff every basis
    vector gives the two sides the same final weight. The basis cannot exceed
    n1+n2 vectors, so this terminates after at most that many extensions.

    Both automata are first quotiented by weighted bisimulation, which
    preserves the recognized series and keeps the span dimension small.
    """
    if set(w1.labels) != set(w2.labels):
        raise ScaError("weighted automata have different alphabets")
    w1 = reduce_bisimulation(w1)
    w2 = reduce_bisimulation(w2)
    n1 = w1.n
    final1 = w1.finals
    final2 = w2.finals

    def final_gap(vec: dict) -> Fraction:
        acc = Fraction(0)
        for i, x in vec.items():
            if i < n1:
                if i in final1:
                    acc += x
            elif (i - n1) in final2:
                acc -= x
        return acc

    start = {w1.initial: Fraction(1), n1 + w2.initial: Fraction(1)}
    basis: list = []
    queue = [start]
    labels = w1.labels
    while queue:
        vec = _reduce(dict(queue.pop()), basis)
        if not vec:
            continue
        if final_gap(vec) != 0:
            return False
        pivot = min(vec)
        basis.append((pivot, vec))
        for label in labels:
            arcs1 = w1.arcs.get(label, {})
            arcs2 = w2.arcs.get(label, {})
            nxt: dict = {}
            for i, x in vec.items():
                outs = arcs1.get(i, ()) if i < n1 else ()
                for dst, tw in outs:
                    nxt[dst] = nxt.get(dst, Fraction(0)) + x * tw
                if i >= n1:
                    for dst, tw in arcs2.get(i - n1, ()):
                        j = n1 + dst
                        nxt[j] = nxt.get(j, Fraction(0)) + x * tw
            if nxt:
                queue.append(nxt)
    return True


# ---------------------------------------------------------------------------
# the equality decision


class Precheck(Enum):
    SOME_DETERMINISTIC = "some-deterministic"
    INCOMPATIBLE = "incompatible"
    COMPATIBLE = "compatible"


def prime_factors(n: int) -> frozenset:
    fs = set()
    d = 2
    while d * d <= n:
        while n % d == 0:
            fs.add(d)
            n //= d
        d += 1
    if n > 1:
        fs.add(n)
    return frozenset(fs)


def prime_factor_precheck(a: Sca, b: Sca) -> Precheck:
    """Necessary condition for equal stochastic global functions: two
    non-deterministic automata must share a prime factor of their random
    alphabet sizes. Purely arithmetic, so it runs before any construction."""
    if set(a.states.symbols) != set(b.states.symbols):
        raise ScaError("automata have different state alphabets")
    if is_deterministic(a) or is_deterministic(b):
        return Precheck.SOME_DETERMINISTIC
    if not (prime_factors(len(a.random)) & prime_factors(len(b.random))):
        return Precheck.INCOMPATIBLE
    return Precheck.COMPATIBLE


def _canonicalize_to(a: Sca, k: int) -> Sca:
    """Pad the declared neighborhoods to radius k (k >= current radius)."""
    from dataclasses import replace

    span = tuple(range(-k, k + 1))
    if a.v == span and a.v_prime == span:
        return a
    if k < a.radius:
        raise ScaError("cannot shrink the declared radius")
    return replace(a, v=span, v_prime=span)


def _table_signature(a: Sca):
    return (a.states.symbols, a.read_v, a.read_vp,
            tuple(sorted(a.table.items())))


def stochastic_equal(a: Sca, b: Sca, t: int = 1,
                     budget: Budget = DEFAULT_BUDGET) -> bool:
    """Decide whether the t-step stochastic global functions coincide.

    Pipeline: prime-factor precheck (a sound fast negative), iterate both
    automata to power t, drop coordinates the rules ignore, pad to a common
    radius, and compare the weighted pair automata for equivalence.

    Distinct state sets answer False outright: global functions over
    different state spaces cannot coincide.
    """
    if t < 1:
        raise ScaError("t must be >= 1")
    if set(a.states.symbols) != set(b.states.symbols):
        return False
    if (prime_factor_precheck(a, b) is Precheck.INCOMPATIBLE):
        return False
    a1 = trim_unused(canonicalize(a))
    b1 = trim_unused(canonicalize(b))
    if _table_signature(a1) == _table_signature(b1):
        return True  # identical explicit global functions
    if t > 1:
        a1 = trim_unused(iterate_sca(a1, t, budget))
        b1 = trim_unused(iterate_sca(b1, t, budget))
        if _table_signature(a1) == _table_signature(b1):
            return True
    k = max(a1.radius, b1.radius)
    a1 = _canonicalize_to(a1, k)
    b1 = _canonicalize_to(b1, k)
    return wa_equivalent(weighted_debruijn(a1, budget),
                         weighted_debruijn(b1, budget))
