"""Probabilistic finite automata, their embedding into stochastic cellular
automata, and the two pattern-probability-threshold decision procedures.

The threshold problem asks whether some input window maps in one step onto a
pattern x y^n z with probability strictly above a threshold curve in n. It is
decidable for correlation-free rules against exponential curves (loop weights
in the deterministic pair automaton) and for general rules against
slowly-decaying curves with a computable limit (bounded enumeration plus
pumping of deterministic loops).
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

from .core import (Budget, DEFAULT_BUDGET, FormatError, Meter, NotCfca,
                   ResourceExhausted, Sca, ScaError, Word, canonicalize,
                   local_distribution, parse_fraction, trim_unused)

START, ARROW, CHECK, BOTTOM = "↦", "→", "✓", "⊥"

# a PFA accepts the empty word iff its initial state is final
EMPTY_WORD_ACCEPTS_IF_INITIAL_FINAL = True


@dataclass(frozen=True)
class Pfa:
    """Probabilistic finite automaton with row-stochastic rational matrices."""

    alphabet: tuple
    states: tuple
    initial: str
    final: frozenset
    matrices: dict  # letter -> {(q1, q2): Fraction}

    def __post_init__(self):
        for a in self.alphabet:
            m = self.matrices[a]
            for q1 in self.states:
                row = sum((m.get((q1, q2), Fraction(0)) for q2 in self.states),
                          Fraction(0))
                if row != 1:
                    raise ScaError(f"matrix for {a!r}: row {q1!r} sums to {row}, not 1")
                for q2 in self.states:
                    p = m.get((q1, q2), Fraction(0))
                    if not (0 <= p <= 1):
                        raise ScaError(f"matrix for {a!r}: entry out of [0,1]")


def make_pfa(alphabet, states, initial, final, matrices) -> Pfa:
    mats = {}
    states = tuple(states)
    for a, entries in matrices.items():
        m = {}
        for (q1, q2), p in entries.items():
            p = Fraction(p)
            if p:
                m[(q1, q2)] = p
        mats[a] = m
    return Pfa(tuple(alphabet), states, initial, frozenset(final), mats)


def parse_pfa(document: Union[str, dict]) -> Pfa:
    """Parse the external PFA description: `matrices` maps each letter to a
    row-major list of |Q|^2 rational strings."""
    if isinstance(document, str):
        try:
            doc = json.loads(document)
        except json.JSONDecodeError as exc:
            raise FormatError(f"line {exc.lineno}, col {exc.colno}: {exc.msg}") from None
    else:
        doc = document
    for key in ("alphabet", "states", "initial", "final", "matrices"):
        if key not in doc:
            raise FormatError(f"missing key {key!r}")
    states = tuple(doc["states"])
    alphabet = tuple(doc["alphabet"])
    if doc["initial"] not in states:
        raise FormatError(f"initial state {doc['initial']!r} unknown")
    for q in doc["final"]:
        if q not in states:
            raise FormatError(f"final state {q!r} unknown")
    n = len(states)
    mats = {}
    for a in alphabet:
        if a not in doc["matrices"]:
            raise FormatError(f"missing matrix for letter {a!r}")
        flat = doc["matrices"][a]
        if len(flat) != n * n:
            raise FormatError(f"matrix for {a!r} must have {n * n} entries")
        m = {}
        for i, q1 in enumerate(states):
            for j, q2 in enumerate(states):
                p = parse_fraction(flat[i * n + j])
                if p:
                    m[(q1, q2)] = p
        mats[a] = m
    try:
        return Pfa(alphabet, states, doc["initial"], frozenset(doc["final"]), mats)
    except ScaError as exc:
        raise FormatError(str(exc)) from None


def pfa_accept_prob(p: Pfa, u) -> Fraction:
    """Exact acceptance probability of a word, by vector-matrix products."""
    vec = {p.initial: Fraction(1)}
    for a in u:
        if a not in p.alphabet:
            raise ScaError(f"letter {a!r} not in the PFA alphabet")
        m = p.matrices[a]
        nxt: dict = {}
        for q1, w in vec.items():
            for (r1, r2), t in m.items():
                if r1 == q1:
                    nxt[r2] = nxt.get(r2, Fraction(0)) + w * t
        vec = nxt
    return sum((w for q, w in vec.items() if q in p.final), Fraction(0))


def encode_pfa(p: Pfa) -> Sca:
    """Embed the acceptance process into a one-step SCA.

    States are the PFA letters plus a start marker, an arrow, a check mark
    and an error symbol; the random alphabet is Q x {1..m} with m the lcm of
    the transition denominators. Each random pair (q, i) is read as a guess of
    the transition taken at that letter, with the guessed source uniform and
    the target distributed by the transition matrix. The pattern
    start arrow^n check then appears exactly with probability P(u)/|Q|^n on
    windows carrying start u check, and with probability 0 elsewhere.
    """
    markers = (START, ARROW, CHECK, BOTTOM)
    for a in p.alphabet:
        if a in markers:
            raise ScaError(f"PFA letter {a!r} collides with a marker state")
    m = 1
    for mat in p.matrices.values():
        for frac in mat.values():
            m = m * frac.denominator // math.gcd(m, frac.denominator)

    # tau(a, q, i): counts fill the target states in declared order
    tau = {}
    for a in p.alphabet:
        mat = p.matrices[a]
        for q in p.states:
            targets = []
            for q2 in p.states:
                cnt = mat.get((q, q2), Fraction(0)) * m
                targets.extend([q2] * int(cnt))
            assert len(targets) == m
            for i, q2 in enumerate(targets, start=1):
                tau[(a, q, i)] = q2

    states = tuple(p.alphabet) + markers
    rand = tuple((q, str(i)) for q in p.states for i in range(1, m + 1))
    letters = set(p.alphabet)
    finals = p.final
    initial = p.initial

    def rule(c, s):
        cm, c0 = c
        (qm, im), (q0, _i0) = s
        if c0 == START:
            return START
        if c0 in letters:
            gamma = initial if cm == START else qm
            return ARROW if q0 == tau[(c0, gamma, int(im))] else BOTTOM
        if c0 == CHECK:
            return CHECK if qm in finals else BOTTOM
        return BOTTOM

    from .core import make_sca

    return make_sca(states, rand, [-1, 0], [-1, 0], rule, name="encoded_pfa")


# ---------------------------------------------------------------------------
# thresholds


@dataclass(frozen=True)
class ExponentialThreshold:
    """theta(n) = alpha * lam^n with alpha > 0 and 0 < lam < 1."""

    alpha: Fraction
    lam: Fraction

    def __post_init__(self):
        if not (self.alpha > 0 and 0 < self.lam < 1):
            raise ScaError("need alpha > 0 and 0 < lambda < 1")

    def value(self, n: int) -> Fraction:
        return self.alpha * self.lam ** n


@dataclass(frozen=True)
class SuperexponentialThreshold:
    """theta(n) = theta + c/(n+1)^d: non-increasing, dominates every
    exponential decay, with the computable limit theta."""

    theta: Fraction
    c: Fraction
    d: int

    def __post_init__(self):
        if not (self.theta >= 0 and self.c > 0 and self.d >= 1):
            raise ScaError("need theta >= 0, c > 0, d >= 1")

    def value(self, n: int) -> Fraction:
        return self.theta + self.c / Fraction(n + 1) ** self.d


def parse_threshold(text: str):
    """CLI syntax: exp:alpha,lambda or sup:theta,c,d (rational strings)."""
    kind, _, rest = text.partition(":")
    parts = rest.split(",")
    if kind == "exp" and len(parts) == 2:
        return ExponentialThreshold(parse_fraction(parts[0]), parse_fraction(parts[1]))
    if kind == "sup" and len(parts) == 3:
        return SuperexponentialThreshold(parse_fraction(parts[0]),
                                         parse_fraction(parts[1]), int(parts[2]))
    raise FormatError(f"bad threshold {text!r}: use exp:a,l or sup:t,c,d")


@dataclass(frozen=True)
class LoopWitness:
    """Certified YES-instance of shape prefix.anchor.(loop.anchor)^pump.suffix."""

    prefix: tuple
    anchor: tuple
    loop: tuple
    suffix: tuple
    pump: int
    n: int
    probability: Fraction
    bound: Fraction

    def input_word(self) -> Word:
        body = self.prefix + self.anchor + (self.loop + self.anchor) * self.pump + self.suffix
        return Word(body, 0)


@dataclass(frozen=True)
class PptResult:
    answer: bool
    witness: Optional[object] = None
    detail: str = ""

    def __bool__(self):
        return self.answer


def _check_xyz(a: Sca, x, y, z):
    if len(a.states) < 4:
        raise ScaError("the threshold problem is posed for at least 4 states")
    if len({x, y, z}) != 3:
        raise ScaError("x, y, z must be three distinct states")
    for s in (x, y, z):
        if s not in a.states:
            raise ScaError(f"{s!r} is not a state")


# ---------------------------------------------------------------------------
# correlation-free decision (exponential thresholds)


def _cfca_debruijn(a: Sca):
    """Deterministic sliding-window structure: from a Q-window of length 2k,
    reading input q gives the output distribution of the completed window."""
    a = canonicalize(trim_unused(a))
    if not a.cfca_flag:
        raise NotCfca("this decision requires a correlation-free rule")
    dist = local_distribution(a)
    k = a.radius
    qidx = tuple(p + k for p in a.read_v)

    def out_dist(window_plus):  # length 2k+1
        return dist[tuple(window_plus[i] for i in qidx)]

    return a, k, out_dist


def ppt_decide_cfca(a: Sca, x, y, z, th: ExponentialThreshold,
                    budget: Budget = DEFAULT_BUDGET) -> PptResult:
    """Two-step decision on the deterministic pair automaton of a
    correlation-free rule: look for a short valid word beating the threshold,
    then for a pumpable valid loop whose per-step weight beats the decay rate.

    A YES comes with a loop witness whose exact probability is returned for
    re-validation; a NO reports the exhausted bounds.
    """
    a, k, out_dist = _cfca_debruijn(a)
    _check_xyz(a, x, y, z)
    ell = 2 * k + 1
    nstates = len(a.states) ** (ell - 1)
    short_p_max = nstates + 3  # body length of a short word
    meter = Meter(budget.max_enum)

    def expected(i, p):  # forced output at body position i of a length-p body
        if i == 1:
            return x
        return z if i == p else y

    # step 1: short valid words
    for prologue in itertools.product(a.states.symbols, repeat=ell - 1):
        stack = [(prologue, 1, Fraction(1), ())]
        while stack:
            window, depth, weight, inputs = stack.pop()
            if depth > short_p_max:
                continue
            for q in a.states.symbols:
                meter.charge()
                full = window + (q,)
                d = out_dist(full)
                nxt = full[1:]
                # continue the y-run (or open with x)
                sym = x if depth == 1 else y
                w2 = weight * d.get(sym, Fraction(0))
                if w2 > 0:
                    stack.append((nxt, depth + 1, w2, inputs + (q,)))
                # close with z, provided the body has length >= 3 (n >= 1)
                if depth >= 3:
                    wz = weight * d.get(z, Fraction(0))
                    n = depth - 2
                    if wz > 0 and wz > th.value(n):
                        wit = LoopWitness(prologue + inputs + (q,), (), (), (), 0,
                                          n, wz, th.value(n))
                        return PptResult(True, wit, "short word")
    # step 2: pumped loops. The de Bruijn structure is deterministic, so
    # weights along a fixed label path multiply and the loop's linear weight
    # (per-step geometric mean) against lambda decides pumpability.
    loops = _valid_loops(a, out_dist, y, nstates, meter)
    if loops:
        heads = _pattern_paths(a, out_dist, x, y, nstates + 2, meter, opening=True)
        tails = _pattern_paths(a, out_dist, z, y, nstates, meter, opening=False)
        for state, loop_list in loops.items():
            for w1, a_len, ins1 in heads.get(state, ()):
                for w2, b_len, ins2 in tails.get(state, ()):
                    for lw, kappa, insl in loop_list:
                        res = _pump(th, w1, w2, lw, kappa, a_len, b_len)
                        if res is not None:
                            q, n, prob = res
                            wit = LoopWitness(ins1, (), insl, ins2, q, n, prob,
                                              th.value(n))
                            return PptResult(True, wit, "pumped loop")
    return PptResult(False, None,
                     f"no short word up to body {short_p_max}, no loop with "
                     f"linear weight above {th.lam}")


def _valid_loops(a, out_dist, y, max_len, meter):
    """Positive-weight cycles whose outputs are all y, grouped by base state,
    keeping only linear weight > lambda candidates later."""
    ell = a.window
    loops: dict = {}
    for base in itertools.product(a.states.symbols, repeat=ell - 1):
        stack = [(base, Fraction(1), ())]
        while stack:
            window, weight, inputs = stack.pop()
            if len(inputs) >= max_len:
                continue
            for q in a.states.symbols:
                meter.charge()
                full = window + (q,)
                w2 = weight * out_dist(full).get(y, Fraction(0))
                if w2 <= 0:
                    continue
                nxt = full[1:]
                ins2 = inputs + (q,)
                if nxt == base:
                    loops.setdefault(base, []).append((w2, len(ins2), ins2))
                stack.append((nxt, w2, ins2))
    return loops


def _pattern_paths(a, out_dist, edge_sym, y, max_len, meter, opening):
    """Opening: paths emitting x y^(a-1) from any prologue, grouped by final
    state. Closing: paths emitting y^(b-1) z from each state, grouped by
    start state."""
    ell = a.window
    table: dict = {}
    starts = itertools.product(a.states.symbols, repeat=ell - 1)
    for base in starts:
        stack = [(base, Fraction(1), ())]
        while stack:
            window, weight, inputs = stack.pop()
            if len(inputs) >= max_len:
                continue
            for q in a.states.symbols:
                meter.charge()
                full = window + (q,)
                d = out_dist(full)
                nxt = full[1:]
                ins2 = inputs + (q,)
                if opening:
                    sym = edge_sym if len(inputs) == 0 else y
                    w2 = weight * d.get(sym, Fraction(0))
                    if w2 <= 0:
                        continue
                    if len(ins2) >= 2:
                        table.setdefault(nxt, []).append((w2, len(ins2), base + ins2))
                    stack.append((nxt, w2, ins2))
                else:
                    # tails: y's then a final z
                    wz = weight * d.get(edge_sym, Fraction(0))
                    if wz > 0:
                        table.setdefault(base, []).append((wz, len(ins2), ins2))
                    wy = weight * d.get(y, Fraction(0))
                    if wy > 0:
                        stack.append((nxt, wy, ins2))
    return table


def _pump(th: ExponentialThreshold, w1, w2, lw, kappa, a_len, b_len,
          max_iter: int = 1_000_000):
    """Smallest pump count q >= 1 with w1*lw^q*w2 > alpha*lam^(a+b-2+q*kappa),
    when the loop's linear weight beats lam; None otherwise."""
    if lw <= th.lam ** kappa:
        return None
    prob = w1 * lw * w2
    n = a_len + b_len - 2 + kappa
    q = 1
    while q <= max_iter:
        if n >= 1 and prob > th.value(n):
            return q, n, prob
        prob *= lw
        n += kappa
        q += 1
    return None


# ---------------------------------------------------------------------------
# general decision (superexponential thresholds)


def threshold_horizon(a: Sca, th: SuperexponentialThreshold) -> int:
    """A length K such that every window longer than K either beats the
    threshold within the horizon or factors through a pumpable deterministic
    loop: the maximum of the decay crossover of c/(n+1)^d against
    (1-1/|R|^l)^(n/e) and twice the loop-free word bound."""
    a = canonicalize(trim_unused(a))
    ell = a.window
    nQ, nR = len(a.states), len(a.random)
    e = ell * (ell + nQ ** ell)
    loop_bound = 2 * (ell + nQ ** ell)
    beta = 1 - Fraction(1, nR ** ell)
    if beta == 0:
        return loop_bound
    d = th.d
    # ratio test: g(j) = c / ((j+1)e)^d / beta^j increases once
    # ((j+1)/(j+2))^d >= beta, and g(j) > 1 certifies theta(m) > mu^m beyond je
    j = 0
    while (Fraction(j + 1, j + 2)) ** d < beta:
        j += 1
        if j > 10 ** 6:
            raise ResourceExhausted("threshold horizon search diverged")
    while th.c / Fraction((j + 1) * e) ** d <= beta ** j:
        j += 1
        if j > 10 ** 6:
            raise ResourceExhausted("threshold horizon search diverged")
    return max(j * e, loop_bound)


def _det_windows(a: Sca):
    """Q-windows whose output does not depend on the random word."""
    det = {}
    for (qw, _rw), out in a.table.items():
        prev = det.get(qw)
        if prev is None:
            det[qw] = out
        elif prev != out:
            det[qw] = False
    return {qw: out for qw, out in det.items() if out is not False}


def ppt_decide_sca(a: Sca, x, y, z, th: SuperexponentialThreshold,
                   budget: Budget = DEFAULT_BUDGET) -> PptResult:
    """Decision for arbitrary rules against a slowly-decaying threshold.

    Searches input windows in increasing length with exact incremental
    weights, pruning branches whose mass already fell to the threshold's
    limit; any closure beating the threshold is a direct YES, and a closure
    above the limit is checked for a deterministic pumpable loop. Windows
    longer than the computed horizon cannot contribute anything new, so
    exhausting the search is a NO.
    """
    a = canonicalize(trim_unused(a))
    _check_xyz(a, x, y, z)
    k = a.radius
    ell = a.window
    K = threshold_horizon(a, th)
    n_max = K + len(a.states) ** ell
    meter = Meter(budget.max_enum)
    det = _det_windows(a)
    qi, ri = a._indices(k)
    nR = len(a.random)
    theta = th.theta

    def advance(vec, window, out_sym):
        nxt: dict = {}
        qw = tuple(window[i] for i in qi)
        for suffix, w in vec.items():
            for r in a.random.symbols:
                meter.charge()
                full_r = suffix + (r,)
                if a.table[(qw, tuple(full_r[i] for i in ri))] == out_sym:
                    key = full_r[1:]
                    nxt[key] = nxt.get(key, Fraction(0)) + w / nR
        return nxt

    def warmup_states():
        # r-cells left of the first output window marginalize uniformly
        vec = {(): Fraction(1)}
        for _ in range(ell - 1):
            vec = {suf + (r,): w / nR for suf, w in vec.items()
                   for r in a.random.symbols}
        return vec

    try:
        # depth-first over input words; outputs forced to x y^... with a
        # closing z tried at every eligible depth. Stack entries carry the
        # full committed input word and the weight vector over r-suffixes.
        init = warmup_states()
        stack = [(prologue, init) for prologue in
                 itertools.product(a.states.symbols, repeat=ell - 1)]
        while stack:
            full_inputs, vec = stack.pop()
            body = len(full_inputs) - (ell - 1)
            if body > n_max + 1:
                continue
            window = full_inputs[-(ell - 1):] if ell > 1 else ()
            for q in a.states.symbols:
                win_full = window + (q,)
                ins2 = full_inputs + (q,)
                if body >= 2:  # closing z: the body becomes x y^(body-1) z
                    vz = advance(vec, win_full, z)
                    prob = sum(vz.values(), Fraction(0))
                    n = body - 1
                    if prob > th.value(n):
                        wit = LoopWitness(ins2, (), (), (), 0, n, prob,
                                          th.value(n))
                        return PptResult(True, wit, "direct")
                    if prob > theta:
                        pumped = _try_pump(a, th, det, k, ell, ins2, n, prob,
                                           x, y, z)
                        if pumped is not None:
                            return PptResult(True, pumped, "pumped loop")
                sym = x if body == 0 else y
                vy = advance(vec, win_full, sym)
                if sum(vy.values(), Fraction(0)) > theta:
                    stack.append((ins2, vy))
    except ResourceExhausted as exc:
        raise ResourceExhausted(f"{exc} (computed horizon K={K})") from None
    return PptResult(False, None, f"exhausted windows up to n={n_max} (K={K})")


def _try_pump(a, th, det, k, ell, u, n, prob, x, y, z):
    """Look for a deterministic loop inside the y-run of u = input word whose
    pumping keeps the probability while the threshold decays below it."""
    L = len(u)
    max_shift = k + len(a.states) ** ell
    for s1 in range(L):
        for shift in range(max(1, k + 1), max_shift + 1):
            s2 = s1 + shift
            if s2 + k > L:
                break
            if u[s1:s1 + k] != u[s2:s2 + k]:
                continue
            # windows fully inside the looping span must be deterministic
            # and must produce y (they sit strictly inside the y-run)
            starts = range(s1, s2 - k) if k > 0 else range(s1, s2)
            if not starts:
                continue
            ok = True
            for t in starts:
                if t < 1 or t > n:  # output index t must be a y position
                    ok = False
                    break
                qw = tuple(u[t + i] for i in range(ell))
                qkey = tuple(qw[p + k] for p in a.read_v)
                if det.get(qkey) != y:
                    ok = False
                    break
            if not ok:
                continue
            kappa = shift
            # pump until the threshold sinks below the (constant) probability
            extra = 1
            while extra <= 1_000_000:
                n2 = n + extra * kappa
                if prob > th.value(n2):
                    return LoopWitness(u[:s1], u[s1:s1 + k], u[s1 + k:s2],
                                       u[s2 + k:], 1 + extra, n2, prob,
                                       th.value(n2))
                extra += 1
    return None
