"""Rescaling and trimming transformations, the simulation relations at fixed
parameters, bounded witness search, the correlation-free host construction,
finite couplings of random sources, and the reduction gadgets.

Rescaling <m,t,z> packs cells in blocks of m, iterates t steps and shifts by
z; restriction runs an automaton on a stable sub-alphabet and projection
quotients by a compatible merging of states. A simulation witness is a pair of
rescalings plus a trim under which the two global functions coincide (in the
deterministic, non-deterministic or stochastic sense). The simulated side is
never trimmed, only rescaled.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .core import (Budget, DEFAULT_BUDGET, Alphabet, Meter, NotDeterministic,
                   ResourceExhausted, Sca, ScaError, Word, canonicalize,
                   is_deterministic, trim_unused, _evolve, _needed_chain)
from .weighted import (Precheck, _canonicalize_to, prime_factor_precheck,
                       stochastic_equal)


class StabilityError(ScaError):
    """The sub-alphabet is not stable under the dynamics."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class CompatibilityError(ScaError):
    """The merging map is not compatible with the dynamics."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


@dataclass(frozen=True)
class RescaleParams:
    m: int = 1
    t: int = 1
    z: int = 0

    def __post_init__(self):
        if self.m < 1 or self.t < 1:
            raise ScaError("packing and iteration counts must be >= 1")


@dataclass
class Injection:
    """Injective map from a sub-state-set into the states of the host."""

    mapping: dict

    def __post_init__(self):
        vals = list(self.mapping.values())
        if len(set(vals)) != len(vals):
            raise ScaError("injection is not injective")

    def inverse(self) -> dict:
        return {v: k for k, v in self.mapping.items()}


@dataclass
class Surjection:
    """Total map merging states; surjective onto its set of values."""

    mapping: dict


# ---------------------------------------------------------------------------
# packing


def pack_word(w: Word, m: int) -> Word:
    """Group symbols into blocks of m; blocks become single super-symbols."""
    if m < 1:
        raise ScaError("block size must be >= 1")
    if m == 1:
        return w
    if len(w) % m:
        raise ScaError(f"length {len(w)} not divisible by {m}")
    blocks = tuple(w.symbols[i:i + m] for i in range(0, len(w), m))
    return Word(blocks, w.offset // m)


def unpack_word(w: Word, m: int) -> Word:
    if m == 1:
        return w
    flat = tuple(x for block in w.symbols for x in block)
    return Word(flat, w.offset * m)


# ---------------------------------------------------------------------------
# rescaling


def _block_symbols(base: Alphabet, m: int, t: int):
    """All super-symbols of (R^m)^t shape, collapsing trivial nesting."""
    if m == 1:
        layer = base.symbols
    else:
        layer = tuple(itertools.product(base.symbols, repeat=m))
    if t == 1:
        return layer
    return tuple(itertools.product(layer, repeat=t))


def _layer_cell(sym, i: int, j: int, m: int, t: int):
    block = sym if t == 1 else sym[i]
    return block if m == 1 else block[j]


def _rescaled_table(a: Sca, p: RescaleParams, state_filter=None,
                    budget: Budget = DEFAULT_BUDGET):
    """Core of rescaling: the packed, shifted t-iterate tabulated over the
    cell positions it actually depends on. With a state filter, inputs range
    over the filtered super-states only and any output escaping the filter
    raises StabilityError (this fuses restriction into the construction, so
    the unrestricted intermediate table is never materialized)."""
    a = trim_unused(canonicalize(a))
    m, t, z = p.m, p.t, p.z
    out_cells = [z + j for j in range(m)]
    need_q, need_r = _needed_chain(a, out_cells, t)
    qcells = need_q[0]
    qblocks = sorted({pos // m for pos in qcells})
    rblocks = sorted({pos // m for layer in need_r for pos in layer})

    state_syms = _block_symbols(a.states, m, 1)
    rand_syms = _block_symbols(a.random, m, t)
    inputs = state_syms if state_filter is None else tuple(state_filter)

    size = len(inputs) ** len(qblocks) * len(rand_syms) ** len(rblocks)
    if size > budget.max_table:
        raise ResourceExhausted(f"rescaled table would have {size} entries")

    def unpack_state(sym):
        return (sym,) if m == 1 else tuple(sym)

    table = {}
    filt = set(inputs) if state_filter is not None else None
    for qw in itertools.product(inputs, repeat=len(qblocks)):
        row = {}
        for b, sym in zip(qblocks, qw):
            for j, val in enumerate(unpack_state(sym)):
                row[b * m + j] = val
        for rw in itertools.product(rand_syms, repeat=len(rblocks)):
            layers = []
            for i in range(t):
                layer = {}
                for b, sym in zip(rblocks, rw):
                    for j in range(m):
                        layer[b * m + j] = _layer_cell(sym, i, j, m, t)
                layers.append({pos: layer[pos] for pos in need_r[i]})
            final = _evolve(a, row, layers, need_q)
            out = tuple(final[c] for c in out_cells)
            out_sym = out[0] if m == 1 else out
            if filt is not None and out_sym not in filt:
                raise StabilityError(
                    "restricted states are not stable under the rescaled map",
                    witness=(qw, rw, out_sym))
            table[(qw, rw)] = out_sym
    values = None
    if a.values is not None:
        if m == 1:
            values = dict(a.values)
        else:
            values = {s: sum(a.values[x] for x in s) for s in state_syms}
    states = Alphabet(inputs if state_filter is not None else state_syms)
    cfca = set(rblocks) <= {0}
    return Sca(states, Alphabet(rand_syms), tuple(qblocks) or (0,),
               tuple(rblocks) or (0,), tuple(qblocks), tuple(rblocks), table,
               cfca, values, f"{a.name}<{m},{t},{z}>" if a.name else "")


def rescale_sca(a: Sca, p: RescaleParams, budget: Budget = DEFAULT_BUDGET) -> Sca:
    """The rescaling of `a` with parameters (m, t, z): states Q^m, random
    alphabet (R^m)^t, global function equal to the packed, shifted t-iterate."""
    return _rescaled_table(a, p, None, budget)


# ---------------------------------------------------------------------------
# trimming operations


def check_restriction(a: Sca, inj: Injection) -> Sca:
    """Verify that the injected sub-alphabet is stable under every random word
    and return the automaton restricted to it (states renamed through the
    injection's domain)."""
    image = set(inj.mapping.values())
    for s in image:
        if s not in a.states:
            raise ScaError(f"injection image {s!r} is not a state")
    inv = inj.inverse()
    sub = [s for s in a.states if s in image]  # host order, for determinism
    table = {}
    for qw in itertools.product(sub, repeat=len(a.read_v)):
        for rw in itertools.product(a.random.symbols, repeat=len(a.read_vp)):
            out = a.table[(qw, rw)]
            if out not in image:
                raise StabilityError(
                    f"window {qw} with randomness {rw} leaves the sub-alphabet "
                    f"(output {out!r})", witness=(qw, rw, out))
            table[(tuple(inv[x] for x in qw), rw)] = inv[out]
    order = [inv[s] for s in sub]
    values = None
    if a.values is not None:
        values = {inv[s]: a.values[s] for s in sub if s in a.values}
    return Sca(Alphabet(tuple(order)), a.random, a.v, a.v_prime,
               a.read_v, a.read_vp, table, a.cfca_flag, values,
               f"{a.name}|restricted" if a.name else "")


def check_projection(a: Sca, pi: Surjection) -> Sca:
    """Verify that merging states through `pi` commutes with the dynamics and
    return the quotient automaton."""
    for s in a.states:
        if s not in pi.mapping:
            raise ScaError(f"projection undefined on state {s!r}")
    targets = []
    for s in a.states:  # image order follows the source order
        v = pi.mapping[s]
        if v not in targets:
            targets.append(v)
    table = {}
    rep = {}
    for (qw, rw), out in a.table.items():
        key = (tuple(pi.mapping[x] for x in qw), rw)
        pout = pi.mapping[out]
        if key in table:
            if table[key] != pout:
                raise CompatibilityError(
                    f"windows {rep[key]} and {qw} project equally but their "
                    f"outputs disagree under randomness {rw}",
                    witness=(rep[key], qw, rw))
        else:
            table[key] = pout
            rep[key] = qw
    values = None
    return Sca(Alphabet(tuple(targets)), a.random, a.v, a.v_prime,
               a.read_v, a.read_vp, table, a.cfca_flag, values,
               f"{a.name}|projected" if a.name else "")


# ---------------------------------------------------------------------------
# the simulation relations


def _det_table(a: Sca, k: int):
    a = _canonicalize_to(trim_unused(a), k)
    r_any = tuple(a.random.symbols[0] for _ in a.read_vp)
    qi = tuple(p + k for p in a.read_v)
    out = {}
    for qw in itertools.product(a.states.symbols, repeat=2 * k + 1):
        out[qw] = a.table[(tuple(qw[i] for i in qi), r_any)]
    return out


def simulates(a: Sca, b: Sca, pa: RescaleParams, pb: RescaleParams,
              trim=(None, None), mode: str = "S",
              budget: Budget = DEFAULT_BUDGET) -> bool:
    """Does `b`, rescaled by pb and trimmed, reproduce the global function of
    `a` rescaled by pa? The mode selects which global function must match:
    deterministic (D, exact table equality), non-deterministic (N) or
    stochastic (S). Trimming applies restriction before projection; the
    simulated side is only rescaled, never trimmed. A failed stability or
    compatibility check means the given parameters are not a witness, hence
    False rather than an error."""
    if mode not in ("D", "N", "S"):
        raise ScaError(f"unknown mode {mode!r}")
    inj, surj = trim
    big = rescale_sca(a, pa, budget)
    try:
        if inj is not None:
            host = _rescaled_table(b, pb, tuple(inj.mapping.values()), budget)
            inv = inj.inverse()
            order = tuple(inv[s] for s in host.states)
            table = {(tuple(inv[x] for x in qw), rw): inv[out]
                     for (qw, rw), out in host.table.items()}
            small = Sca(Alphabet(order), host.random, host.v, host.v_prime,
                        host.read_v, host.read_vp, table, host.cfca_flag,
                        None, host.name)
        else:
            small = rescale_sca(b, pb, budget)
        if surj is not None:
            small = check_projection(small, surj)
    except (StabilityError, CompatibilityError):
        return False
    if set(big.states.symbols) != set(small.states.symbols):
        raise ScaError("state alphabets do not match after rescaling and trimming")
    if mode == "S":
        if prime_factor_precheck(big, small) is Precheck.INCOMPATIBLE:
            return False
        return stochastic_equal(big, small, 1, budget)
    if mode == "N":
        from .symbolic import ndet_equal
        return bool(ndet_equal(big, small, 1, budget))
    if not (is_deterministic(big) and is_deterministic(small)):
        raise NotDeterministic("mode D compares deterministic global functions")
    k = max(big.radius, small.radius)
    return _det_table(big, k) == _det_table(small, k)


@dataclass(frozen=True)
class SearchBounds:
    max_m: int = 2
    max_t: int = 2
    max_z: int = 1
    max_trims: int = 2000


@dataclass(frozen=True)
class SimulationWitness:
    pa: RescaleParams
    pb: RescaleParams
    injection: Optional[Injection]
    surjection: Optional[Surjection]
    mode: str


@dataclass(frozen=True)
class NotFoundWithinBounds:
    """Exhausted the bounded search; explicitly not a disproof."""

    bounds: SearchBounds
    precheck_short_circuit: bool = False

    def __bool__(self):
        return False


def _z_order(max_z: int):
    yield 0
    for i in range(1, max_z + 1):
        yield i
        yield -i


def _candidate_injections(domain, codomain, counter: Meter):
    """Identity-style embedding first, then all injective maps in declared
    order; each candidate charges the trim budget."""
    dom = list(domain)
    cod = list(codomain)
    if len(dom) > len(cod):
        return
    if all(d in cod for d in dom):
        counter.charge()
        yield Injection({d: d for d in dom})
    for perm in itertools.permutations(cod, len(dom)):
        mapping = dict(zip(dom, perm))
        if all(k == v for k, v in mapping.items()):
            continue  # identity already tried
        counter.charge()
        yield Injection(mapping)


def _candidate_surjections(domain, codomain, counter: Meter):
    """All maps from the simulator's states onto the simulated states, in
    declared order; compatibility is checked later by the projection."""
    dom = list(domain)
    cod = list(codomain)
    if len(dom) < len(cod):
        return
    for values in itertools.product(cod, repeat=len(dom)):
        if set(values) != set(cod):
            continue
        counter.charge()
        yield Surjection(dict(zip(dom, values)))


def search_simulation(a: Sca, b: Sca, bounds: SearchBounds = SearchBounds(),
                      mode: str = "S", budget: Budget = DEFAULT_BUDGET):
    """Bounded search over rescaling parameters and trims, in a fixed
    lexicographic order (the first verified witness wins). Exhaustion returns
    NotFoundWithinBounds, which certifies nothing beyond the bounds.

    For stochastic mode, incompatible prime factors of the random alphabet
    sizes short-circuit the whole search (rescaling preserves prime factors
    and trimming never touches the random alphabet)."""
    from .weighted import prime_factors

    if (mode == "S" and not is_deterministic(a) and not is_deterministic(b)
            and not (prime_factors(len(a.random)) & prime_factors(len(b.random)))):
        return NotFoundWithinBounds(bounds, precheck_short_circuit=True)
    params = []
    for m1 in range(1, bounds.max_m + 1):
        for t1 in range(1, bounds.max_t + 1):
            for z1 in _z_order(bounds.max_z):
                params.append(RescaleParams(m1, t1, z1))
    for pa in params:
        try:
            big = rescale_sca(a, pa, budget)
        except ResourceExhausted:
            continue
        for pb in params:
            trim_meter = Meter(bounds.max_trims)
            try:
                small_states = _block_symbols(canonicalize(b).states, pb.m, 1)
                # no trim first
                if set(big.states.symbols) == set(small_states):
                    if simulates(a, b, pa, pb, (None, None), mode, budget):
                        return SimulationWitness(pa, pb, None, None, mode)
                # then injections, then surjections
                for inj in _candidate_injections(big.states.symbols,
                                                 small_states, trim_meter):
                    try:
                        if simulates(a, b, pa, pb, (inj, None), mode, budget):
                            return SimulationWitness(pa, pb, inj, None, mode)
                    except ScaError:
                        continue
                for surj in _candidate_surjections(small_states,
                                                   big.states.symbols,
                                                   trim_meter):
                    try:
                        if simulates(a, b, pa, pb, (None, surj), mode, budget):
                            return SimulationWitness(pa, pb, None, surj, mode)
                    except ScaError:
                        continue
            except (ResourceExhausted,):
                continue
    return NotFoundWithinBounds(bounds)


# ---------------------------------------------------------------------------
# the correlation-free host


def cfca_host(a: Sca):
    """A correlation-free automaton hosting `a`: one step of `a` is simulated
    by two host steps (first copy the fresh random symbol next to the state,
    then fire `a`'s rule on the stored pairs). Mixed-type windows have no
    meaningful image and are sent to a junk state; the returned identity
    injection hides them, and the restricted square reproduces `a` exactly."""
    a = canonicalize(a)
    k = a.radius
    pair_states = tuple((q, r) for q in a.states.symbols for r in a.random.symbols)
    host_states = tuple(a.states.symbols) + pair_states
    junk = a.states.symbols[0]
    qset = set(a.states.symbols)
    qi = tuple(p + k for p in a.read_v)
    ri = tuple(p + k for p in a.read_vp)

    def rule(w, s):
        if all(x in qset for x in w):
            return (w[k], s[0])
        if all(x not in qset for x in w):
            return a.table[(tuple(w[i][0] for i in qi),
                            tuple(w[i][1] for i in ri))]
        return junk

    from .core import make_sca

    host = make_sca(host_states, a.random.symbols, range(-k, k + 1), [0],
                    rule, name=f"{a.name}_host" if a.name else "host")
    return host, Injection({q: q for q in a.states.symbols})


# ---------------------------------------------------------------------------
# finite couplings


@dataclass(frozen=True)
class CouplingTable:
    """Joint distribution on pairs of randomness words for one window,
    built from rank-interval overlaps (lexicographic order over each side's
    random alphabet fixes the ranks)."""

    window: Word
    n: int
    table: dict  # (r1-word, r2-word) -> Fraction
    marginals_uniform: bool
    equal_output_mass: Fraction


@dataclass(frozen=True)
class CouplingInfeasible:
    output: Word
    left_probability: Fraction
    right_probability: Fraction

    def __bool__(self):
        return False


def build_finite_coupling(a: Sca, b: Sca, window: Word, n: int,
                          budget: Budget = DEFAULT_BUDGET):
    """Couple the randomness of two automata on one configuration window so
    that they produce the same output almost surely.

    Partitions each side's randomness words by the output they induce on the
    centered length-(2n+1) image of the window; when the two induced output
    distributions match, rank intervals inside [0,1) are overlapped class by
    class. The result has uniform marginals and gives the equal-output event
    mass exactly 1; otherwise the first output word (in state order) whose
    probabilities differ is reported."""
    if set(a.states.symbols) != set(b.states.symbols):
        raise ScaError("automata have different state alphabets")
    a1 = canonicalize(trim_unused(a))
    b1 = canonicalize(trim_unused(b))
    k = max(a1.radius, b1.radius)
    a1 = _canonicalize_to(a1, k)
    b1 = _canonicalize_to(b1, k)
    L = 2 * (n + k) + 1
    if len(window) != L:
        raise ScaError(f"window must have length 2(n+k)+1 = {L}")
    meter = Meter(budget.max_enum)

    def classes(x: Sca):
        qi = tuple(p + k for p in x.read_v)
        ri = tuple(p + k for p in x.read_vp)
        part: dict = {}
        syms = window.symbols
        for rw in itertools.product(x.random.symbols, repeat=L):
            meter.charge()
            out = tuple(
                x.table[(tuple(syms[j + i] for i in qi),
                         tuple(rw[j + i] for i in ri))]
                for j in range(L - 2 * k)
            )
            part.setdefault(out, []).append(rw)
        return part

    part1 = classes(a1)
    part2 = classes(b1)
    n1 = len(a1.random) ** L
    n2 = len(b1.random) ** L
    order = {s: i for i, s in enumerate(a1.states.symbols)}
    for out in sorted(set(part1) | set(part2),
                      key=lambda w: tuple(order[s] for s in w)):
        p1 = Fraction(len(part1.get(out, ())), n1)
        p2 = Fraction(len(part2.get(out, ())), n2)
        if p1 != p2:
            return CouplingInfeasible(Word(out, window.offset + k), p1, p2)

    table: dict = {}
    for out, group1 in part1.items():
        group2 = part2[out]
        mu = Fraction(len(group1), n1)
        c1, c2 = len(group1), len(group2)
        for i1, v1 in enumerate(group1):
            lo1, hi1 = Fraction(i1, c1), Fraction(i1 + 1, c1)
            for i2, v2 in enumerate(group2):
                lo2, hi2 = Fraction(i2, c2), Fraction(i2 + 1, c2)
                overlap = min(hi1, hi2) - max(lo1, lo2)
                if overlap > 0:
                    table[(v1, v2)] = overlap * mu

    # certify: uniform marginals and equal-output mass one
    left: dict = {}
    right: dict = {}
    for (v1, v2), w in table.items():
        left[v1] = left.get(v1, Fraction(0)) + w
        right[v2] = right.get(v2, Fraction(0)) + w
    uniform = (all(w == Fraction(1, n1) for w in left.values())
               and len(left) == n1
               and all(w == Fraction(1, n2) for w in right.values())
               and len(right) == n2)
    mass = sum(table.values(), Fraction(0))
    return CouplingTable(window, n, table, uniform, mass)


# ---------------------------------------------------------------------------
# reduction gadgets


def gadget(kind: str, f: Sca) -> Sca:
    """Constructions that transfer properties of a deterministic rule to the
    stochastic setting.

    surjectivity-lift: G(c, s) = F(s), so G is noisy iff F is surjective.
    square-noise: the correlation-free G((c,c'), s) = (F(c'), s) over paired
    states, whose square is (F(s), s') and hence uniform iff F is surjective.
    """
    if not is_deterministic(f):
        raise NotDeterministic("gadgets are defined for deterministic rules")
    f1 = trim_unused(canonicalize(f))
    r_any = tuple(f1.random.symbols[0] for _ in f1.read_vp)
    det = {qw: f1.table[(qw, r_any)]
           for qw in itertools.product(f1.states.symbols, repeat=len(f1.read_v))}
    from .core import make_sca

    if kind == "surjectivity-lift":
        coords = f1.read_v or (0,)
        if not f1.read_v:
            const = det[()]
            return make_sca(f1.states.symbols, f1.states.symbols, [0], coords,
                            lambda q, r: const, name=f"{f1.name}_lift")
        return make_sca(f1.states.symbols, f1.states.symbols, [0], coords,
                        lambda q, r: det[r], name=f"{f1.name}_lift")
    if kind == "square-noise":
        states = tuple(itertools.product(f1.states.symbols, repeat=2))
        coords = sorted(set(f1.read_v) | {0})
        idx = {p: i for i, p in enumerate(coords)}
        rv = f1.read_v

        def rule(q, s):
            image = det[tuple(q[idx[p]][1] for p in rv)]
            return (image, s[0])

        return make_sca(states, f1.states.symbols, coords, [0], rule,
                        name=f"{f1.name}_square_noise")
    raise ScaError(f"unknown gadget kind {kind!r}")
