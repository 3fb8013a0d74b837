"""Sofic-shift decision procedures for the non-deterministic dynamics:
noisiness, surjectivity, injectivity, pre-injectivity, equality of
non-deterministic global functions and pattern reachability.

Everything runs on the unweighted shadow of the pair automaton: a labeled
graph whose states are sliding (Q-window, R-window) pairs and whose bi-infinite
paths are exactly the pairs (input configuration, k-shifted image). Negative
answers come with finite witnesses that re-check against plain enumeration.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass
from typing import Optional

from .core import (Budget, DEFAULT_BUDGET, PeriodicConfig, ResourceExhausted,
                   Sca, ScaError, Word, canonicalize, is_deterministic,
                   iterate_sca, local_distribution, step_periodic, trim_unused,
                   Meter, NotCfca)


@dataclass(frozen=True)
class Verdict:
    answer: bool
    witness: Optional[object] = None

    def __bool__(self):
        return self.answer


@dataclass(frozen=True)
class SoficPresentation:
    """Labeled graph presenting a sofic shift; every state is accepting.
    trans maps label -> src -> tuple of destinations."""

    n: int
    labels: tuple
    trans: dict

    def successors(self, subset: frozenset, label) -> frozenset:
        srcs = self.trans.get(label)
        if not srcs:
            return frozenset()
        out = set()
        for s in subset:
            out.update(srcs.get(s, ()))
        return frozenset(out)


def _prepare(a: Sca) -> Sca:
    return canonicalize(trim_unused(canonicalize(a)))


def support_graph(a: Sca, budget: Budget = DEFAULT_BUDGET):
    """Sliding-window graph of the one-step dynamics. States are pairs of a
    Q-window and an R-window of length 2k; an edge consumes the next input
    cell and random cell and is labeled (input, output). All states lie on
    bi-infinite paths, so the graph is already essential."""
    a = _prepare(a)
    k = a.radius
    ell = a.window
    nQ, nR = len(a.states), len(a.random)
    count = (nQ * nR) ** (ell - 1)
    if count > budget.max_states:
        raise ResourceExhausted(f"support graph would have {count} states")
    qi, ri = a._indices(k)
    index = {}
    states = []
    for qw in itertools.product(a.states.symbols, repeat=ell - 1):
        for rw in itertools.product(a.random.symbols, repeat=ell - 1):
            index[(qw, rw)] = len(states)
            states.append((qw, rw))
    edges = []  # (src, dst, input, output)
    for (qw, rw), src in index.items():
        for q in a.states.symbols:
            for r in a.random.symbols:
                fq, fr = qw + (q,), rw + (r,)
                out = a.table[(tuple(fq[i] for i in qi), tuple(fr[i] for i in ri))]
                edges.append((src, index[(fq[1:], fr[1:])], q, out))
    return a, states, edges


def _label_maps(edges, key):
    trans: dict = {}
    for src, dst, q, out in edges:
        lab = key(q, out)
        trans.setdefault(lab, {}).setdefault(src, set())
        trans[lab][src].add(dst)
    for lab in trans:
        trans[lab] = {s: tuple(sorted(d)) for s, d in trans[lab].items()}
    return trans


def _find_unreachable_word(n_states, labels, trans, budget):
    """Subset construction from the full state set; returns the shortest label
    word with no run, or None when every word has one."""
    pres = SoficPresentation(n_states, tuple(labels), trans)
    full = frozenset(range(n_states))
    visited = {full: None}
    queue = deque([full])
    while queue:
        cur = queue.popleft()
        for lab in labels:
            nxt = pres.successors(cur, lab)
            if not nxt:
                path = [lab]
                back = cur
                while visited[back] is not None:
                    back, lab2 = visited[back]
                    path.append(lab2)
                return list(reversed(path))
            if nxt not in visited:
                if len(visited) >= budget.max_states:
                    raise ResourceExhausted("subset construction too large")
                visited[nxt] = (cur, lab)
                queue.append(nxt)
    return None


def is_noisy(a: Sca, budget: Budget = DEFAULT_BUDGET) -> Verdict:
    """Noisy = every configuration reachable from every configuration in one
    step, i.e. the pair shift (input, k-shifted image) is the full shift over
    Q x Q. Decided by subset construction from the full state set; a shortest
    missing pair word is the witness."""
    a1, states, edges = support_graph(a, budget)
    k = a1.radius
    labels = [(x, y) for x in a1.states.symbols for y in a1.states.symbols]
    trans = _label_maps(edges, lambda q, out: (q, out))
    word = _find_unreachable_word(len(states), labels, trans, budget)
    if word is None:
        return Verdict(True)
    ins = Word(tuple(x for x, _ in word), 0)
    outs = Word(tuple(y for _, y in word), -k)
    return Verdict(False, (ins, outs))


def cfca_noisy_local(a: Sca) -> bool:
    """Local noisiness test for correlation-free rules: every neighborhood
    word must give positive probability to every letter."""
    if not a.cfca_flag:
        raise NotCfca("cfca_noisy_local requires V' = {0}")
    dist = local_distribution(a)
    nQ = len(a.states)
    return all(len(d) == nQ for d in dist.values())


def is_surjective(a: Sca, budget: Budget = DEFAULT_BUDGET) -> Verdict:
    """Project the pair presentation onto outputs and compare with the full
    shift over Q; a shortest orphan word witnesses failure."""
    a1, states, edges = support_graph(a, budget)
    labels = list(a1.states.symbols)
    trans = _label_maps(edges, lambda q, out: out)
    word = _find_unreachable_word(len(states), labels, trans, budget)
    if word is None:
        return Verdict(True)
    return Verdict(False, Word(tuple(word), 0))


# ---------------------------------------------------------------------------
# injectivity / pre-injectivity


def _det_pair_graph(a: Sca):
    """For a deterministic rule: states are pairs of Q-windows, edges carry
    (input1, input2) and exist when the two rule outputs agree."""
    a = _prepare(a)
    k = a.radius
    ell = a.window
    qi, _ = a._indices(k)
    r_any = tuple(a.random.symbols[0] for _ in a.read_vp)

    def out(fq):
        return a.table[(tuple(fq[i] for i in qi), r_any)]

    index = {}
    states = []
    for w1 in itertools.product(a.states.symbols, repeat=ell - 1):
        for w2 in itertools.product(a.states.symbols, repeat=ell - 1):
            index[(w1, w2)] = len(states)
            states.append((w1, w2))
    edges = []
    for (w1, w2), src in index.items():
        for x1 in a.states.symbols:
            for x2 in a.states.symbols:
                f1, f2 = w1 + (x1,), w2 + (x2,)
                if out(f1) == out(f2):
                    edges.append((src, index[(f1[1:], f2[1:])], x1, x2))
    return a, states, edges


def _essential(n, edges):
    """Iteratively drop states with no incoming or no outgoing edge; the
    remainder is exactly the set of states on bi-infinite paths."""
    alive = set(range(n))
    cur = edges
    while True:
        outs = {e[0] for e in cur}
        ins = {e[1] for e in cur}
        keep = alive & outs & ins
        if keep == alive:
            return alive, cur
        alive = keep
        cur = [e for e in cur if e[0] in alive and e[1] in alive]


def _bfs_path(edges_by_src, start_set, goal_test):
    seen = {s: None for s in start_set}
    queue = deque(start_set)
    while queue:
        cur = queue.popleft()
        if goal_test(cur):
            path = []
            node = cur
            while seen[node] is not None:
                node, edge = seen[node]
                path.append(edge)
            return cur, list(reversed(path))
        for edge in edges_by_src.get(cur, ()):
            if edge[1] not in seen:
                seen[edge[1]] = (cur, edge)
                queue.append(edge[1])
    return None, None


def _periodic_equal_image_search(a: Sca, max_period: int,
                                 budget: Budget = DEFAULT_BUDGET):
    """Hunt for two distinct periodic configurations with intersecting images:
    a direct certificate of non-injectivity for non-deterministic rules."""
    a = canonicalize(a)
    meter = Meter(budget.max_enum)
    for p in range(1, max_period + 1):
        images: dict = {}
        for cw in itertools.product(a.states.symbols, repeat=p):
            c = PeriodicConfig(Word(cw, 0), 0)
            for sw in itertools.product(a.random.symbols, repeat=p):
                meter.charge()
                s = PeriodicConfig(Word(sw, 0), 0)
                img = step_periodic(a, c, s, budget).period.symbols
                prev = images.get(img)
                if prev is not None and prev[0] != cw:
                    return (PeriodicConfig(Word(prev[0], 0), 0), Word(prev[1], 0),
                            c, Word(sw, 0))
                if prev is None:
                    images[img] = (cw, sw)
    return None


def is_injective(a: Sca, budget: Budget = DEFAULT_BUDGET) -> Verdict:
    """Injectivity of the explicit global function in its first argument.

    A non-deterministic rule is never injective, and a pair of distinct
    periodic configurations with intersecting image sets certifies that. For
    deterministic rules the classical pair graph decides: injective iff after
    trimming every edge is diagonal; an off-diagonal essential cycle (or
    eventually-periodic path) is the witness.
    """
    a1 = _prepare(a)
    if not is_deterministic(a1):
        wit = _periodic_equal_image_search(a1, a1.window + 2, budget)
        return Verdict(False, wit)
    a1, states, edges = _det_pair_graph(a1)
    alive, edges = _essential(len(states), edges)
    off = [e for e in edges if e[2] != e[3]]
    if not off:
        return Verdict(True)
    edge = off[0]
    by_src: dict = {}
    for e in edges:
        by_src.setdefault(e[0], []).append(e)
    # close a cycle through the off-diagonal edge: dst back to src
    _, back = _bfs_path(by_src, {edge[1]}, lambda s: s == edge[0])
    if back is not None:
        seq = [edge] + back
        witness = (Word(tuple(e[2] for e in seq), 0),
                   Word(tuple(e[3] for e in seq), 0))
    else:
        witness = (Word((edge[2],), 0), Word((edge[3],), 0))
    return Verdict(False, witness)


def _uniform_background_collision(a: Sca, max_width: int,
                                  budget: Budget = DEFAULT_BUDGET):
    """Two distinct finite words over a uniform background whose image sets
    intersect: a certificate against pre-injectivity. Randomness outside the
    examined region is taken equal on both sides, so equality there is free."""
    from .core import _image_set

    a = canonicalize(a)
    k = a.radius
    meter = Meter(budget.max_enum)
    for b in a.states.symbols:
        for m in range(1, max_width + 1):
            seen: dict = {}
            out_lo, out_hi = -k, m - 1 + k
            out_pos = list(range(out_lo, out_hi + 1))
            for w in itertools.product(a.states.symbols, repeat=m):
                row = {p: b for p in range(out_lo - k, out_hi + k + 1)}
                row.update(dict(zip(range(m), w)))
                for img in _image_set(a, row, out_pos, meter):
                    key = tuple(img[p] for p in out_pos)
                    prev = seen.get(key)
                    if prev is not None and prev != w:
                        return {"background": b,
                                "left": Word(prev, 0),
                                "right": Word(w, 0),
                                "image": Word(key, out_lo)}
                    if prev is None:
                        seen[key] = w
    return None


def is_preinjective(a: Sca, budget: Budget = DEFAULT_BUDGET) -> Verdict:
    """Pre-injectivity: equal images force equality for configurations that
    differ in finitely many cells.

    Deterministic rules use the pair graph: a violation is a path from a
    diagonal cycle through at least one off-diagonal edge back to a diagonal
    cycle. Non-deterministic rules are searched for a finite-support collision
    over a uniform background; if none is found within the width bound the
    full product construction decides (budget permitting).
    """
    a1 = _prepare(a)
    if is_deterministic(a1):
        a1, states, edges = _det_pair_graph(a1)
        alive, edges = _essential(len(states), edges)
        return _diamond_check(states, alive, edges)
    wit = _uniform_background_collision(a1, max_width=max(4, a1.window - 1), budget=budget)
    if wit is not None:
        return Verdict(False, wit)
    return _preinjective_product(a1, budget)


def _diamond_check(states, alive, edges) -> Verdict:
    diag_edges = [e for e in edges if e[2] == e[3]]
    diag_alive, diag_edges2 = _essential(len(states), diag_edges)
    dc = diag_alive & alive
    if not dc:
        return Verdict(True)
    by_src: dict = {}
    for e in edges:
        by_src.setdefault(e[0], []).append(e)
    # forward reachability from diagonal cycles
    reach = set(dc)
    queue = deque(dc)
    while queue:
        cur = queue.popleft()
        for e in by_src.get(cur, ()):
            if e[1] not in reach:
                reach.add(e[1])
                queue.append(e[1])
    # backward reachability into diagonal cycles
    by_dst: dict = {}
    for e in edges:
        by_dst.setdefault(e[1], []).append(e)
    coreach = set(dc)
    queue = deque(dc)
    while queue:
        cur = queue.popleft()
        for e in by_dst.get(cur, ()):
            if e[0] not in coreach:
                coreach.add(e[0])
                queue.append(e[0])
    for e in edges:
        if e[2] != e[3] and e[0] in reach and e[1] in coreach:
            wit = _assemble_diamond(by_src, dc, e)
            return Verdict(False, wit)
    return Verdict(True)


def _assemble_diamond(by_src, dc, off_edge):
    """Build the two input tracks of a diamond path through `off_edge`."""
    _, pre = _bfs_path(by_src, dc, lambda s: s == off_edge[0])
    # path from the off edge's destination back into a diagonal cycle
    _, post = _bfs_path(by_src, {off_edge[1]}, lambda s: s in dc)
    if pre is None or post is None:
        return None
    seq = pre + [off_edge] + post
    return (Word(tuple(e[2] for e in seq), 0), Word(tuple(e[3] for e in seq), 0))


def _preinjective_product(a: Sca, budget: Budget) -> Verdict:
    """Full equal-image product graph; exponential, used only when the cheap
    searches fail."""
    a1, states, edges = support_graph(a, budget)
    n = len(states)
    if n * n > budget.max_states:
        raise ResourceExhausted(f"equal-image product would have {n * n} states")
    by_out: dict = {}
    for src, dst, q, out in edges:
        by_out.setdefault(out, []).append((src, dst, q))
    pedges = []
    for out, group in by_out.items():
        for (s1, d1, q1) in group:
            for (s2, d2, q2) in group:
                pedges.append((s1 * n + s2, d1 * n + d2, q1, q2))
    alive, pedges = _essential(n * n, pedges)
    pstates = [(states[i // n], states[i % n]) for i in range(n * n)]
    return _diamond_check(pstates, alive, pedges)


# ---------------------------------------------------------------------------
# equality of non-deterministic global functions


def ndet_equal(a: Sca, b: Sca, t: int = 1,
               budget: Budget = DEFAULT_BUDGET) -> Verdict:
    """Do the t-step non-deterministic global functions coincide? Compares the
    factor languages of the two pair presentations (built at a common radius)
    with a joint subset construction; a pair word in exactly one language is
    the witness, tagged with the side that realizes it. Distinct state sets
    answer False outright."""
    if t < 1:
        raise ScaError("t must be >= 1")
    if set(a.states.symbols) != set(b.states.symbols):
        return Verdict(False, {"reason": "different state alphabets"})
    a1 = trim_unused(iterate_sca(canonicalize(trim_unused(a)), t, budget)) if t > 1 \
        else _prepare(a)
    b1 = trim_unused(iterate_sca(canonicalize(trim_unused(b)), t, budget)) if t > 1 \
        else _prepare(b)
    k = max(a1.radius, b1.radius)
    from .weighted import _canonicalize_to
    a1 = _canonicalize_to(a1, k)
    b1 = _canonicalize_to(b1, k)
    ga, sa, ea = support_graph(a1, budget)
    gb, sb, eb = support_graph(b1, budget)
    ta = _label_maps(ea, lambda q, out: (q, out))
    tb = _label_maps(eb, lambda q, out: (q, out))
    labels = sorted(set(ta) | set(tb), key=repr)
    pa = SoficPresentation(len(sa), tuple(labels), ta)
    pb = SoficPresentation(len(sb), tuple(labels), tb)
    start = (frozenset(range(len(sa))), frozenset(range(len(sb))))
    visited = {start: None}
    queue = deque([start])
    while queue:
        cur = queue.popleft()
        for lab in labels:
            n1 = pa.successors(cur[0], lab)
            n2 = pb.successors(cur[1], lab)
            if bool(n1) != bool(n2):
                path = [lab]
                back = cur
                while visited[back] is not None:
                    back, lab2 = visited[back]
                    path.append(lab2)
                path.reverse()
                ins = Word(tuple(x for x, _ in path), 0)
                outs = Word(tuple(y for _, y in path), -k)
                side = "first" if n1 else "second"
                return Verdict(False, {"input": ins, "output": outs,
                                       "realized_by": side})
            if n1 and (n1, n2) not in visited:
                if len(visited) >= budget.max_states:
                    raise ResourceExhausted("joint subset construction too large")
                visited[(n1, n2)] = (cur, lab)
                queue.append((n1, n2))
    return Verdict(True)


# ---------------------------------------------------------------------------
# pattern quantifiers (explicit finite patterns only)


def forced_pattern_exists(a: Sca, u: Word, budget: Budget = DEFAULT_BUDGET) -> Verdict:
    """Is there an input window mapped to u by every random word?"""
    a = canonicalize(a)
    k = a.radius
    n = len(u) + 2 * k
    meter = Meter(budget.max_enum)
    need_r = sorted({z + p for z in range(k, n - k) for p in a.read_vp})
    tgt = u.symbols
    for w in itertools.product(a.states.symbols, repeat=n):
        ok = True
        for rw in itertools.product(a.random.symbols, repeat=len(need_r)):
            meter.charge()
            layer = dict(zip(need_r, rw))
            img = tuple(
                a.table[(tuple(w[z + p] for p in a.read_v),
                         tuple(layer[z + p] for p in a.read_vp))]
                for z in range(k, n - k)
            )
            if img != tgt:
                ok = False
                break
        if ok:
            return Verdict(True, Word(w, u.offset - k))
    return Verdict(False)


def reachable_pattern_exists(a: Sca, u: Word, budget: Budget = DEFAULT_BUDGET) -> Verdict:
    """Is there an input window and a random word mapping to u?"""
    a = canonicalize(a)
    k = a.radius
    n = len(u) + 2 * k
    meter = Meter(budget.max_enum)
    need_r = sorted({z + p for z in range(k, n - k) for p in a.read_vp})
    tgt = u.symbols
    pad = a.random.symbols[0]
    for w in itertools.product(a.states.symbols, repeat=n):
        for rw in itertools.product(a.random.symbols, repeat=len(need_r)):
            meter.charge()
            layer = dict(zip(need_r, rw))
            img = tuple(
                a.table[(tuple(w[z + p] for p in a.read_v),
                         tuple(layer[z + p] for p in a.read_vp))]
                for z in range(k, n - k)
            )
            if img == tgt:
                full = tuple(layer.get(p, pad) for p in range(n))
                return Verdict(True, (Word(w, u.offset - k),
                                      Word(full, u.offset - k)))
    return Verdict(False)


# ---------------------------------------------------------------------------
# witness re-validation helpers (the oracle side of negative answers)


def pair_word_realizable(a: Sca, ins: Word, outs: Word,
                         budget: Budget = DEFAULT_BUDGET) -> bool:
    """Check by enumeration whether the (input, output) pair word occurs in
    the one-step pair shift: inputs at positions 0..L-1, outputs lagging k."""
    a = canonicalize(a)
    k = a.radius
    L = len(ins)
    meter = Meter(budget.max_enum)
    out_pos = list(range(-k, L - k))
    need_r = sorted({z + p for z in out_pos for p in a.read_vp})
    tgt = outs.symbols
    for pre in itertools.product(a.states.symbols, repeat=2 * k):
        w = {p: s for p, s in zip(range(-2 * k, 0), pre)}
        w.update(dict(zip(range(L), ins.symbols)))
        for rw in itertools.product(a.random.symbols, repeat=len(need_r)):
            meter.charge()
            layer = dict(zip(need_r, rw))
            img = tuple(
                a.table[(tuple(w[z + p] for p in a.read_v),
                         tuple(layer[z + p] for p in a.read_vp))]
                for z in out_pos
            )
            if img == tgt:
                return True
    return False
