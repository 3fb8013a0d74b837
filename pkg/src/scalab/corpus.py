"""Named example automata used in the test suite and the documentation.

Every builder is deterministic: calling it twice yields structurally equal
objects, so frozen expected values in the tests stay meaningful.
"""

from __future__ import annotations

import json
import random as _random
import sys

from .core import Sca, make_sca

LEFT, STAY, RIGHT = "<", ".", ">"


def blank_noise() -> Sca:
    """F(c,s) = s: fresh uniform bit everywhere, input ignored."""
    return make_sca("01", "01", [0], [0], lambda q, r: r[0], name="blank_noise",
                    values={"0": 0, "1": 1})


def blank_xor() -> Sca:
    """G(c,s) = c+s mod 2: same stochastic behavior as blank_noise, different
    syntax; the classic pair for equality and coupling checks."""
    return make_sca("01", "01", [0], [0],
                    lambda q, r: str((int(q[0]) + int(r[0])) % 2),
                    name="blank_xor", values={"0": 0, "1": 1})


def biased_noise() -> Sca:
    """f(c,s) = s mod 2 over R = {0,1,2}: outputs 0 with probability 2/3."""
    return make_sca("01", "012", [0], [0], lambda q, r: str(int(r[0]) % 2),
                    name="biased_noise", values={"0": 0, "1": 1})


def identity() -> Sca:
    return make_sca("01", "0", [0], [0], lambda q, r: q[0], name="identity",
                    values={"0": 0, "1": 1})


def constant_zero() -> Sca:
    return make_sca("01", "0", [0], [0], lambda q, r: "0", name="constant0",
                    values={"0": 0, "1": 1})


def xor_ca() -> Sca:
    """Deterministic two-neighbor xor, a surjective non-injective classic."""
    return make_sca("01", "0", [-1, 0], [0],
                    lambda q, r: str(int(q[0]) ^ int(q[1])),
                    name="xor", values={"0": 0, "1": 1})


def parity() -> Sca:
    """Maps every block between two # markers to a uniform random word of even
    parity: the standard example of a stochastic rule whose one-step outputs
    are locally correlated (it is not correlation-free)."""
    def rule(q, s):
        cm, c0, cp = q
        sm, s0 = s
        if c0 == "#":
            return "#"
        left_hash = cm == "#"
        right_hash = cp == "#"
        if left_hash and right_hash:
            return "0"
        if left_hash:
            return s0
        if right_hash:
            return sm
        return str((int(sm) + int(s0)) % 2)

    return make_sca("#01", "01", [-1, 0, 1], [-1, 0], rule, name="parity")


def particle() -> Sca:
    """Random walkers: each particle (state 1) tries to stay, move left or
    move right according to its own random symbol; a move happens only into an
    empty cell and only when no other particle targets the same cell.
    Non-deterministic, surjective and number conserving."""
    def rule(q, s):
        c = [x == "1" for x in q]  # positions -2..2, center index 2
        stays = c[2] and s[2] == STAY
        blocked_left = c[2] and s[2] == LEFT and c[1]
        blocked_right = c[2] and s[2] == RIGHT and c[3]
        conflict_left = (c[2] and s[2] == LEFT and not c[1]
                         and c[0] and s[0] == RIGHT)
        conflict_right = (c[2] and s[2] == RIGHT and not c[3]
                          and c[4] and s[4] == LEFT)
        enters_from_left = (not c[2] and c[1] and s[1] == RIGHT
                            and not (c[3] and s[3] == LEFT))
        enters_from_right = (not c[2] and c[3] and s[3] == LEFT
                             and not (c[1] and s[1] == RIGHT))
        keep = (stays or blocked_left or blocked_right or conflict_left
                or conflict_right or enters_from_left or enters_from_right)
        return "1" if keep else "0"

    return make_sca("01", LEFT + STAY + RIGHT, range(-2, 3), range(-2, 3),
                    rule, name="particle", values={"0": 0, "1": 1})


def deficit_repair() -> Sca:
    """Correlation-free automaton over {0,1} with neighborhood {-5,..,6} whose
    one-step dynamics breaks particle counts but whose square conserves them:
    a 11-pair decays (left 1 dies, the 0 before it flips a coin) and the
    deficit is repaired one step later by respawning three cells to the left
    of a then-isolated particle."""
    def rule(q, s):
        # q covers positions -5..6 (index i = position i-5), center index 5
        def m(pattern):
            return all(p == "*" or p == x for p, x in zip(pattern, q))
        if m("0000011000**"):
            return "0"
        if m("**0000001000"):
            return "1"
        if m("*0000011000*"):
            return s[0]
        if m("**0001001000"):
            return "0"
        return q[5]

    return make_sca("01", "01", range(-5, 7), [0], rule,
                    name="deficit_repair", values={"0": 0, "1": 1})


def mod2_noise() -> Sca:
    """CFCA over three random symbols: f(u,s) = s mod 2, so outputs are 0 with
    probability 2/3 and 1 with probability 1/3 for every neighborhood."""
    return make_sca("01", "012", [0], [0], lambda q, r: str(int(r[0]) % 2),
                    name="mod2_noise")


def random_sca(seed: int, n_states: int = 2, n_random: int = 2,
               radius: int = 1, name: str = "") -> Sca:
    """Pseudo-random rule table, reproducible from the seed."""
    rng = _random.Random(seed)
    states = [str(i) for i in range(n_states)]
    rnd = [str(i) for i in range(n_random)]
    span = range(-radius, radius + 1)
    return make_sca(states, rnd, span, span,
                    lambda q, r: states[rng.randrange(n_states)],
                    name=name or f"random_{seed}",
                    values={s: int(s) for s in states})


def random_deterministic_ca(seed: int, n_states: int = 2, radius: int = 1) -> Sca:
    """Pseudo-random deterministic rule (random alphabet is a singleton)."""
    import itertools

    rng = _random.Random(seed)
    states = [str(i) for i in range(n_states)]
    span = range(-radius, radius + 1)
    table = {qw: states[rng.randrange(n_states)]
             for qw in itertools.product(states, repeat=2 * radius + 1)}
    return make_sca(states, "0", span, [0], lambda q, r: table[q],
                    name=f"det_random_{seed}", values={s: int(s) for s in states})


CORPUS_BUILDERS = {
    "blank_noise": blank_noise,
    "blank_xor": blank_xor,
    "biased_noise": biased_noise,
    "identity": identity,
    "constant0": constant_zero,
    "xor": xor_ca,
    "parity": parity,
    "particle": particle,
    "deficit_repair": deficit_repair,
}


def corpus() -> dict:
    return {name: build() for name, build in CORPUS_BUILDERS.items()}


def dump_documents(outdir: str) -> None:
    """Write every corpus automaton as a JSON document into `outdir`."""
    import pathlib

    from .core import to_document

    out = pathlib.Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    for name, build in CORPUS_BUILDERS.items():
        doc = to_document(build())
        (out / f"{name}.json").write_text(json.dumps(doc, indent=1, ensure_ascii=False))


if __name__ == "__main__":
    dump_documents(sys.argv[1] if len(sys.argv) > 1 else "corpus")
