import json
from fractions import Fraction

import pytest

import scalab as sl
import scalab.ppt_pfa as pp
from scalab.core import FormatError


@pytest.fixture(scope="module")
def one_state():
    return sl.make_pfa(["a"], ["q0"], "q0", ["q0"], {"a": {("q0", "q0"): 1}})


@pytest.fixture(scope="module")
def half_half():
    return sl.make_pfa(
        ["a"], ["q0", "q1"], "q0", ["q0"],
        {"a": {("q0", "q0"): Fraction(1, 2), ("q0", "q1"): Fraction(1, 2),
               ("q1", "q1"): 1}})


@pytest.fixture(scope="module")
def two_letter():
    # accepts words by parity of b's, with a lazy self-loop on a
    return sl.make_pfa(
        ["a", "b"], ["e", "o"], "e", ["o"],
        {"a": {("e", "e"): Fraction(3, 4), ("e", "o"): Fraction(1, 4),
               ("o", "o"): 1},
         "b": {("e", "o"): 1, ("o", "e"): 1}})


def test_parse_pfa_roundtrip(half_half):
    doc = {
        "alphabet": ["a"],
        "states": ["q0", "q1"],
        "initial": "q0",
        "final": ["q0"],
        "matrices": {"a": ["1/2", "1/2", "0", "1"]},
    }
    p = sl.parse_pfa(json.dumps(doc))
    assert p.matrices == half_half.matrices
    assert sl.pfa_accept_prob(p, "aa") == sl.pfa_accept_prob(half_half, "aa")


def test_parse_pfa_rejects_nonstochastic():
    doc = {
        "alphabet": ["a"],
        "states": ["q0"],
        "initial": "q0",
        "final": [],
        "matrices": {"a": ["1/2"]},
    }
    with pytest.raises(FormatError, match="sums to"):
        sl.parse_pfa(doc)


def test_accept_prob(one_state, half_half, two_letter):
    assert sl.pfa_accept_prob(one_state, "aaa") == 1
    assert sl.pfa_accept_prob(half_half, "a") == Fraction(1, 2)
    assert sl.pfa_accept_prob(half_half, "aa") == Fraction(1, 4)
    assert sl.pfa_accept_prob(two_letter, "b") == 1
    assert sl.pfa_accept_prob(two_letter, "bb") == 0
    assert sl.pfa_accept_prob(two_letter, "ab") == Fraction(3, 4)


def test_empty_word_convention(one_state, two_letter):
    assert sl.pfa_accept_prob(one_state, "") == 1  # initial state is final
    assert sl.pfa_accept_prob(two_letter, "") == 0


def encoded_prob(enc, u, pad="a"):
    w = sl.Word((pad, pp.START) + tuple(u) + (pp.CHECK, pad), -1)
    tgt = sl.Word((pp.START,) + (pp.ARROW,) * len(u) + (pp.CHECK,), 0)
    return sl.cylinder_prob(enc, w, tgt, 1)


def test_encode_one_state(one_state):
    enc = sl.encode_pfa(one_state)
    assert len(enc.random) == 1  # lcm of denominators is 1
    assert encoded_prob(enc, "aa") == 1


@pytest.mark.parametrize("n", [1, 2, 3])
def test_encode_soundness(half_half, two_letter, n):
    for pfa, n_max in ((half_half, 3), (two_letter, 2)):
        if n > n_max:
            continue
        enc = sl.encode_pfa(pfa)
        for word in _words(pfa.alphabet, n):
            want = sl.pfa_accept_prob(pfa, word) / \
                Fraction(len(pfa.states)) ** len(word)
            assert encoded_prob(enc, word) == want


def _words(alphabet, n):
    import itertools
    return itertools.product(alphabet, repeat=n)


def test_encode_safety_off_pattern(half_half):
    enc = sl.encode_pfa(half_half)
    # no start marker in the window: the pattern has probability zero
    w = sl.Word(("a", "a", "a", pp.CHECK, "a"), -1)
    tgt = sl.Word((pp.START, pp.ARROW, pp.CHECK), 0)
    assert sl.cylinder_prob(enc, w, tgt, 1) == 0
    # exhaustive: every window not of shape start.letters.check gives zero
    import itertools
    n = 1
    tgt = sl.Word((pp.START, pp.ARROW, pp.CHECK), 0)
    for w in itertools.product(enc.states.symbols, repeat=5):
        on_pattern = (w[1] == pp.START and w[2] in half_half.alphabet
                      and w[3] == pp.CHECK)
        p = sl.cylinder_prob(enc, sl.Word(w, -1), tgt, 1)
        if not on_pattern:
            assert p == 0, w


@pytest.fixture(scope="module")
def biased_cfca():
    doc = {
        "states": ["x", "y", "z", "o"],
        "neighborhood": [0],
        "local_distribution": {s: {"x": "1/4", "y": "1/2", "z": "1/4"}
                               for s in "xyzo"},
    }
    return sl.parse_sca(doc)


@pytest.fixture(scope="module")
def uniform_cfca():
    doc = {
        "states": ["x", "y", "z", "o"],
        "neighborhood": [0],
        "local_distribution": {s: {"x": "1/4", "y": "1/4", "z": "1/4", "o": "1/4"}
                               for s in "xyzo"},
    }
    return sl.parse_sca(doc)


def test_ppt_cfca_yes(biased_cfca):
    th = sl.ExponentialThreshold(Fraction(1, 16), Fraction(1, 3))
    res = sl.ppt_decide_cfca(biased_cfca, "x", "y", "z", th)
    assert res.answer
    wit = res.witness
    u = wit.input_word()
    pattern = sl.Word(("x",) + ("y",) * wit.n + ("z",), u.offset)
    p = sl.cylinder_prob(biased_cfca, u, pattern, 1)
    assert p == wit.probability
    assert p > th.value(wit.n)


def test_ppt_cfca_no(uniform_cfca):
    th = sl.ExponentialThreshold(Fraction(1, 2), Fraction(3, 4))
    res = sl.ppt_decide_cfca(uniform_cfca, "x", "y", "z", th)
    assert not res.answer
    # small-n exhaustive confirmation of the NO
    for n in range(1, 5):
        pattern = ("x",) + ("y",) * n + ("z",)
        for u0 in "xyzo":
            u = sl.Word((u0,) * (n + 2), 0)
            assert sl.cylinder_prob(uniform_cfca, u, sl.Word(pattern, 0), 1) \
                <= th.value(n)


def test_ppt_cfca_pumped_loop_branch():
    # short words stay under the threshold; only pumping the y-loop wins
    doc = {
        "states": ["x", "y", "z", "o"],
        "neighborhood": [0],
        "local_distribution": {s: {"x": "1/8", "y": "3/4", "z": "1/8"}
                               for s in "xyzo"},
    }
    a = sl.parse_sca(doc)
    th = sl.ExponentialThreshold(Fraction(1, 16), Fraction(1, 2))
    for n in (1, 2):  # the whole short range fails the threshold
        assert Fraction(1, 64) * Fraction(3, 4) ** n <= th.value(n)
    res = sl.ppt_decide_cfca(a, "x", "y", "z", th)
    assert res.answer and res.detail == "pumped loop"
    wit = res.witness
    assert wit.pump >= 1 and wit.n == 4
    u = wit.input_word()
    pattern = sl.Word(("x",) + ("y",) * wit.n + ("z",), u.offset)
    p = sl.cylinder_prob(a, u, pattern, 1)
    assert p == wit.probability and p > th.value(wit.n)


def test_ppt_cfca_never_x(uniform_cfca):
    doc = {
        "states": ["x", "y", "z", "o"],
        "neighborhood": [0],
        "local_distribution": {s: {"y": "1/2", "z": "1/2"} for s in "xyzo"},
    }
    a = sl.parse_sca(doc)
    th = sl.ExponentialThreshold(Fraction(1, 16), Fraction(1, 3))
    assert not sl.ppt_decide_cfca(a, "x", "y", "z", th).answer


def test_ppt_cfca_monotone_in_threshold(biased_cfca):
    # raising alpha or lambda can only flip YES to NO, never the reverse
    alphas = [Fraction(1, 16), Fraction(1, 2), Fraction(2)]
    lams = [Fraction(1, 3), Fraction(1, 2), Fraction(9, 10)]
    answers = {}
    for alpha in alphas:
        for lam in lams:
            th = sl.ExponentialThreshold(alpha, lam)
            answers[(alpha, lam)] = sl.ppt_decide_cfca(
                biased_cfca, "x", "y", "z", th).answer
    assert answers[(Fraction(1, 16), Fraction(1, 3))] is True
    assert answers[(Fraction(2), Fraction(9, 10))] is False
    for (a1, l1), ans1 in answers.items():
        for (a2, l2), ans2 in answers.items():
            if a1 <= a2 and l1 <= l2 and ans2:
                assert ans1, (a1, l1, a2, l2)


def test_ppt_cfca_requires_cfca(parity):
    th = sl.ExponentialThreshold(Fraction(1, 2), Fraction(1, 2))
    with pytest.raises(sl.NotCfca):
        sl.ppt_decide_cfca(parity, "0", "1", "#", th)


def test_ppt_sca_deterministic_yes():
    ident4 = sl.make_sca("xyzo", "0", [0], [0], lambda q, r: q[0], name="ident4")
    th = sl.SuperexponentialThreshold(Fraction(1, 2), Fraction(1), 1)
    res = sl.ppt_decide_sca(ident4, "x", "y", "z", th)
    assert res.answer
    wit = res.witness
    u = wit.input_word()
    pattern = sl.Word(("x",) + ("y",) * wit.n + ("z",), u.offset)
    assert sl.cylinder_prob(ident4, u, pattern, 1) == wit.probability > th.value(wit.n)


def test_ppt_sca_uniform_no(uniform_cfca):
    th = sl.SuperexponentialThreshold(Fraction(1, 2), Fraction(1), 1)
    res = sl.ppt_decide_sca(uniform_cfca, "x", "y", "z", th)
    assert not res.answer


def test_ppt_sca_budget_reports_horizon(biased_cfca):
    th = sl.SuperexponentialThreshold(Fraction(0), Fraction(1), 2)
    with pytest.raises(sl.ResourceExhausted, match="K="):
        sl.ppt_decide_sca(biased_cfca, "x", "y", "z", th,
                          sl.Budget(max_enum=500))


def test_threshold_parsing():
    th = pp.parse_threshold("exp:1/16,1/3")
    assert isinstance(th, sl.ExponentialThreshold)
    assert th.value(2) == Fraction(1, 16) * Fraction(1, 9)
    th2 = pp.parse_threshold("sup:1/2,1,1")
    assert isinstance(th2, sl.SuperexponentialThreshold)
    assert th2.value(1) == Fraction(1)
    with pytest.raises(FormatError):
        pp.parse_threshold("exp:1/2")


def test_threshold_validation():
    with pytest.raises(sl.ScaError):
        sl.ExponentialThreshold(Fraction(0), Fraction(1, 2))
    with pytest.raises(sl.ScaError):
        sl.ExponentialThreshold(Fraction(1), Fraction(1))
    with pytest.raises(sl.ScaError):
        sl.SuperexponentialThreshold(Fraction(-1), Fraction(1), 1)


def test_ppt_requires_four_states(blank):
    th = sl.ExponentialThreshold(Fraction(1, 2), Fraction(1, 2))
    with pytest.raises(sl.ScaError, match="4 states"):
        sl.ppt_decide_cfca(blank, "0", "1", "0", th)
