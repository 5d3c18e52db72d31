import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nbldpc.bec_decoder import (
    ERASED,
    ChannelOutput,
    DecoderState,
    DecodingContradiction,
    a_priori_set,
    a_priori_sets,
    check_update,
    decode,
    decode_erasures,
    decode_reference,
    transmit,
    variable_update,
)
from nbldpc.galois_field import FieldUnit, get_field
from nbldpc.subspace_lattice import AffineSet
from nbldpc.tanner_code import LdpcCode, random_codeword

from conftest import small_code


def S(p, elems):
    return AffineSet.from_elements(p, elems)


def channel(*lines):
    return ChannelOutput.from_lines(lines)


def test_a_priori_table_rows():
    # first character is the most significant bit
    assert a_priori_sets(channel("0xx"))[0] == S(3, [0, 1, 2, 3])
    assert a_priori_sets(channel("000"))[0] == S(3, [0])
    assert a_priori_sets(channel("x00"))[0] == S(3, [0, 4])
    assert a_priori_sets(channel("xxx"))[0] == AffineSet.full(3)
    assert a_priori_sets(channel("1x0"))[0] == S(3, [4, 6])


def test_channel_classify_and_roundtrip(tmp_path):
    ch = channel("0x1", "xxx", "101")
    assert list(ch.classify()) == ["partial", "erased", "received"]
    ch.write(tmp_path / "ch.txt")
    again = ChannelOutput.read(tmp_path / "ch.txt")
    assert np.array_equal(again.bits, ch.bits)
    assert ch.bits[0].tolist() == [1, ERASED, 0]


def test_transmit_erases_at_rate(rng):
    word = rng.integers(0, 4, 20_000)
    ch = transmit(word, 2, 0.3, rng)
    assert ch.bits.shape == (20_000, 2)
    frac = (ch.bits == ERASED).mean()
    assert abs(frac - 0.3) < 0.01
    kept = ch.bits != ERASED
    truth = (word[:, None] >> np.arange(2)) & 1
    assert np.array_equal(ch.bits[kept], truth[kept])


def _state(code, prior, A, B=None):
    full = AffineSet.full(code.p)
    return DecoderState(prior, A, B or [full] * code.E, list(prior))


def test_check_update_examples(gf4):
    one = FieldUnit(1, gf4)
    lone = LdpcCode(gf4, "field", 1, 1, [(0, 0, one)])
    st_ = _state(lone, [AffineSet.full(2)], [AffineSet.full(2)])
    assert check_update(lone, st_, 0) == S(2, [0])

    code = LdpcCode(gf4, "field", 3, 1, [(0, 0, one), (0, 1, FieldUnit(2, gf4)), (0, 2, one)])
    A = [S(2, [0]), S(2, [0, 1]), S(2, [0])]
    st_ = _state(code, A, A)
    # edge 0 sees 2*{0,1} + {0}
    assert check_update(code, st_, 0) == S(2, [0, 2])
    A = [S(2, [1]), S(2, [3]), S(2, [0])]
    st_ = _state(code, A, A)
    assert check_update(code, st_, 2) == S(2, [1 ^ gf4.mul(2, 3)])


def test_variable_update_examples(gf8):
    one = FieldUnit(1, gf8)
    code = LdpcCode(gf8, "field", 1, 2, [(0, 0, one), (1, 0, one)])
    prior = [S(3, [0, 1, 2, 3])]
    B = [S(3, [0, 1, 4, 5]), AffineSet.full(3)]
    st_ = _state(code, prior, [prior[0]] * 2, B)
    assert variable_update(code, st_, 1) == S(3, [0, 1])
    assert variable_update(code, st_, 0) == prior[0]

    lone = LdpcCode(gf8, "field", 1, 1, [(0, 0, one)])
    st_ = _state(lone, prior, prior, [S(3, [7])])
    assert variable_update(lone, st_, 0) == prior[0]
    single = [S(3, [6])]
    st_ = _state(code, single, single * 2, [S(3, [4, 5, 6, 7]), AffineSet.full(3)])
    assert variable_update(code, st_, 1) == single[0]


def test_decode_worked_example(gf4):
    code = LdpcCode(gf4, "field", 2, 1, [(0, 0, FieldUnit(1, gf4)), (0, 1, FieldUnit(2, gf4))])
    res = decode(code, channel("01", "xx"))
    assert res.success
    assert res.symbols == [1, 3]


def test_decode_no_erasures_one_iteration(rng):
    code = small_code(n=30)
    word = random_codeword(code, rng)
    res = decode(code, transmit(word, 2, 0.0, rng))
    assert res.success and res.iterations == 1
    assert res.symbols == word.tolist()


def test_decode_everything_erased():
    code = small_code(n=30)
    ch = ChannelOutput(np.full((30, 2), ERASED))
    res = decode(code, ch)
    assert res.outcome == "stalled"
    assert all(s == AffineSet.full(2) for s in res.sets)
    assert res.residual_bits() == 60


def test_contradiction_is_reported(gf4):
    code = LdpcCode(gf4, "field", 2, 1, [(0, 0, FieldUnit(1, gf4)), (0, 1, FieldUnit(1, gf4))])
    with pytest.raises(DecodingContradiction):
        decode(code, channel("01", "10"))


def test_max_iters_validation():
    code = small_code(n=30)
    with pytest.raises(ValueError):
        decode(code, ChannelOutput(np.zeros((30, 2))), max_iters=0)
    with pytest.raises(ValueError):
        decode(code, ChannelOutput(np.zeros((29, 2))))


@pytest.mark.parametrize("p,kind", [(2, "field"), (3, "field"), (2, "matrix"), (3, "matrix")])
def test_fast_decoder_matches_reference(p, kind, rng):
    code = small_code(p=p, kind=kind, n=30, seed=p)
    for _ in range(15):
        word = random_codeword(code, rng)
        ch = transmit(word, p, rng.uniform(0.2, 0.8), rng)
        a, b = decode(code, ch), decode_reference(code, ch)
        assert (a.sets, a.outcome, a.iterations) == (b.sets, b.outcome, b.iterations)


def test_decoder_on_p5_uses_object_path(rng):
    code = small_code(p=5, n=15, seed=1)
    word = random_codeword(code, rng)
    res = decode(code, transmit(word, 5, 0.2, rng))
    assert res.codes is None
    assert all(word[n] in s for n, s in enumerate(res.sets))


def test_decode_erasures_summary(rng):
    code = small_code(n=60)
    word = random_codeword(code, rng)
    ch = transmit(word, 2, 0.7, rng)
    ok, residual = decode_erasures(code, ch)
    res = decode(code, ch)
    assert ok == res.success and residual == res.residual_bits()


def _check_trace(code, word, ch):
    """Genie containment, monotone shrinkage and power-of-two sizes along a trace."""
    states = []
    decode(code, ch, trace=lambda s: states.append(s))
    h_s = [code.edge_label(e).apply(int(word[code.vars[e]])) for e in range(code.E)]
    prev = None
    for st_ in states:
        for e in range(code.E):
            assert int(word[code.vars[e]]) in st_.var_to_check[e]
            assert h_s[e] in st_.check_to_var[e]
        for n, s in enumerate(st_.a_posteriori):
            assert int(word[n]) in s
            assert s.size & (s.size - 1) == 0
        if prev is not None:
            for a, b in zip(st_.var_to_check, prev.var_to_check):
                assert set(a.elements()) <= set(b.elements())
            for a, b in zip(st_.a_posteriori, prev.a_posteriori):
                assert set(a.elements()) <= set(b.elements())
        prev = st_


@given(st.integers(0, 2**32 - 1), st.sampled_from([(2, "field"), (3, "field"), (2, "matrix")]),
       st.floats(0.05, 0.95))
def test_decoder_invariants(seed, group, eps):
    p, kind = group
    rng = np.random.default_rng(seed)
    code = small_code(p=p, kind=kind, n=24, seed=seed % 1000)
    word = random_codeword(code, rng)
    _check_trace(code, word, transmit(word, p, eps, rng))


def test_all_zero_word_gives_linear_sets(rng):
    code = small_code(p=3, n=30)
    ch = transmit(np.zeros(30, dtype=int), 3, 0.6, rng)
    for s in decode(code, ch).sets:
        assert 0 in s


def test_a_priori_set_direct():
    assert a_priori_set([ERASED, 0, 1], 3) == S(3, [4, 5])
    assert get_field(3).q == 8
