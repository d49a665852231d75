from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from voxmodem import coding
from voxmodem.coding import (
    ChainDecoder,
    CodeSpec,
    constellation,
    conv_encode,
    decode,
    deinterleave,
    depuncture,
    encode_chain,
    interleave,
    max_info_bits,
    precode,
    punctured_length,
    qam_hard_demap,
    qam_map,
    qam_soft_demap,
    unprecode,
)
from voxmodem.config import LLR_MAX, TURBO_PRECODED

from oracles import exact_bit_llrs, viterbi_decode

GOLDEN = Path(__file__).parent / "golden"

ALL_RATES = (Fraction(1, 2), Fraction(2, 3), Fraction(3, 4))


# --------------------------------------------------------------------------
# constellations

def test_constellations_match_golden_tables():
    for q in (2, 4, 6):
        pts, bits = constellation(q)
        for line in (GOLDEN / f"qam_q{q}.txt").read_text().splitlines():
            if line.startswith("#"):
                continue
            label_bits, re, im = line.split()
            label = int(label_bits, 2)
            assert pts[label] == pytest.approx(float(re) + 1j * float(im), abs=1e-9)
            assert "".join(map(str, bits[label])) == label_bits


def test_qpsk_bits_00_map_to_first_quadrant():
    sym = qam_map(np.array([0, 0], dtype=np.uint8), 2)
    assert sym[0] == pytest.approx((1 + 1j) / np.sqrt(2))


def test_unit_average_energy():
    for q in (2, 4, 6):
        pts, _ = constellation(q)
        assert np.mean(np.abs(pts) ** 2) == pytest.approx(1.0)


def test_qpsk_min_distance_sqrt2():
    pts, _ = constellation(2)
    d = [abs(a - b) for i, a in enumerate(pts) for b in pts[i + 1:]]
    assert min(d) == pytest.approx(np.sqrt(2))


def test_gray_property_adjacent_points_differ_one_bit():
    for q in (2, 4, 6):
        pts, bits = constellation(q)
        dmin = min(
            abs(pts[i] - pts[j])
            for i in range(len(pts))
            for j in range(i + 1, len(pts))
        )
        for i in range(len(pts)):
            for j in range(len(pts)):
                if i != j and abs(pts[i] - pts[j]) < dmin * 1.01:
                    assert int(np.sum(bits[i] != bits[j])) == 1


def test_hard_demap_roundtrip_all_labels():
    for q in (2, 4, 6):
        labels = np.arange(1 << q)
        bits = np.concatenate([
            [(lab >> (q - 1 - i)) & 1 for i in range(q)] for lab in labels
        ]).astype(np.uint8)
        assert np.array_equal(qam_hard_demap(qam_map(bits, q), q), bits)


def test_qam_map_rejects_ragged_input():
    with pytest.raises(ValueError):
        qam_map(np.array([0, 1, 0], dtype=np.uint8), 2)


# --------------------------------------------------------------------------
# soft demapping

def test_soft_demap_noiseless_limit_hits_clamp():
    for q in (2, 4, 6):
        pts, bits = constellation(q)
        label = 3
        ext = qam_soft_demap(pts[label:label + 1], 1e-12, np.zeros(q), q)
        signs = (ext > 0).astype(int)
        assert np.array_equal(signs, bits[label])
        assert np.all(np.abs(ext) == LLR_MAX)


def test_soft_demap_origin_is_all_zero_for_qpsk():
    ext = qam_soft_demap(np.zeros(1, dtype=complex), 0.5, np.zeros(2), 2)
    assert np.allclose(ext, 0.0)


def test_soft_demap_within_maxlog_gap_of_exact():
    # exact LLR by brute-force summation over the 4 QPSK points; the
    # max-log value may deviate by at most log(2) per logsumexp side
    pts, bits = constellation(2)
    est = np.array([0.9 + 0.1j])
    nv = 0.5
    exact = exact_bit_llrs(est[0], nv, np.zeros(2), pts, bits)
    ext = qam_soft_demap(est, nv, np.zeros(2), 2)
    assert np.all(np.abs(ext - exact) <= 2 * np.log(2) + 1e-12)


def test_soft_demap_excludes_own_prior():
    from voxmodem.kernels import MODE_EXACT

    pts, bits = constellation(4)
    rng = np.random.default_rng(0)
    est = (rng.normal(size=3) + 1j * rng.normal(size=3)) / 2
    priors = rng.normal(scale=2.0, size=12)
    base = qam_soft_demap(est, 0.4, priors, 4, mode=MODE_EXACT)
    bumped = priors.copy()
    bumped[5] += 4.0
    out = qam_soft_demap(est, 0.4, bumped, 4, mode=MODE_EXACT)
    # own extrinsic unchanged, the symbol's other bits shift
    assert out[5] == pytest.approx(base[5])
    assert not np.allclose(out[4:8], base[4:8])
    # bits of other symbols are untouched
    assert np.allclose(out[:4], base[:4])
    assert np.allclose(out[8:], base[8:])


def test_soft_demap_rejects_bad_noise_var():
    with pytest.raises(ValueError):
        qam_soft_demap(np.zeros(1, dtype=complex), 0.0, np.zeros(2), 2)


# --------------------------------------------------------------------------
# convolutional code

def test_all_zero_input_gives_all_zero_output():
    out = conv_encode(np.zeros(40, dtype=np.uint8), CodeSpec())
    assert not out.any()


def test_impulse_response_matches_golden():
    golden = (GOLDEN / "conv_impulse.txt").read_text().splitlines()[-1].strip()
    out = conv_encode(np.array([1], dtype=np.uint8), CodeSpec())
    assert "".join(map(str, out)) == golden


def test_conv_encode_length_contract():
    for rate in ALL_RATES:
        spec = CodeSpec(code_rate=rate)
        for n in (17, 64, 301):
            out = conv_encode(np.zeros(n, dtype=np.uint8), spec)
            assert out.size == punctured_length(n, spec)
    # unpunctured mother: 2*(n + K - 1)
    assert punctured_length(64, CodeSpec()) == 2 * (64 + 6)


def test_conv_encode_empty_rejected():
    with pytest.raises(ValueError):
        conv_encode(np.zeros(0, dtype=np.uint8), CodeSpec())


def test_codespec_rejects_zero_generator():
    with pytest.raises(ValueError):
        CodeSpec(generators=(0, 0o171))


# --------------------------------------------------------------------------
# precoder

def test_precode_known_vectors():
    assert np.array_equal(precode([0, 0, 0, 0]), [0, 0, 0, 0])
    assert np.array_equal(precode([1, 0, 0, 0]), [1, 1, 1, 1])
    assert np.array_equal(precode([1, 1, 0, 1]), [1, 0, 0, 1])


@given(st.lists(st.integers(0, 1), min_size=1, max_size=200))
def test_precode_unprecode_inverse(bits):
    arr = np.array(bits, dtype=np.uint8)
    assert np.array_equal(unprecode(precode(arr)), arr)


# --------------------------------------------------------------------------
# interleaver

def test_interleave_preserves_multiset():
    rng = np.random.default_rng(0)
    bits = rng.integers(0, 2, 256).astype(np.uint8)
    out = interleave(bits, seed=7, length=256)
    assert out.sum() == bits.sum()
    assert out.size == bits.size


def test_interleave_deterministic():
    bits = np.arange(8)
    a = interleave(bits, seed=7, length=8)
    b = interleave(bits, seed=7, length=8)
    assert np.array_equal(a, b)


@settings(max_examples=50)
@given(st.integers(0, 2**32), st.integers(2, 400))
def test_deinterleave_inverts_interleave(seed, n):
    data = np.arange(n)
    assert np.array_equal(deinterleave(interleave(data, seed, n), seed, n), data)


def test_interleave_length_mismatch():
    with pytest.raises(ValueError):
        interleave(np.zeros(5), seed=1, length=6)


# --------------------------------------------------------------------------
# decoder

def test_strong_llrs_decode_exactly():
    rng = np.random.default_rng(1)
    for kind in ("convolutional", TURBO_PRECODED):
        for rate in ALL_RATES:
            spec = CodeSpec(kind=kind, code_rate=rate, interleaver_seed=11)
            info = rng.integers(0, 2, 64).astype(np.uint8)
            cap = punctured_length(64, spec)
            mapped = encode_chain(info, spec, cap)
            llrs = LLR_MAX * (2.0 * mapped - 1.0)
            out, _ = decode(llrs, spec, n_info=64)
            assert np.array_equal(out, info), (kind, rate)


def test_all_zero_llrs_give_zero_extrinsic():
    spec = CodeSpec(interleaver_seed=5)
    cap = punctured_length(58, spec)
    _, ext = decode(np.zeros(cap), spec, n_info=58)
    assert np.allclose(ext, 0.0)


def test_noiseless_roundtrip_many_lengths():
    rng = np.random.default_rng(2)
    spec = CodeSpec(kind=TURBO_PRECODED, code_rate=Fraction(3, 4), interleaver_seed=3)
    for n in (16, 129, 1024):
        info = rng.integers(0, 2, n).astype(np.uint8)
        cap = punctured_length(n, spec) + 7
        mapped = encode_chain(info, spec, cap)
        llrs = LLR_MAX * (2.0 * mapped - 1.0)
        out, _ = decode(llrs, spec, n_info=n)
        assert np.array_equal(out, info), n


def test_maxlog_decisions_agree_with_viterbi():
    # independent oracle: textbook Viterbi over the same received LLRs
    rng = np.random.default_rng(3)
    spec = CodeSpec(interleaver_seed=9)
    for trial in range(20):
        info = rng.integers(0, 2, 64).astype(np.uint8)
        coded = conv_encode(info, spec)
        tx = 2.0 * coded - 1.0
        sigma = 0.9
        llr = 2.0 * (tx + rng.normal(0, sigma, coded.size)) / sigma**2

        mapped_llr = interleave(llr, spec.interleaver_seed, coded.size)
        ours, _ = decode(mapped_llr, spec, n_info=64)

        mother_llr, _ = depuncture(llr, 64, spec)
        ref = viterbi_decode(mother_llr)
        assert np.array_equal(ours, ref), trial


def test_decoder_extrinsic_equals_posterior_minus_prior():
    # for the plain convolutional chain the decoder's mapped-domain
    # extrinsic must reconstruct posterior = prior + extrinsic
    rng = np.random.default_rng(4)
    spec = CodeSpec(interleaver_seed=13)
    info = rng.integers(0, 2, 64).astype(np.uint8)
    cap = punctured_length(64, spec)
    mapped = encode_chain(info, spec, cap)
    llrs = 3.0 * (2.0 * mapped - 1.0) + rng.normal(0, 1, cap)
    dec = ChainDecoder(spec, 64, cap)
    _, ext = dec.iterate(llrs)
    # extrinsic for position i must not depend on the input llr at i
    probe = 17
    bumped = llrs.copy()
    bumped[probe] += 2.5
    dec2 = ChainDecoder(spec, 64, cap)
    _, ext2 = dec2.iterate(bumped)
    assert ext2[probe] == pytest.approx(ext[probe], abs=1e-9)


def test_decode_llr_scaling_monotonicity():
    # decoded BER should not get worse as LLR confidence doubles
    rng = np.random.default_rng(5)
    spec = CodeSpec(interleaver_seed=21)
    n = 1000
    errors = {}
    info = rng.integers(0, 2, n).astype(np.uint8)
    coded = conv_encode(info, spec)
    tx = 2.0 * coded - 1.0
    noisy = tx + rng.normal(0, 1.0, coded.size)
    base_llr = interleave(2.0 * noisy, spec.interleaver_seed, coded.size)
    for scale in (0.5, 1.0, 2.0):
        out, _ = decode(base_llr * scale, spec, n_info=n)
        errors[scale] = int(np.sum(out != info))
    assert errors[2.0] <= errors[0.5] + 2


def test_decode_length_mismatch():
    spec = CodeSpec()
    with pytest.raises(ValueError):
        ChainDecoder(spec, 64, punctured_length(64, spec)).iterate(np.zeros(10))


def test_max_info_bits_inverse_of_punctured_length():
    for rate in ALL_RATES:
        spec = CodeSpec(code_rate=rate)
        for cap in (256, 1000, 4096, 12288):
            n = max_info_bits(cap, spec)
            assert punctured_length(n, spec) <= cap
            assert punctured_length(n + 1, spec) > cap


# --------------------------------------------------------------------------
# bit helpers

@given(st.binary(min_size=0, max_size=64))
def test_bits_bytes_roundtrip(data):
    assert coding.bytes_from_bits(coding.bits_from_bytes(data)) == data
