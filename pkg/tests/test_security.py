import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wiretapcodes.gf2 import GF2Field
from wiretapcodes.security import (Seed, all_seeds, concat_bits, decode_map,
                                   decode_secret, default_seed_candidates,
                                   encode_map, encode_secret, format_bits,
                                   leftmost_bits, parse_bits, select_seed)


class TestBitStrings:
    def test_parse_and_format(self):
        assert parse_bits("0001") == (1, 4)
        assert parse_bits("10") == (2, 2)
        assert format_bits(1, 4) == "0001"

    def test_parse_rejects_junk(self):
        for bad in ("", "012", "ab"):
            with pytest.raises(ValueError):
                parse_bits(bad)

    def test_concat_is_left_then_right(self):
        # 1 || 010 = 1010
        assert concat_bits(0b1, 1, 0b010, 3) == 0b1010

    def test_leftmost_bits(self):
        assert leftmost_bits(0b1010, 4, 1) == 1
        assert leftmost_bits(0b0110, 4, 2) == 0b01

    def test_width_overflow_rejected(self):
        with pytest.raises(ValueError):
            concat_bits(2, 1, 0, 3)
        with pytest.raises(ValueError):
            format_bits(16, 4)


class TestSeed:
    def test_zero_seed_rejected(self):
        with pytest.raises(ValueError):
            Seed(0, 4)

    def test_string_round_trip(self):
        seed = Seed.from_string("0001")
        assert (seed.lam, seed.q) == (1, 4)
        assert seed.to_string() == "0001"

    def test_reference_seed_strings(self):
        # the identity seed at each of the reference widths
        for bits, q in (("0001", 4), ("000001", 6), ("00000001", 8),
                        ("0000000001", 10)):
            seed = Seed.from_string(bits)
            assert seed.lam == 1 and seed.q == q


class TestHashPair:
    def test_identity_seed_is_concatenation(self):
        field = GF2Field(4)
        seed = Seed(1, 4)
        assert encode_secret(0b1, 0b010, seed, field, k=1) == 0b1010

    def test_decode_identity_seed(self):
        field = GF2Field(4)
        seed = Seed(1, 4)
        assert decode_secret(0b1010, seed, field, k=1) == 1
        assert decode_secret(0b0110, seed, field, k=2) == 0b01

    def test_encode_matches_field_oracle(self):
        field = GF2Field(4)
        seed = Seed(0b0010, 4)
        # lam^{-1} = 0b1001; encoding (s||b) = 0b0011 must equal 1001*0011
        got = encode_secret(0b0, 0b011, seed, field, k=1)
        assert got == field.mul(0b1001, 0b0011)

    @pytest.mark.parametrize("q", [4, 6])
    def test_round_trip_exhaustive(self, q):
        field = GF2Field(q)
        for k in range(1, q + 1):
            for lam in range(1, field.order):
                seed = Seed(lam, q)
                for s in range(1 << k):
                    for b in range(1 << (q - k)):
                        v = encode_secret(s, b, seed, field, k)
                        assert decode_secret(v, seed, field, k) == s

    @settings(max_examples=100, deadline=None)
    @given(st.data())
    def test_round_trip_sampled_q10(self, data):
        q = 10
        field = GF2Field(q)
        k = data.draw(st.integers(1, q))
        lam = data.draw(st.integers(1, field.order - 1))
        s = data.draw(st.integers(0, (1 << k) - 1))
        b = data.draw(st.integers(0, (1 << (q - k)) - 1))
        seed = Seed(lam, q)
        assert decode_secret(encode_secret(s, b, seed, field, k), seed, field, k) == s

    @pytest.mark.parametrize("q", [4, 6])
    def test_encode_is_bijective_per_seed(self, q):
        field = GF2Field(q)
        for lam in (1, 2, field.order - 1):
            values = {encode_secret(w >> (q - 1), w & ((1 << (q - 1)) - 1),
                                    Seed(lam, q), field, k=1)
                      for w in range(field.order)}
            assert len(values) == field.order

    def test_uniform_inputs_give_uniform_output(self):
        # phi is a bijection, so uniform (s, b) maps to exactly uniform v;
        # a sampled chi-square checks the full pipeline at desk scale
        from scipy.stats import chisquare

        q, k = 4, 1
        field = GF2Field(q)
        seed = Seed(0b0111, q)
        rng = np.random.default_rng(7)
        s = rng.integers(0, 1 << k, size=20_000)
        b = rng.integers(0, 1 << (q - k), size=20_000)
        table = encode_map(seed, field, k)
        v = table[(s << (q - k)) | b]
        counts = np.bincount(v, minlength=field.order)
        assert chisquare(counts).pvalue > 1e-3

    @pytest.mark.parametrize("q", [4, 6])
    def test_two_universality_bruteforce(self, q):
        field = GF2Field(q)
        table = field.mul_table()
        n_seeds = field.order - 1
        for k in range(1, q + 1):
            psi = table[1:, :] >> (q - k)  # row = seed, col = input
            bound = 2.0 ** (-k)
            for v1 in range(field.order):
                collisions = (psi[:, v1 + 1:] == psi[:, v1:v1 + 1]).sum(axis=0)
                assert np.all(collisions / n_seeds <= bound + 1e-12)


class TestLookupMaps:
    def test_maps_match_scalar_functions(self):
        q, k = 6, 2
        field = GF2Field(q)
        seed = Seed(0b000101, q)
        enc = encode_map(seed, field, k)
        dec = decode_map(seed, field, k)
        for s in range(1 << k):
            for b in range(1 << (q - k)):
                w = (s << (q - k)) | b
                assert enc[w] == encode_secret(s, b, seed, field, k)
                assert dec[enc[w]] == s

    def test_map_seed_width_mismatch(self):
        with pytest.raises(ValueError):
            encode_map(Seed(1, 4), GF2Field(6), 1)


class TestSelectSeed:
    def test_single_candidate(self):
        only = Seed(3, 4)
        assert select_seed([only], lambda s: 1.0) is only

    def test_argmin(self):
        seeds = [Seed(1, 4), Seed(2, 4)]
        oracle = {1: 0.3, 2: 0.1}
        assert select_seed(seeds, lambda s: oracle[s.lam]).lam == 2

    def test_tie_breaks_to_smallest_lambda(self):
        seeds = [Seed(5, 4), Seed(2, 4), Seed(9, 4)]
        assert select_seed(seeds, lambda s: 0.5).lam == 2

    def test_empty_candidates_rejected(self):
        with pytest.raises(ValueError):
            select_seed([], lambda s: 0.0)

    def test_default_candidates(self):
        assert len(default_seed_candidates(4)) == 15
        assert len(all_seeds(6)) == 63
        with pytest.raises(ValueError):
            default_seed_candidates(7)
