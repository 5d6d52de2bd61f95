"""Verification statistics: histograms, detection tests, authorization."""

import numpy as np
import pytest

from conftest import KEY, KEY_B
from corpusgen import corpus
from mimicmark import channel as ch
from mimicmark import verify as vf
from mimicmark import watermark as wmk
from mimicmark.channel import AccuracySampleSet
from mimicmark.errors import (
    EmptySampleSetError,
    IdenticalPayloadsError,
    NullMismatchError,
    TooFewSamplesError,
)


def _samples(values, n_bits=32, **kw):
    return AccuracySampleSet(samples=np.asarray(values, dtype=np.int64), n_bits=n_bits, **kw)


# A deterministic witness population realizing the artists'-images calibration row:
# bins (0, 0, 109, 867, 24), avg exactly 19.54, best 29.
ARTIST_ROW_POPULATION = np.repeat(
    np.array([13, 20, 21, 26, 29]), np.array([109, 711, 156, 23, 1])
)


class TestHistogram:
    def test_table_population_five_bins(self):
        hist = vf.histogram(_samples(ARTIST_ROW_POPULATION), "five-20pct")
        assert hist == (0, 0, 109, 867, 24)

    def test_all_at_max_lands_in_last_bin(self):
        hist = vf.histogram(_samples([32] * 7), "five-20pct")
        assert hist == (0, 0, 0, 0, 7)

    def test_preset_draws_match_row_proportions(self):
        s = ch.sample_accuracies(ch.preset("t1-artist-clean"), 10_000, seed=5)
        hist = np.array(vf.histogram(s, "five-20pct")) / 10_000
        target = np.array([0, 0.255, 0.741, 0.004, 0])
        assert np.max(np.abs(hist - target)) < 0.03

    def test_five_bins_aggregate_ten_bins(self):
        rng = np.random.default_rng(8)
        s = _samples(rng.integers(0, 33, 500))
        five = vf.histogram(s, "five-20pct")
        ten = vf.histogram(s, "ten-10pct")
        assert all(five[i] == ten[2 * i] + ten[2 * i + 1] for i in range(5))
        assert sum(five) == len(s) == sum(ten)

    def test_empty_rejected(self):
        with pytest.raises(EmptySampleSetError):
            vf.histogram(_samples([]))


class TestSummary:
    def test_matches_artist_row(self):
        s = vf.summary(_samples(ARTIST_ROW_POPULATION))
        assert s["avg_bits"] == pytest.approx(19.54, abs=1e-12)
        assert s["best_bits"] == 29

    def test_singleton(self):
        s = vf.summary(_samples([21]))
        assert s == {"avg_bits": 21.0, "best_bits": 21}

    def test_normal_finetune_row(self):
        s = ch.sample_accuracies(ch.preset("t3-normal-finetune"), 10_000, seed=2)
        out = vf.summary(s)
        assert out["avg_bits"] == pytest.approx(19.96, abs=0.5)
        assert out["best_bits"] == 29


class TestNullModel:
    def test_chance_constructor(self):
        n = vf.NullModel.chance(32)
        assert n.p0 == 0.5 and n.kind == "theoretical-chance"

    def test_reference_needs_100_samples(self):
        with pytest.raises(TooFewSamplesError):
            vf.NullModel.from_reference(_samples([16] * 50))

    def test_reference_estimates_moments(self):
        s = ch.sample_accuracies(ch.preset("t1-artist-clean"), 2000, seed=3)
        n = vf.NullModel.from_reference(s)
        assert n.p0 == pytest.approx(14.03 / 32, abs=0.02)
        assert 0.0 <= n.rho < 0.2

    def test_pmf_normalizes(self):
        for rho in (0.0, 0.05, 0.3):
            n = vf.NullModel.chance(32, rho=rho)
            assert n.pmf().sum() == pytest.approx(1.0, abs=1e-9)


class TestDetect:
    def test_strong_signal_detected(self):
        s = ch.sample_accuracies(ch.preset("t1-artist-watermarked"), 1000, seed=4)
        v = vf.detect(s, vf.NullModel.chance(32))
        assert v.decision == "theft-detected"
        assert v.p_mean < 1e-10

    def test_flat_chance_samples_no_evidence(self):
        v = vf.detect(_samples([16] * 10), vf.NullModel.chance(32))
        assert v.decision == "no-evidence"
        # exact discrete tail includes the point mass at the observed sum
        assert v.p_mean == pytest.approx(0.5, abs=0.05)

    def test_nbits_mismatch(self):
        with pytest.raises(NullMismatchError):
            vf.detect(_samples([8] * 10, n_bits=16), vf.NullModel.chance(32))

    def test_small_sample_uses_max_test_only(self):
        # 5 samples: mean test abstains, an extreme max still fires
        v = vf.detect(_samples([31, 32, 30, 31, 32]), vf.NullModel.chance(32))
        assert v.p_mean == 1.0
        assert v.p_max < 1e-4
        assert v.decision == "theft-detected"

    def test_empty_rejected(self):
        with pytest.raises(TooFewSamplesError):
            vf.detect(_samples([]), vf.NullModel.chance(32))

    def test_exact_small_n_mean_path(self):
        # N in [10, 30) exercises the convolution fallback
        s = ch.sample_accuracies(ch.preset("t1-artist-watermarked"), 12, seed=6)
        v = vf.detect(s, vf.NullModel.chance(32))
        assert 0.0 <= v.p_mean <= 1.0

    def test_verdict_invariants(self):
        s = ch.sample_accuracies(ch.preset("t2-rivagan"), 500, seed=9)
        v = vf.detect(s, vf.NullModel.chance(32), alpha=1e-4)
        assert (v.decision == "theft-detected") == (min(v.p_mean, v.p_max) < v.alpha_used)
        assert sum(v.histogram_5bin) == v.sample_count
        assert sum(v.histogram_10bin) == v.sample_count

    def test_reorder_invariance(self):
        rng = np.random.default_rng(10)
        vals = rng.integers(10, 28, 200)
        v1 = vf.detect(_samples(vals), vf.NullModel.chance(32))
        v2 = vf.detect(_samples(vals[::-1].copy()), vf.NullModel.chance(32))
        assert v1.p_mean == v2.p_mean
        assert v1.p_max == v2.p_max
        assert v1.histogram_5bin == v2.histogram_5bin

    def test_adding_max_sample_never_raises_p_max(self):
        vals = list(np.random.default_rng(11).integers(10, 25, 50))
        v1 = vf.detect(_samples(vals), vf.NullModel.chance(32))
        v2 = vf.detect(_samples(vals + [32]), vf.NullModel.chance(32))
        assert v2.p_max <= v1.p_max

    @pytest.mark.parametrize("n_images", [50, 1000])
    def test_false_positive_control_other_sizes(self, n_images):
        # under a correctly specified null, detection rate stays <= alpha;
        # 1000 trials at alpha=1e-4 admit at most ~3 flukes (P<=3 > 0.999)
        null = vf.NullModel.chance(32)
        rng = np.random.default_rng(4242 + n_images)
        pmf = null.pmf()
        draws = rng.choice(33, size=(1000, n_images), p=pmf)
        fp = sum(
            vf.detect(AccuracySampleSet(samples=row, n_bits=32), null).decision
            == "theft-detected"
            for row in draws
        )
        assert fp <= 3

    def test_ks_reported_with_reference(self):
        ref = ch.sample_accuracies(ch.preset("t1-artist-clean"), 1000, seed=12)
        sus = ch.sample_accuracies(ch.preset("t1-artist-watermarked"), 1000, seed=13)
        null = vf.NullModel.from_reference(ref)
        v = vf.detect(sus, null)
        assert v.p_ks is not None and v.p_ks < 1e-6
        assert v.decision == "theft-detected"

    def test_sparse_mixture_detected_by_max_statistic(self):
        # 10%-watermarked suspect set against an empirical clean null: the
        # handful of high-accuracy outliers carries the verdict while the
        # population mean barely moves
        ref = ch.sample_accuracies(ch.preset("t1-artist-clean"), 1000, seed=600)
        null = vf.NullModel.from_reference(ref)
        mixture = ch.mix(
            ch.preset("s54-mix-watermarked"), ch.preset("t1-artist-clean"), 0.1
        )
        suspect = ch.sample_accuracies(mixture, 100, seed=627)
        v = vf.detect(suspect, null, alpha=1e-3)
        assert v.decision == "theft-detected"
        assert v.p_max < v.p_mean
        assert v.p_max < 1e-3 <= v.p_mean


class TestMatchAuthorization:
    def test_exact_authorized_match(self):
        auth = wmk.WatermarkPayload.random(32, seed=1, role="authorized")
        unauth = wmk.WatermarkPayload.random(32, seed=2)
        m = vf.match_authorization(list(auth.bits), auth, unauth)
        assert m.ruling == "authorized"
        assert m.acc_vs_authorized.acc == 1.0

    def test_two_flips_rules_unauthorized(self):
        auth = wmk.WatermarkPayload.random(32, seed=3, role="authorized")
        unauth = wmk.WatermarkPayload.random(32, seed=4)
        bits = list(unauth.bits)
        bits[0] ^= 1
        bits[9] ^= 1
        m = vf.match_authorization(bits, auth, unauth)
        assert m.ruling == "unauthorized"
        assert m.acc_vs_unauthorized.acc == 0.9375

    def test_random_bits_indeterminate(self):
        rng = np.random.default_rng(5)
        auth = wmk.WatermarkPayload.random(32, seed=6, role="authorized")
        unauth = wmk.WatermarkPayload.random(32, seed=7)
        rulings = [
            vf.match_authorization(list(rng.integers(0, 2, 32)), auth, unauth).ruling
            for _ in range(50)
        ]
        assert rulings.count("indeterminate") >= 45

    def test_identical_payloads_rejected(self):
        p = wmk.WatermarkPayload.random(32, seed=8)
        q = wmk.WatermarkPayload.from_bits(p.bits, role="authorized")
        with pytest.raises(IdenticalPayloadsError):
            vf.match_authorization(list(p.bits), q, p)


class TestMultiArtist:
    def test_zero_records_empty_map(self):
        assert vf.multi_artist_verify([], []) == {}

    def test_key_isolation(self):
        # artist 2's images are watermarked; artists 1 and 3 must not fire
        images = corpus(12, size=256, seed=881_100)
        keys = [KEY, KEY_B, bytes.fromhex("aa" * 16)]
        payloads = [wmk.WatermarkPayload.random(32, seed=50 + i) for i in range(3)]
        cfgs = [wmk.CodecConfig(method="dwt-dct-svd", key=k) for k in keys]
        marked = [wmk.embed(im, payloads[1], cfgs[1])[0] for im in images]

        class Rec:
            def __init__(self, aid, cfg, payload):
                self.artist_id = aid
                self.codec = cfg
                self.payload = payload

        records = [Rec(f"artist{i}", cfgs[i], payloads[i]) for i in range(3)]
        verdicts = vf.multi_artist_verify(marked, records, alpha=1e-4)
        assert verdicts["artist1"].decision == "theft-detected"
        assert verdicts["artist0"].decision == "no-evidence"
        assert verdicts["artist2"].decision == "no-evidence"
        assert verdicts["artist0"].p_mean > 0.01
        assert verdicts["artist2"].p_mean > 0.01

    def test_failing_record_does_not_abort_others(self):
        images = corpus(10, size=256, seed=882_100)

        class Rec:
            def __init__(self, aid, cfg, payload):
                self.artist_id = aid
                self.codec = cfg
                self.payload = payload

        good = Rec("ok", wmk.CodecConfig(method="dwt-dct", key=KEY),
                   wmk.WatermarkPayload.random(32, seed=1))
        bad = Rec("broken", wmk.CodecConfig(method="dwt-dct-svd", key=KEY, payload_length=128,
                                            redundancy=5),
                  wmk.WatermarkPayload.random(128, seed=2))
        verdicts = vf.multi_artist_verify(images, [bad, good])
        assert isinstance(verdicts["broken"], Exception)
        assert verdicts["ok"].decision == "no-evidence"
