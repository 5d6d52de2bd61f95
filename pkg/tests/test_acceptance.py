"""Acceptance suite: one test per criterion, one pass/fail line each.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines. Tolerances are pinned here, not calibrated at runtime; every
simulated quantity is drawn under a fixed seed.
"""

import math
import time

import numpy as np
import pytest

from conftest import KEY, KEY_B
from mimicmark import attacks as atk
from mimicmark import channel as ch
from mimicmark import verify as vf
from mimicmark import watermark as wmk
from mimicmark.stats import chi2_gof, normal_sf

PAYLOAD = wmk.WatermarkPayload.random(32, seed=2026)
CFG_SVD = wmk.CodecConfig(method="dwt-dct-svd", key=KEY)
CFG_DCT = wmk.CodecConfig(method="dwt-dct", key=KEY)

ACCEPT_SEED = 80_801


def _announce(num: int, ok: bool, detail: str) -> None:
    print(f"ACCEPTANCE {num}: {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, detail


def _binomial_above_chance_p(correct: int, total: int) -> float:
    """One-sided binomial p-value for accuracy > 1/2 (normal approx with
    continuity correction; z-scores here are far beyond approximation error)."""
    z = (correct - 0.5 - total / 2) / math.sqrt(total / 4)
    return normal_sf(z)


@pytest.fixture(scope="module")
def marked20(corpus20):
    by_codec = {}
    for name, cfg in (("dwt-dct-svd", CFG_SVD), ("dwt-dct", CFG_DCT)):
        by_codec[name] = [wmk.embed(img, PAYLOAD, cfg)[0] for img in corpus20]
    return by_codec


@pytest.fixture(scope="module")
def marked100(corpus100):
    return [wmk.embed(img, PAYLOAD, CFG_SVD)[0] for img in corpus100]


def test_criterion_1_roundtrip_exactness(corpus20):
    t0 = time.monotonic()
    worst_psnr = math.inf
    all_exact = True
    for cfg in (CFG_SVD, CFG_DCT):
        for img in corpus20:
            marked, stats = wmk.embed(img, PAYLOAD, cfg)
            worst_psnr = min(worst_psnr, stats.psnr)
            acc = wmk.bit_accuracy(wmk.extract(marked, cfg), PAYLOAD).acc
            all_exact &= acc == 1.0
    elapsed = time.monotonic() - t0
    ok = all_exact and worst_psnr >= 38.0 and elapsed < 30.0
    _announce(
        1,
        ok,
        f"both codecs exact on 20 images, min psnr {worst_psnr:.1f} dB "
        f"(>=38), runtime {elapsed:.1f}s (<30)",
    )


def test_criterion_2_bit_accuracy_exact():
    ref = wmk.WatermarkPayload.random(32, seed=5)
    bits = list(ref.bits)
    bits[7] ^= 1
    bits[23] ^= 1
    acc = wmk.bit_accuracy(bits, ref)
    ok = acc.correct_bits == 30 and acc.acc == 0.9375
    _announce(2, ok, f"30/32 agreement returns acc {acc.acc} (exactly 0.9375)")


def test_criterion_3_null_behavior(corpus100, marked100):
    reference = wmk.WatermarkPayload.random(32, seed=ACCEPT_SEED + 1)
    details = []
    ok = True
    for name, cfg in (("dwt-dct-svd", CFG_SVD), ("dwt-dct", CFG_DCT)):
        accs = [wmk.bit_accuracy(wmk.extract(img, cfg), reference).acc for img in corpus100]
        mean = float(np.mean(accs))
        details.append(f"{name} clean {mean:.3f}")
        ok &= abs(mean - 0.5) <= 0.03
    wrong = wmk.CodecConfig(method="dwt-dct-svd", key=KEY_B)
    accs = [wmk.bit_accuracy(wmk.extract(img, wrong), PAYLOAD).acc for img in marked100]
    mean = float(np.mean(accs))
    details.append(f"wrong-key {mean:.3f}")
    ok &= abs(mean - 0.5) <= 0.05
    _announce(3, ok, "null accuracy near chance: " + ", ".join(details))


def test_criterion_4_attack_robustness(marked20):
    cfgs = {"dwt-dct-svd": CFG_SVD, "dwt-dct": CFG_DCT}
    ok = True
    details = []

    # jpeg q=75 floor on the QIM codec
    spec75 = atk.parse_attack_spec("jpeg:q=75")
    accs = [
        atk.attack_then_extract(im, spec75, CFG_SVD, PAYLOAD).acc
        for im in marked20["dwt-dct-svd"]
    ]
    jpeg75 = float(np.mean(accs))
    ok &= jpeg75 >= 0.90
    details.append(f"jpeg75 svd {jpeg75:.3f} (>=0.90)")

    # every battery attack above chance for the better-suited codec
    worst_p = 0.0
    for _, spec_str in atk.DEFAULT_ATTACK_BATTERY:
        spec = atk.parse_attack_spec(spec_str)
        best_p = 1.0
        for name, cfg in cfgs.items():
            correct = sum(
                atk.attack_then_extract(im, spec, cfg, PAYLOAD).correct_bits
                for im in marked20[name]
            )
            best_p = min(best_p, _binomial_above_chance_p(correct, 20 * 32))
        worst_p = max(worst_p, best_p)
        ok &= best_p < 1e-6
    details.append(f"battery worst p {worst_p:.1e} (<1e-6)")

    # jpeg monotonicity on the QIM codec
    grid = []
    for q in (90, 75, 50, 30):
        spec = atk.parse_attack_spec(f"jpeg:q={q}")
        grid.append(
            float(
                np.mean(
                    [
                        atk.attack_then_extract(im, spec, CFG_SVD, PAYLOAD).acc
                        for im in marked20["dwt-dct-svd"]
                    ]
                )
            )
        )
    mono = all(b <= a + 1e-9 for a, b in zip(grid, grid[1:]))
    ok &= mono
    details.append("jpeg grid " + "/".join(f"{a:.3f}" for a in grid) + " nonincreasing")
    _announce(4, ok, "; ".join(details))


def test_criterion_5_overlay(marked20):
    overlay_payload = wmk.WatermarkPayload.random(32, seed=ACCEPT_SEED + 2)
    cfg_over = wmk.CodecConfig(method="dwt-dct", key=KEY_B)
    orig_accs, over_correct = [], 0
    for im in marked20["dwt-dct-svd"]:
        spec = atk.AttackSpec(kind="overlay", params={"config": cfg_over, "payload": overlay_payload})
        attacked = atk.apply_attack(im, spec).image
        orig_accs.append(wmk.bit_accuracy(wmk.extract(attacked, CFG_SVD), PAYLOAD).acc)
        over_correct += wmk.bit_accuracy(
            wmk.extract(attacked, cfg_over), overlay_payload
        ).correct_bits
    orig_mean = float(np.mean(orig_accs))
    p_over = _binomial_above_chance_p(over_correct, 20 * 32)
    ok = orig_mean >= 0.85 and p_over < 1e-6
    _announce(
        5,
        ok,
        f"after overlay: original acc {orig_mean:.3f} (>=0.85), "
        f"overlay above chance p {p_over:.1e}",
    )


CALIBRATION_ROWS = [
    ("t1-artist-clean", 14.03, (0, 255, 741, 4, 0)),
    ("t1-artist-watermarked", 19.54, (0, 0, 109, 867, 24)),
    ("t1-ai-clean", 14.66, (0, 163, 826, 11, 0)),
    ("t1-ai-watermarked", 19.07, (0, 0, 193, 797, 10)),
    ("t1-natural-clean", 14.47, (0, 176, 805, 10, 0)),
    ("t1-natural-watermarked", 19.31, (0, 0, 520, 468, 12)),
    ("t2-no-watermark", 15.18, (0, 86, 908, 6, 0)),
    ("t2-dwtdct", 17.41, (0, 43, 502, 439, 16)),
    ("t2-dwtdctsvd", 18.57, (0, 37, 482, 454, 27)),
    ("t2-ssl", 19.29, (0, 0, 237, 748, 15)),
    ("t2-rivagan", 19.72, (0, 0, 111, 840, 49)),
    ("t3-normal-finetune", 19.96, (0, 0, 0, 0, 0, 261, 640, 81, 13, 5)),
    ("t3-two-stage-finetune", 19.02, (0, 0, 0, 11, 125, 245, 571, 44, 4, 0)),
]


def test_criterion_6_channel_calibration():
    t0 = time.monotonic()
    ok = True
    worst_p, worst_avg_err = 1.0, 0.0
    for i, (name, avg, bins) in enumerate(CALIBRATION_ROWS):
        model = ch.preset(name)
        samples = ch.sample_accuracies(model, 10_000, seed=ACCEPT_SEED + 10 + i)
        emp_avg = float(np.mean(samples.samples))
        binning = "five-20pct" if len(bins) == 5 else "ten-10pct"
        hist = np.asarray(vf.histogram(samples, binning), dtype=float)
        row = np.asarray(bins, dtype=float)
        _, _, p = chi2_gof(hist, row / row.sum())
        worst_p = min(worst_p, p)
        worst_avg_err = max(worst_avg_err, abs(emp_avg - avg))
        ok &= abs(emp_avg - avg) <= 0.5 and p > 0.01
    elapsed = time.monotonic() - t0
    ok &= elapsed < 10.0
    _announce(
        6,
        ok,
        f"{len(CALIBRATION_ROWS)} presets: worst avg err {worst_avg_err:.2f} bits "
        f"(<=0.5), worst GoF p {worst_p:.3f} (>0.01), runtime {elapsed:.1f}s (<10)",
    )


def test_criterion_7_detector_power_and_size():
    null = vf.NullModel.chance(32)
    model = ch.preset("t1-artist-watermarked")

    detected = 0
    for trial in range(1000):
        s = ch.sample_accuracies(model, 100, seed=ACCEPT_SEED + 100 + trial)
        if vf.detect(s, null).decision == "theft-detected":
            detected += 1
    power = detected / 1000

    rng = np.random.default_rng(ACCEPT_SEED + 7)
    pmf = null.pmf()
    draws = rng.choice(33, size=(10_000, 100), p=pmf)
    false_pos = 0
    for row in draws:
        s = ch.AccuracySampleSet(samples=row, n_bits=32)
        if vf.detect(s, null).decision == "theft-detected":
            false_pos += 1
    # Binomial(1e4, 1e-4) acceptance region: P(X <= 5) > 0.999
    ok = power >= 0.999 and false_pos <= 5
    _announce(
        7,
        ok,
        f"power {power:.3f} (>=0.999) at N=100; {false_pos}/10000 null detections "
        f"(binomial CI for rate 1e-4 allows <=5)",
    )


def test_criterion_8_mixture_behavior():
    w = ch.preset("s54-mix-watermarked")
    c = ch.preset("t1-artist-clean")
    means = []
    for i, p in enumerate((0.0, 0.1, 0.4, 0.8, 1.0)):
        s = ch.sample_accuracies(ch.mix(w, c, p), 10_000, seed=ACCEPT_SEED + 200 + i)
        means.append(float(np.mean(s.samples)))
    mono = all(b >= a - 0.1 for a, b in zip(means, means[1:]))
    tail = ch.sample_accuracies(ch.mix(w, c, 0.1), 1000, seed=ACCEPT_SEED + 210)
    best = int(np.max(tail.samples))
    ok = mono and best >= 27
    _announce(
        8,
        ok,
        f"mixture means {['%.2f' % m for m in means]} nondecreasing; "
        f"p=0.1 1000-draw max {best} (>=27)",
    )


def test_criterion_9_multi_artist_isolation(corpus100):
    images = corpus100[:30]
    keys = [KEY, KEY_B, bytes.fromhex("5a" * 16)]
    payloads = [wmk.WatermarkPayload.random(32, seed=ACCEPT_SEED + 300 + i) for i in range(3)]
    cfgs = [wmk.CodecConfig(method="dwt-dct-svd", key=k) for k in keys]

    victim = 1
    pipeline = [
        ch.surrogate_degrade(
            wmk.embed(img, payloads[victim], cfgs[victim])[0], "standard",
            seed=ACCEPT_SEED + 400 + i,
        )
        for i, img in enumerate(images)
    ]

    class Rec:
        def __init__(self, aid, cfg, payload):
            self.artist_id = aid
            self.codec = cfg
            self.payload = payload

    records = [Rec(f"artist{i}", cfgs[i], payloads[i]) for i in range(3)]
    verdicts = vf.multi_artist_verify(pipeline, records, alpha=1e-4)
    flagged = {a for a, v in verdicts.items() if getattr(v, "decision", "") == "theft-detected"}
    nonvictim_p = min(
        verdicts[f"artist{i}"].p_mean for i in range(3) if i != victim
    )
    ok = flagged == {"artist1"} and nonvictim_p > 0.01
    _announce(
        9,
        ok,
        f"flagged {sorted(flagged)} (expect ['artist1']); victim p_mean "
        f"{verdicts['artist1'].p_mean:.1e}; min non-victim p_mean {nonvictim_p:.2f} (>0.01)",
    )


def test_criterion_10_end_to_end(corpus100, marked100):
    t0 = time.monotonic()
    null = vf.NullModel.chance(32)

    degraded = [
        ch.surrogate_degrade(img, "standard", seed=ACCEPT_SEED + 500 + i)
        for i, img in enumerate(marked100)
    ]
    verdict_theft = vf.extract_and_detect(degraded, CFG_SVD, PAYLOAD, null=null)

    clean_degraded = [
        ch.surrogate_degrade(img, "standard", seed=ACCEPT_SEED + 700 + i)
        for i, img in enumerate(corpus100)
    ]
    verdict_clean = vf.extract_and_detect(clean_degraded, CFG_SVD, PAYLOAD, null=null)

    elapsed = time.monotonic() - t0
    ok = (
        verdict_theft.decision == "theft-detected"
        and verdict_clean.decision == "no-evidence"
        and elapsed < 300.0
    )
    _announce(
        10,
        ok,
        f"watermarked pipeline: {verdict_theft.decision} (avg {verdict_theft.avg_bits:.1f} bits, "
        f"p_mean {verdict_theft.p_mean:.1e}); clean pipeline: {verdict_clean.decision}; "
        f"runtime {elapsed:.0f}s (<300)",
    )
