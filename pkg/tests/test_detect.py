import math

import numpy as np
import pytest

from tabdrw.detect import (DetectError, NullStats, alignment_counts, calibrate_null, count_alignments,
                           detect, load_null, save_null, theoretical_null, z_score)
from tabdrw.embed import EmbedConfig, EmbedError, embed
from tabdrw.synth import GaussianSpec, generate


def test_theoretical_null_values():
    n2 = theoretical_null(2)
    assert (n2.mu, round(n2.sigma, 2)) == (1.0, 0.71)
    n4 = theoretical_null(4, alphas=(0.01, 0.001, 0.5))
    assert (n4.mu, n4.sigma) == (2.0, 1.0)
    assert math.floor(n4.critical(0.01) * 100) / 100 == 2.32  # 2.3263, truncated
    assert round(n4.critical(0.001), 2) == 3.09
    assert n4.critical(0.5) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(DetectError):
        n4.critical(0.2)


def test_z_score_examples():
    null = theoretical_null(5)
    assert z_score(np.full(1000, 5), null) == pytest.approx(math.sqrt(5000))
    assert z_score(np.full(10, 2), theoretical_null(4)) == 0.0


def test_hard_flip_gives_all_aligned_rows(gaussian_table):
    t = gaussian_table(1000, 11, seed=1)
    cfg = EmbedConfig(1.0, 1.0, 77, postprocess=False)
    marked, rep = embed(t, cfg)
    counts = alignment_counts(marked, cfg, rep.state.frozen(), rep.bits)
    assert counts.min() == 5


def test_unwatermarked_mean_alignment_near_half(rng):
    Z = rng.standard_normal((1000, 11))
    bits = rng.integers(0, 2, (1000, 5))
    counts = count_alignments(Z, 0, bits=bits)
    assert abs(counts.mean() - 2.5) < 3 * math.sqrt(5) / 2 / math.sqrt(1000)


def test_wrong_key_alignment_near_half(gaussian_table):
    marked, _ = embed(gaussian_table(5000, 11, seed=2), EmbedConfig(0.5, 0.5, 1))
    counts = alignment_counts(marked, EmbedConfig(0.5, 0.5, 2, privacy=True))
    # a fixed key carries a small null offset of its own, hence the loose band
    assert abs(counts.mean() / 5 - 0.5) < 0.05


def test_watermarked_table_detected(gaussian_table):
    t = gaussian_table(1000, 11, seed=3)
    cfg = EmbedConfig(0.5, 0.5, 928)
    marked, _ = embed(t, cfg)
    rep = detect(marked, cfg)
    assert rep.decision and rep.z > 6
    assert not detect(t, cfg).decision


def test_schema_mismatch_is_an_error(gaussian_table):
    cfg = EmbedConfig(0.5, 0.5, 1, columns=("a", "b", "c"))
    with pytest.raises(EmbedError):
        detect(gaussian_table(100, 5), cfg)


def test_null_m_must_match(gaussian_table):
    with pytest.raises(DetectError):
        detect(gaussian_table(100, 11), EmbedConfig(0.5, 0.5, 1), null=theoretical_null(4))


def test_calibrated_null(gaussian_table):
    cfg = EmbedConfig(0.5, 0.5, 928)
    tables = [gaussian_table(1000, 11, seed=100 + i) for i in range(20)]
    null = calibrate_null(tables, cfg, n_resamples=20_000, alphas=(0.001, 0.05))
    assert abs(null.mu - 2.5) < 0.15
    assert 2.6 <= null.critical(0.001) <= 3.6
    assert null.critical(0.05) < null.critical(0.001)


def test_calibration_preconditions(gaussian_table):
    cfg = EmbedConfig(0.5, 0.5, 1)
    tables = [gaussian_table(50, 5, seed=i) for i in range(10)]
    with pytest.raises(DetectError):
        calibrate_null(tables, cfg, n_resamples=1)
    with pytest.raises(DetectError):
        calibrate_null(tables[:3], cfg, n_resamples=1000)


def test_null_file_roundtrip(tmp_path):
    null = NullStats(2.4, 1.1, {0.001: 3.05, 0.01: 2.3}, "monte_carlo", 5)
    save_null(null, tmp_path / "n.json")
    assert load_null(tmp_path / "n.json") == null


def test_frozen_and_refit_agree_on_clean_tables(gaussian_table):
    t = gaussian_table(500, 7, seed=9)
    cfg = EmbedConfig(0.5, 0.5, 4)
    _, rep = embed(t, cfg)
    a = alignment_counts(t, cfg)
    b = alignment_counts(t, cfg, rep.state.frozen())
    assert np.array_equal(a, b)
