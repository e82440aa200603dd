"""Acceptance battery: one test per criterion at its stated tolerance.

A pass/fail line per criterion is printed in the terminal summary.
"""

import io
import itertools
import time
from pathlib import Path

import numpy as np
import pytest

from flnip import cli
from flnip.datasets import SynthSpec, generate_synthetic, write_corpus
from flnip.evolver import GAConfig, evolve, mutate, precompute_tensor
from flnip.gaussian import ScaleBank, build_kernel, filter
from flnip.metrics import MetricId, block_distance
from flnip.patterns import (
    FeatureRecord,
    adjacent_set,
    canonicalize,
    extract_feature,
    flnip_code,
    flnip_codes,
    histogram,
    lbp_code,
    pattern_map,
)
from flnip.pixelgrid import GrayImage
from flnip.retrieval import (
    FeatureDatabase,
    build_index,
    evaluate,
    load_db,
    precision_at,
    query,
    recall_at,
    save_db,
)

from oracles import flnip_literal, lbp_literal, closed_form_adjacent

GOLDEN = Path(__file__).parent / "data" / "golden3.flnipdb"
GOLDEN_WINDOW = [[85, 30, 39], [10, 42, 55], [54, 27, 38]]


def random_db(rng, n, categories, blocks=4):
    recs = []
    for i in range(n):
        f = rng.random((blocks, 256)) * (rng.random((blocks, 256)) > 0.5)
        f[:, 0] += 1e-3
        f = (f / f.sum(axis=1, keepdims=True)).ravel()
        recs.append(FeatureRecord(f"img{i}", f"c{rng.integers(categories)}", canonicalize(f)))
    return FeatureDatabase(recs, (0.5, 0.8, 1.0)[: blocks - 1])


@pytest.mark.criterion(1, "FLNIP oracle equivalence on 10k random and all {0,1,255}^9 windows")
def test_oracle_equivalence():
    start = time.perf_counter()
    rng = np.random.default_rng(20240601)
    windows = np.concatenate(
        [
            rng.integers(0, 256, (10_000, 3, 3), dtype=np.uint8),
            np.array(list(itertools.product([0, 1, 255], repeat=9)), dtype=np.uint8).reshape(-1, 3, 3),
        ]
    )
    fast = flnip_codes(windows)
    mismatches = [i for i, w in enumerate(windows) if fast[i] != flnip_literal(w)]
    elapsed = time.perf_counter() - start
    assert mismatches == []
    assert elapsed < 10.0


@pytest.mark.criterion(2, "closed-form adjacent-set arithmetic at odd k gives the wrap set")
def test_adjacent_set_consistency():
    for k in (1, 3, 5, 7):
        wrap = {(k + d - 1) % 8 + 1 for d in (-2, -1, 1, 2)}
        assert set(closed_form_adjacent(k)) == wrap
        assert set(adjacent_set(k)) == wrap


@pytest.mark.criterion(3, "LBP golden window codes to 41")
def test_lbp_golden():
    assert lbp_code(GOLDEN_WINDOW) == 41
    assert lbp_literal(GOLDEN_WINDOW) == 41


@pytest.mark.criterion(4, "FLNIP of a constant window is 255")
def test_flnip_constant():
    for v in range(256):
        assert flnip_code(np.full((3, 3), v, dtype=np.uint8)) == 255


@pytest.mark.criterion(5, "histogram mass equals (W-2)(H-2) on 100 random images")
def test_histogram_mass():
    rng = np.random.default_rng(5)
    for _ in range(100):
        h, w = rng.integers(3, 40, size=2)
        image = GrayImage(rng.integers(0, 256, (h, w), dtype=np.uint8))
        for coder in ("flnip", "lbp"):
            counts = histogram(pattern_map(image, coder), normalize=False).bins
            assert counts.sum() == (w - 2) * (h - 2)


@pytest.mark.criterion(6, "Gaussian kernel sum, symmetry, radii and constant invariance")
def test_gaussian_kernel():
    assert build_kernel(0.5).radius == 2
    assert build_kernel(0.8).radius == 3
    for sigma in (0.5, 0.8, 1.0, 1.7, 3.0):
        k = build_kernel(sigma).weights
        assert abs(k.sum() - 1.0) <= 1e-12
        assert np.array_equal(k, k[::-1, :])
        assert np.array_equal(k, k[:, ::-1])
        assert np.array_equal(k, k.T)
    for sigma in (0.5, 0.8, 1.0):
        kernel = build_kernel(sigma)
        for v in range(256):
            flat = GrayImage(np.full((9, 11), v, dtype=np.uint8))
            assert filter(flat, kernel) == flat


@pytest.mark.criterion(7, "metric axioms on 1000 block pairs and zero-denominator rule")
def test_metric_axioms():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        a, b = rng.random((2, 256)) * (rng.random((2, 256)) > 0.3)
        a /= a.sum()
        b /= b.sum()
        for m in MetricId:
            dab = block_distance(a, b, m)
            assert dab >= 0
            assert dab == block_distance(b, a, m)
            assert block_distance(a, a, m) == 0
    a = np.zeros(256)
    b = np.zeros(256)
    a[0], b[1] = 1.0, 1.0
    # bins 2..255 are empty on both sides and must not contribute
    assert block_distance(a, b, "canberra") == 2.0
    assert block_distance(a, b, "chi_square") == 1.0
    assert block_distance(np.zeros(256), np.zeros(256), "canberra") == 0.0
    assert block_distance(np.zeros(256), np.zeros(256), "chi_square") == 0.0


@pytest.mark.criterion(8, "rankings unchanged under w -> c*w for 100 random cases")
def test_scale_invariance():
    rng = np.random.default_rng(8)
    for _ in range(100):
        db = random_db(rng, int(rng.integers(5, 25)), 3)
        q = db.records[int(rng.integers(len(db)))]
        w = rng.random(4) + 0.01
        c = 10 ** rng.uniform(-3, 3)
        base = [h.id for h in query(db, q, w, len(db)).ranked]
        scaled = [h.id for h in query(db, q, c * w, len(db)).ranked]
        assert base == scaled


@pytest.mark.criterion(9, "GA history nondecreasing and mutation flip rate 0.01 +/- 0.001")
def test_ga_monotone_and_flip_rate():
    for seed in range(10):
        db = random_db(np.random.default_rng(100 + seed), 30, 3)
        _, history = evolve(precompute_tensor(db), db.labels, GAConfig(generations=50, rng_seed=seed))
        assert len(history) == 50
        assert all(b >= a for a, b in zip(history, history[1:]))
    rng = np.random.default_rng(9)
    genes = np.full(1_000_000, 2.0)  # outside U[0,1) so every redraw is visible
    rate = np.mean(mutate(genes, 0.01, rng) != genes)
    assert abs(rate - 0.01) <= 0.001


@pytest.mark.criterion(10, "weights file byte-identical at 1, 4 and 8 threads")
def test_ga_determinism(tmp_path):
    db = random_db(np.random.default_rng(10), 40, 4)
    (tmp_path / "db").write_bytes(save_db(db))
    outputs = []
    for threads in (1, 4, 8):
        target = tmp_path / f"w{threads}"
        argv = ["train", "--db", str(tmp_path / "db"), "--gens", "20", "--seed", "3", "--threads", str(threads)]
        assert cli.main(argv + ["--output", str(target)], out=io.StringIO()) == 0
        outputs.append(target.read_bytes())
    assert outputs[0] == outputs[1] == outputs[2]


@pytest.mark.criterion(11, "every indexed image retrieves itself first at distance 0")
def test_self_retrieval():
    items = generate_synthetic(SynthSpec(class_count=4, samples_per_class=5, image_size=32, rng_seed=11))
    db = build_index(items)
    for image_id, category, image in items:
        for w in ([1, 1, 1, 1], [1, 0, 0, 0], [0.2, 0.9, 0.1, 0.5]):
            top = query(db, extract_feature(image, ScaleBank()), w, 1).ranked[0]
            assert (top.id, top.category, top.distance) == (image_id, category, 0.0)


@pytest.mark.criterion(12, "trend: raw <= uniform <= GA + 0.01 on the synthetic corpus")
def test_trend():
    start = time.perf_counter()
    db = build_index(generate_synthetic(SynthSpec(10, 20, 64, 20.0, 42)))
    best, _ = evolve(precompute_tensor(db), db.labels, GAConfig())
    p = {
        name: evaluate(db, w, [20]).precision[0]
        for name, w in (("raw", [1, 0, 0, 0]), ("uniform", [1, 1, 1, 1]), ("ga", best))
    }
    print(f"P_tot(20): {p}")
    assert p["raw"] <= p["uniform"]
    assert p["uniform"] <= p["ga"] + 0.01
    assert time.perf_counter() - start < 300


@pytest.mark.criterion(13, "feature length 1024 and byte-exact golden round trip")
def test_length_and_golden(tmp_path):
    items = generate_synthetic(SynthSpec(class_count=2, samples_per_class=2, image_size=16))
    write_corpus(items, tmp_path / "corpus")
    assert cli.main(["index", "--input", str(tmp_path / "corpus"), "--output", str(tmp_path / "db")], out=io.StringIO()) == 0
    db = load_db((tmp_path / "db").read_bytes())
    assert all(len(r.feature) == 1024 for r in db.records)
    assert db.feature_len == 1024
    data = GOLDEN.read_bytes()
    golden = load_db(data)
    assert len(golden) == 3
    assert all(len(r.feature) == 1024 for r in golden.records)
    assert save_db(golden) == data


@pytest.mark.criterion(14, "precision equals recall at n = category size")
def test_precision_recall_identity():
    rng = np.random.default_rng(14)
    for _ in range(20):
        db = random_db(rng, int(rng.integers(6, 30)), int(rng.integers(2, 5)))
        sizes = {c: len(ix) for c, ix in db.categories.items()}
        w = rng.random(4) + 0.01
        for rec in db.records:
            result = query(db, rec, w, len(db))
            n = sizes[rec.category]
            assert precision_at(result, rec.category, n) == recall_at(result, rec.category, n, n)
