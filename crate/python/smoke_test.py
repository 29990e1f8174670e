"""Smoke test for the dfas extension module.

Build and install it first, e.g. `maturin develop -m crates/python/Cargo.toml`.
"""
import math
import random
import tempfile
from pathlib import Path

import dfas


def check_bayer():
    w, h = 8, 6
    raw = [random.randrange(1025) for _ in range(w * h)]
    img = dfas.SensorImage.from_raw(w, h, raw)
    assert (img.width, img.height) == (4, 3)
    assert img.channel(0)[0] == raw[0] and img.channel(3)[0] == raw[w + 1]
    assert img.to_raw() == raw


def check_metrics():
    live = [0.8, 0.9, 0.7, 0.95]
    spoof = [0.1, 0.2, 0.3, 0.75]
    scores, labels = live + spoof, [True] * 4 + [False] * 4
    e = dfas.eer(scores, labels)
    assert 0.0 < e < 0.5, e
    fnr, fpr, _, attainable = dfas.fnr_at_fpr(scores, labels, 0.25)
    assert fpr <= 0.25 and attainable
    roc = dfas.roc_curve(scores, labels)
    assert roc[0][1:] == (0.0, 1.0) and roc[-1][1:] == (1.0, 0.0)
    triples = [[s, s, s] for s in scores]
    t, fnr, fpr, fallback = dfas.threshold_search(triples, labels, 0.3)
    assert fpr <= 0.3 and not fallback


def check_evidential():
    loss, grad = dfas.edl_loss([0.0, 0.0], True)
    assert math.isclose(loss, 2 * (0.25 + 0.25 / 3), rel_tol=1e-12)
    assert dfas.liveness([9.0, 0.0]) == (10 / 11, 2 / 11)


def check_pipeline():
    with tempfile.TemporaryDirectory() as d:
        data = Path(d) / "data"
        n = dfas.synth(str(data), 12, seed=3, mix="live=0.5,plane=0.5", rig="rectified")
        assert n == 12
        pair = dfas.LandmarkPair.load(str(data / "samples" / "s000000.json"))
        dx, dy = pair.sparse_disparity()
        assert len(dx) == 45 and max(abs(v) for v in dy) < 1e-9
        maps = pair.maps(640, 480)
        assert maps.width == 640 and len(maps.map_x()) == 640 * 480
        assert len(pair.feature_pairs()) == 2025
        _, _, score = pair.planarity()
        assert 0.0 <= score <= 1.0
        assert len(dfas.delaunay(pair.left())) > 40

        model = Path(d) / "pairs.model"
        dfas.train(str(data), "pairs", str(model), epochs=2, seed=1)
        rows = dfas.score(str(model), str(data), "all")
        assert len(rows) == 12 and all(0.0 <= r[3] <= 1.0 for r in rows)


if __name__ == "__main__":
    random.seed(0)
    check_bayer()
    check_metrics()
    check_evidential()
    check_pipeline()
    print("dfas python smoke test passed")
