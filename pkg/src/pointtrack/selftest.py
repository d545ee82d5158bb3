"""Fast oracle checks run by ``pointtrack selftest``."""

from __future__ import annotations

import numpy as np

from .correlation import local_corr_4d, local_corr_4d_oracle
from .metrics import GroundTruthTrack, average_jaccard, sample_queries
from .params import init_weights
from .refiner import RefinerConfig, attention, build_bias
from .track_init import kernel_softargmax, kernel_softargmax_grad
from .weights import WeightsContainer


def check_correlation(rng) -> str:
    worst = 0.0
    for _ in range(10):
        a = rng.standard_normal((12, 12, 8)).astype(np.float32)
        b = rng.standard_normal((12, 12, 8)).astype(np.float32)
        p, q = rng.uniform(-2, 13, 2), rng.uniform(-2, 13, 2)
        diff = np.abs(local_corr_4d(a, b, p, q).vol - local_corr_4d_oracle(a, b, p, q).vol).max()
        worst = max(worst, float(diff))
    assert worst < 1e-5, f"max abs diff {worst:.2e}"
    return f"max abs diff {worst:.1e}"


def check_softargmax(rng) -> str:
    cmap = np.zeros((9, 9))
    cmap[6, 2] = 1.0
    x, y = kernel_softargmax(cmap * 10)
    assert abs(x - 2) < 1e-3 and abs(y - 6) < 1e-3, (x, y)
    m = rng.standard_normal((7, 7)) * 0.05
    g = kernel_softargmax_grad(m)
    eps, worst = 1e-6, 0.0
    for i, j in [(2, 3), (3, 3), (4, 1)]:
        up, dn = m.copy(), m.copy()
        up[i, j] += eps
        dn[i, j] -= eps
        fd = (np.array(kernel_softargmax(up)) - np.array(kernel_softargmax(dn))) / (2 * eps)
        worst = max(worst, float(np.abs(fd - g[:, i, j]).max()))
    assert worst < 1e-5, f"gradient mismatch {worst:.2e}"
    return "delta recovery and gradient ok"


def check_bias(rng) -> str:
    cfg = RefinerConfig.for_variant("S")
    weights = init_weights("S", 0)
    bias = build_bias(6, cfg)
    x = rng.standard_normal((6, cfg.hidden)).astype(np.float32)
    _, attn = attention(x, weights, bias, return_weights=True)
    half = cfg.heads // 2
    future = np.triu(np.ones((6, 6), bool), 1)
    assert np.all(attn[:half][:, future] == 0) and np.all(attn[half:][:, future.T] == 0)
    return "causal masks exact"


def check_metrics(rng) -> str:
    pos = np.zeros((4, 2), np.float32)
    pred = pos + np.array([[0.5, 0], [3, 0], [3, 0], [20, 0]], np.float32)
    aj = average_jaccard(pred, np.full(4, -5.0), GroundTruthTrack(pos, np.ones(4, bool)))
    assert abs(aj - 0.55) < 1e-12, aj
    gt = GroundTruthTrack(np.zeros((20, 2)), np.ones(20, bool))
    assert [q.t for q in sample_queries(gt)] == [0, 5, 10, 15]
    return "AJ hand case 0.55, strided queries ok"


def check_container(rng) -> str:
    w = WeightsContainer({"a": rng.standard_normal((2, 3)), "b.c": np.arange(4)})
    back = WeightsContainer.from_bytes(w.to_bytes())
    assert all(np.array_equal(w[k].view(np.uint32), back[k].view(np.uint32)) for k in w)
    return "LTW1 round trip bit exact"


CHECKS = {
    "correlation": check_correlation,
    "softargmax": check_softargmax,
    "attention_bias": check_bias,
    "metrics": check_metrics,
    "weights_container": check_container,
}


def run_selftest(seed: int = 0) -> list[tuple[str, bool, str]]:
    rng = np.random.default_rng(seed)
    results = []
    for name, fn in CHECKS.items():
        try:
            results.append((name, True, fn(rng)))
        except AssertionError as e:
            results.append((name, False, str(e)))
    return results
