#!/usr/bin/env python3
"""Measure empirical tolerances and freeze them into tests/fixtures/.

Run once before (re)building the test suite:

    python3 tools/calibrate.py

Outputs tests/fixtures/calibration.json with:
  - newton-schulz: relative Frobenius distance to the exact polar factor
    U V^T over seeded matrices (square set shared with the orthogonalization
    equivalence tests, plus a 16x8 set), recorded as the 99th percentile, and
    the min/max singular value observed across all iteration outputs.
  - the pairwise-distance band of the QR random projection on seeded
    Gaussian data (3072 -> 256, 1000 pairs).

Tests replay the identical seeded procedures, so the recorded numbers are
reproduced exactly; nothing here is assumed a priori.
"""
import json
import pathlib
import sys

import numpy as np

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from optlab import linalg  # noqa: E402

SQUARE_SEEDS = list(range(100))
RECT_SEEDS = list(range(1000, 1100))


def square_matrix(seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    n = int(rng.integers(4, 33))
    return rng.normal(size=(n, n))


def rect_matrix(seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.normal(size=(16, 8))


def ns_distances(mats):
    dists, sig_lo, sig_hi = [], np.inf, -np.inf
    for m in mats:
        target = linalg.svd(m)
        polar = target.u @ target.v.T
        approx = linalg.newton_schulz_msign(m)
        dists.append(
            float(np.linalg.norm(approx - polar) / np.linalg.norm(polar))
        )
        svals = np.linalg.svd(approx, compute_uv=False)
        sig_lo = min(sig_lo, float(svals.min()))
        sig_hi = max(sig_hi, float(svals.max()))
    return np.array(dists), sig_lo, sig_hi


def jl_band():
    rng = np.random.default_rng(424242)
    x = rng.normal(size=(200, 3072))
    gauss = np.random.default_rng(7).normal(size=(3072, 256))
    q = linalg.qr_orthonormal(gauss)
    xp = x @ q
    pair_rng = np.random.default_rng(99)
    ratios = []
    for _ in range(1000):
        i, j = pair_rng.integers(0, x.shape[0], size=2)
        while i == j:
            i, j = pair_rng.integers(0, x.shape[0], size=2)
        num = np.linalg.norm(xp[i] - xp[j])
        den = np.linalg.norm(x[i] - x[j])
        ratios.append(float(num / den))
    ratios = np.array(ratios)
    return {
        "ratio_min": float(ratios.min()),
        "ratio_max": float(ratios.max()),
        "expected_scale": float(np.sqrt(256 / 3072)),
        "n_pairs": 1000,
        "data_seed": 424242,
        "projection_seed": 7,
        "pair_seed": 99,
    }


def main():
    sq_dists, sq_lo, sq_hi = ns_distances(square_matrix(s) for s in SQUARE_SEEDS)
    rc_dists, rc_lo, rc_hi = ns_distances(rect_matrix(s) for s in RECT_SEEDS)
    out = {
        "newton_schulz": {
            "square_seeds": [SQUARE_SEEDS[0], SQUARE_SEEDS[-1]],
            "rect_seeds": [RECT_SEEDS[0], RECT_SEEDS[-1]],
            "tau_square_p99": float(np.percentile(sq_dists, 99)),
            "tau_square_max": float(sq_dists.max()),
            "tau_rect_p99": float(np.percentile(rc_dists, 99)),
            "tau_rect_max": float(rc_dists.max()),
            "sigma_lo": min(sq_lo, rc_lo),
            "sigma_hi": max(sq_hi, rc_hi),
        },
        "jl_projection": jl_band(),
    }
    dest = pathlib.Path(__file__).resolve().parents[1] / "tests" / "fixtures"
    dest.mkdir(parents=True, exist_ok=True)
    path = dest / "calibration.json"
    path.write_text(json.dumps(out, indent=2) + "\n")
    print(f"wrote {path}")
    for k, v in out["newton_schulz"].items():
        print(f"  {k}: {v}")
    print(f"  jl ratio band: [{out['jl_projection']['ratio_min']:.6f}, "
          f"{out['jl_projection']['ratio_max']:.6f}]")


if __name__ == "__main__":
    main()
