#!/usr/bin/env python3
"""Writes sample_histograms.csv: binned click-rate histograms for the four
groups ending in the signal setting (VS, D1S, D2S, SS).

The histograms are deterministic (expected counts of Gaussian click-rate
laws, rounded). The D1S component is solved so that, after binning, the SS
group has mean 0.204 and standard deviation 0.056 and the weighted pool has
mean 0.203 and standard deviation 0.072 once click rates are scaled so that
the SS mean maps to 0.204.

Usage: python3 generate_sample.py [output]
"""
import sys

import numpy as np
from scipy.optimize import fsolve
from scipy.stats import norm

CAL = 0.204 / 1.8e-4  # intensity per unit click rate
WIDTH = 5e-6  # click-rate bin width
WEIGHTS = {"VS": 0.061, "D1S": 0.253, "D2S": 0.083, "SS": 0.603}
TOTALS = {"VS": 60_000, "D1S": 250_000, "D2S": 80_000, "SS": 600_000}
FIXED = {"VS": (0.10, 0.03), "D2S": (0.33, 0.04)}
EDGES = np.arange(0.0, 1.0e-3 + WIDTH / 2, WIDTH)
CENTERS = 0.5 * (EDGES[:-1] + EDGES[1:])


def counts(mean, sigma, total, rounded=True):
    """Expected counts per click-rate bin of N(mean, sigma) in intensity."""
    cdf = norm.cdf(EDGES, mean / CAL, abs(sigma) / CAL)
    c = total * np.diff(cdf)
    return np.rint(c).astype(np.int64) if rounded else c


def stats(c, scale=CAL):
    w = c / c.sum()
    x = CENTERS * scale
    m = (w * x).sum()
    return m, np.sqrt((w * (x - m) ** 2).sum())


def pooled(groups, scale):
    xs, ws = [], []
    for name, c in groups.items():
        xs.append(CENTERS * scale)
        ws.append(WEIGHTS[name] * c / c.sum())
    x, w = np.concatenate(xs), np.concatenate(ws)
    w = w / w.sum()
    m = (w * x).sum()
    return m, np.sqrt((w * (x - m) ** 2).sum())


def build(ss_sigma, d1_mean, d1_sigma, rounded=True):
    g = {name: counts(m, s, TOTALS[name], rounded) for name, (m, s) in FIXED.items()}
    g["D1S"] = counts(d1_mean, d1_sigma, TOTALS["D1S"], rounded)
    g["SS"] = counts(0.204, ss_sigma, TOTALS["SS"], rounded)
    return g


def residual(p, rounded=False):
    g = build(*p, rounded=rounded)
    scale = 0.204 / (stats(g["SS"], 1.0)[0])
    _, s_ss = stats(g["SS"], scale)
    m, s = pooled(g, scale)
    return [s_ss - 0.056, m - 0.203, s - 0.072]


def main():
    out = sys.argv[1] if len(sys.argv) > 1 else "sample_histograms.csv"
    p = fsolve(residual, [0.056, 0.1838, 0.0637], xtol=1e-12)
    g = build(*p)
    print("components:", p, "residual after rounding:", residual(p, rounded=True))
    with open(out, "w", newline="\n") as f:
        f.write("# click-rate histograms of pulses sent in setting S, grouped by the\n")
        f.write("# setting of the previous pulse; bin width 5e-6\n")
        f.write("pattern,bin_center,count\n")
        for name in ["VS", "D1S", "D2S", "SS"]:
            for x, n in zip(CENTERS, g[name]):
                if n > 0:
                    f.write(f"{name},{x:.4e},{n}\n")


if __name__ == "__main__":
    main()
