"""Freeze reference values for the statistics routines.

Samples are generated with numpy and stored next to the expected results,
so the Rust tests never depend on matching a random generator.

    python3 tools/stats_oracle.py crates/core/tests/fixtures/stats_oracle.json
"""

import json
import sys

import numpy as np
import scipy
import statsmodels
import statsmodels.api as sm
from scipy import stats
from statsmodels.stats.diagnostic import het_breuschpagan
from statsmodels.stats.stattools import durbin_watson


def dw_normal_p(d, X):
    """P(D <= d) under the null, normal approximation with exact moments."""
    n, k = X.shape
    A = 2 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)
    A[0, 0] = A[-1, -1] = 1
    M = np.eye(n) - X @ np.linalg.solve(X.T @ X, X.T)
    MA = M @ A
    p = np.trace(MA)
    q = np.trace(MA @ MA)
    dof = n - k
    mean = p / dof
    var = 2 * (dof * q - p * p) / (dof * dof * (dof + 2))
    return float(stats.norm.cdf(d, loc=mean, scale=np.sqrt(var)))


def regression_case(name, x, y, w):
    X = sm.add_constant(x)
    fit = sm.WLS(y, X, weights=w).fit()
    return {
        "name": name,
        "x": x.tolist(),
        "y": y.tolist(),
        "w": w.tolist(),
        "params": fit.params.tolist(),
        "bse": fit.bse.tolist(),
        "r2": float(fit.rsquared),
        "adj_r2": float(fit.rsquared_adj),
        "f": float(fit.fvalue),
        "f_p": float(fit.f_pvalue),
    }


def main(out):
    rng = np.random.default_rng(20240719)
    doc = {
        "generator": f"numpy {np.__version__}, scipy {scipy.__version__}, statsmodels {statsmodels.__version__}",
        "shapiro": [],
        "regression": [],
        "diagnostics": [],
        "feasible_weights": [],
    }

    for n in [3, 4, 5, 7, 11, 12, 20, 50, 87, 200, 1000]:
        for kind in ["normal", "exponential", "uniform"]:
            if kind == "normal":
                s = rng.normal(size=n)
            elif kind == "exponential":
                s = rng.exponential(size=n)
            else:
                s = rng.uniform(size=n)
            w, p = stats.shapiro(s)
            doc["shapiro"].append(
                {"name": f"{kind}_{n}", "sample": s.tolist(), "w": float(w), "p": float(p)}
            )

    for n in [5, 30, 87]:
        x = rng.uniform(0, 10, size=n)
        y = 1.3 + 0.8 * x + rng.normal(scale=0.5, size=n)
        doc["regression"].append(regression_case(f"ols_{n}", x, y, np.ones(n)))
        w = rng.uniform(0.2, 3.0, size=n)
        doc["regression"].append(regression_case(f"wls_{n}", x, y, w))

    for n, hetero in [(30, False), (87, True), (200, True), (12, False)]:
        x = rng.uniform(0, 5, size=n)
        scale = np.exp(0.4 * x) if hetero else np.ones(n)
        e = rng.normal(size=n) * scale
        if n == 12:
            e = np.cumsum(e)  # strongly autocorrelated
        y = 2.0 - 0.5 * x + e
        X = sm.add_constant(x)
        fit = sm.OLS(y, X).fit()
        r = fit.resid
        lm, lm_p, _, _ = het_breuschpagan(r, X, robust=True)
        d = float(durbin_watson(r))
        doc["diagnostics"].append(
            {
                "name": f"diag_{n}",
                "x": x.tolist(),
                "residuals": r.tolist(),
                "bp": float(lm),
                "bp_p": float(lm_p),
                "dw": d,
                "dw_p_regression": dw_normal_p(d, X),
                "dw_p_mean_only": dw_normal_p(d, np.ones((n, 1))),
            }
        )

    for n in [40, 200]:
        x = rng.uniform(0, 4, size=n)
        r = rng.normal(size=n) * np.exp(0.5 * x)
        floor = max(np.mean(r * r) * np.finfo(float).eps, np.finfo(float).tiny)
        lz = np.log(np.maximum(r * r, floor))
        aux = sm.OLS(lz, sm.add_constant(x)).fit()
        wts = np.exp(-aux.fittedvalues)
        doc["feasible_weights"].append(
            {"name": f"fw_{n}", "x": x.tolist(), "residuals": r.tolist(), "weights": wts.tolist()}
        )

    with open(out, "w") as f:
        json.dump(doc, f, indent=1)
        f.write("\n")


if __name__ == "__main__":
    main(sys.argv[1])
