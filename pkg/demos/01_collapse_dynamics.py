#!/usr/bin/env python3
"""Singular-value dynamics of a linear model under graph smoothing.

Builds a two-block stochastic block model, whitens random node features,
forms the feature-interaction matrix P = X^T L X, and follows the
closed-form flow W(t) = exp(Pt) W(0). The small/large singular-value
ratios shrink monotonically, at the exact rate e^{-(gap) t} across the
largest spectral gap of P, and the honest gradient-descent iteration
converges to the matched exponential flow as the step size shrinks.
"""

import numpy as np

from orthoreg.collapse import (
    build_p,
    closed_form_trajectory,
    gd_linear_trajectory,
    largest_gap_split,
    verify_ratio_monotonicity,
    whiten,
)
from orthoreg.graphio import normalize
from orthoreg.synth import sbm_graph
from orthoreg.tensor import sym_eigvals


def main():
    rng = np.random.default_rng(7)
    graph, _ = sbm_graph(n_nodes=40, n_blocks=2, intra_p=0.5, inter_p=0.05, seed=7)
    lap = normalize(graph, "laplacian")
    x = whiten(rng.standard_normal((40, 8)))
    p = build_p(x, lap)
    eigs = sym_eigvals(p)
    d = largest_gap_split(eigs)
    print(f"P spectrum: {np.round(eigs, 2)}")
    print(f"largest gap after index {d}: {eigs[d-1]:.3f} -> {eigs[d]:.3f}")

    t_final = 12.0 / (eigs[0] - eigs[-1])
    times = np.linspace(0.0, t_final, 50)
    run = closed_form_trajectory(p, np.eye(8), times, sign=+1)
    verdict = verify_ratio_monotonicity(run, d)
    print(f"\nclosed-form flow, {len(times)} snapshots to t={t_final:.4f}")
    print(f"  small/large ratios monotone non-increasing: {verdict.monotone_ratio_ok}")
    print(f"  final across-gap ratio: {verdict.vanishing_ratio_estimate:.3e}")
    print(f"  analytic e^(-gap*t):    {np.exp(-(eigs[d-1]-eigs[d]) * t_final):.3e}")

    eta = 0.03 / eigs[0]
    steps = 60
    gd = gd_linear_trajectory(x, lap, np.eye(8), eta, steps, snapshot_every=steps)
    ref = closed_form_trajectory(p, np.eye(8), [0.0, 2 * eta * steps], sign=-1)
    err = np.linalg.norm(gd.snapshots[-1].state - ref.snapshots[-1].state)
    print(f"\ngradient descent vs matched exponential flow: |diff| = {err:.2e}")
    print("(halve the step size and the difference halves: first-order consistency)")


if __name__ == "__main__":
    main()
