"""Independent oracles used by the tests (deliberately naive)."""

import itertools
import math

import numpy as np

from ncorbifold.algebra import ActionGroupoid, Haar
from ncorbifold.groups import cycle_reflection, cycle_rotation, regular_action, symmetric_group


def naive_convolve(gpd, f, g):
    """w * sum over composable arrow pairs (g1, x1) o (g2, x2) with x1 = g2 . x2."""
    G, act = gpd.group, gpd.action.table
    out = np.zeros(gpd.shape, dtype=complex)
    for (g1, x1), (g2, x2) in itertools.product(gpd.arrows(), repeat=2):
        if x1 == act[g2, x2]:
            out[G.table[g1, g2], x2] += f[g1, x1] * g[g2, x2]
    return gpd.weight * out


def floyd_warshall(graph):
    n = graph.n_vertices
    d = np.full((n, n), math.inf)
    np.fill_diagonal(d, 0.0)
    for u, v, length in graph.edge_list():
        d[u, v] = d[v, u] = min(d[u, v], length)
    for k in range(n):
        d = np.minimum(d, d[:, k:k + 1] + d[k:k + 1, :])
    return d


def circle_spectrum(n, h, rank):
    theta = 2 * np.pi * np.arange(n) / n
    if rank == 1:
        return np.sort(-np.sin(theta) / h)
    mag = 2 * np.abs(np.sin(theta / 2)) / h
    return np.sort(np.concatenate([mag, -mag]))


def algebra_groupoids():
    """The three algebra-suite groupoids under both conventions."""
    acts = {"refl_c6": cycle_reflection(6), "rot_c6": cycle_rotation(6, 2),
            "s3_regular": regular_action(symmetric_group(3))}
    return {(name, haar.value): ActionGroupoid(a, haar) for name, a in acts.items() for haar in Haar}
