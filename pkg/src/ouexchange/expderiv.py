"""Derivatives of exp(h) from derivatives of h (Faa di Bruno via recurrence)."""

from __future__ import annotations

from math import comb


def exp_derivatives(g, dh):
    """Return [g, Dg, ..., D^k g] for g = exp(h).

    ``dh[j]`` is D^{j+1} h; k = len(dh). Uses
    D^k g = sum_{j<k} C(k-1, j) D^{j+1}h D^{k-1-j} g.
    Works elementwise on numpy arrays.
    """
    out = [g]
    for k in range(1, len(dh) + 1):
        acc = 0
        for j in range(k):
            acc = acc + comb(k - 1, j) * dh[j] * out[k - 1 - j]
        out.append(acc)
    return out
