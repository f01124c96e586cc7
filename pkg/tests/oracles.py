"""Slow, independent reference implementations used only by the tests."""
import math
from collections import deque

import numpy as np


def distance_matrix(x):
    n = len(x)
    M = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            M[i, j] = math.sqrt(sum((x[i][k] - x[j][k]) ** 2 for k in range(3)))
    return M


def radius_of_gyration(x):
    n = len(x)
    total = 0.0
    for i in range(n):
        for j in range(n):
            total += sum((x[i][k] - x[j][k]) ** 2 for k in range(3))
    return math.sqrt(total / n**2)


def flood_fill_components(M, tol):
    n = len(M)
    seen = set()
    count = 0
    for i in range(n):
        for j in range(i + 1, n):
            if M[i][j] <= tol or (i, j) in seen:
                continue
            count += 1
            queue = deque([(i, j)])
            seen.add((i, j))
            while queue:
                a, b = queue.popleft()
                for da, db in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                    p, q = a + da, b + db
                    if 0 <= p < n and 0 <= q < n and p < q and M[p][q] > tol and (p, q) not in seen:
                        seen.add((p, q))
                        queue.append((p, q))
    return count


_GL = {m: np.polynomial.legendre.leggauss(m) for m in (8, 16, 32)}


def _segment_pair_gauss(a0, a1, b0, b1, order, pieces):
    """Gauss double integral (1/4pi) over two straight segments by tensor quadrature."""
    nodes, weights = _GL[order]
    u = np.concatenate([(nodes + 1 + 2 * p) / (2 * pieces) for p in range(pieces)])
    w = np.concatenate([weights / (2 * pieces) for _ in range(pieces)])
    ta, tb = a1 - a0, b1 - b0
    pa = a0 + u[:, None] * ta
    pb = b0 + u[:, None] * tb
    r = pa[:, None, :] - pb[None, :, :]
    dist3 = np.linalg.norm(r, axis=2) ** 3
    triple = np.einsum("k,ijk->ij", np.cross(ta, tb), r)
    return float(np.einsum("i,j,ij->", w, w, triple / dist3)) / (4 * math.pi)


def gauss_writhe(x):
    """Writhe as the numerically integrated Gauss double integral over all segment pairs."""
    x = np.asarray(x, dtype=np.float64)
    n = len(x)
    total = 0.0
    for i in range(n):
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue
            sep = min(j - i, n - (j - i))
            pieces = 16 if sep <= 2 else (6 if sep <= 5 else 1)
            order = 32 if sep <= 5 else 16
            total += _segment_pair_gauss(x[i], x[(i + 1) % n], x[j], x[(j + 1) % n], order, pieces)
    # (i, j) and (j, i) contribute equally to the ordered double integral
    return 2.0 * total


def v2_contraction_naive(W):
    W = np.asarray(W)
    n = len(W)
    total = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            for k in range(j + 1, n):
                wik = W[i, k]
                for l in range(k + 1, n):
                    total += wik * W[j, l]
    return total / (4 * math.pi) ** 2


def alexander_oracle(pd, t):
    """|det| of the reduced Alexander matrix built straight from a PD code.

    Crossing (i, j, k, l): under-strand enters on i and leaves on k, the
    over-strand is j/l. Arcs are unions of edges glued at over-passes.
    """
    edges = sorted({e for x in pd for e in x})
    parent = {e: e for e in edges}

    def find(e):
        while parent[e] != e:
            parent[e] = parent[parent[e]]
            e = parent[e]
        return e

    for i, j, k, l in pd:
        parent[find(j)] = find(l)
    arcs = sorted({find(e) for e in edges})
    index = {a: n for n, a in enumerate(arcs)}
    A = np.zeros((len(pd), len(arcs)))
    nxt = {e: edges[(m + 1) % len(edges)] for m, e in enumerate(edges)}
    for row, (i, j, k, l) in enumerate(pd):
        positive = nxt[l] == j
        A[row, index[find(j)]] += 1 - t
        if positive:
            A[row, index[find(i)]] += t
            A[row, index[find(k)]] -= 1
        else:
            A[row, index[find(i)]] -= 1
            A[row, index[find(k)]] += t
    return abs(float(np.linalg.det(A[:-1, :-1])))


def brute_self_avoiding(v):
    v = [tuple(p) for p in np.asarray(v).tolist()]
    for a in range(len(v)):
        for b in range(a + 1, len(v)):
            if v[a] == v[b]:
                return False
    return True
