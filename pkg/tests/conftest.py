"""Shared generators and independent oracles.

The oracles here deliberately avoid the package's solver paths: values are
produced with plain dense linear algebra (numpy solves, scipy expm) or
exhaustive enumeration, so that agreement with the solvers is evidence and
not circularity.
"""

import itertools

import numpy as np
import scipy.linalg

from chainbsde import RateMatrix, validate_rate_matrix


def spine_chain(rng, n, rate_lo=0.3, rate_hi=2.5, extra=0.35) -> RateMatrix:
    """Random chain on n states where every state reaches state 0.

    A spine i -> i-1 guarantees reachability of the target {0}; extra
    random edges (density ``extra``) make the topology non-trivial.
    """
    q = np.zeros((n, n))
    for i in range(1, n):
        q[i - 1, i] = rng.uniform(rate_lo, rate_hi)
    for i in range(1, n):
        for j in range(n):
            if j != i and q[j, i] == 0.0 and rng.random() < extra:
                q[j, i] = rng.uniform(rate_lo, rate_hi)
    q[np.diag_indices(n)] = -q.sum(axis=0)
    return validate_rate_matrix(q)


def recurrent_chain(rng, n, rate_lo=0.3, rate_hi=2.0) -> RateMatrix:
    """Fully-supported chain: positive rate on every off-diagonal entry.

    No absorbing states, so gamma certificates are bounded away from zero.
    """
    q = rng.uniform(rate_lo, rate_hi, size=(n, n))
    q[np.diag_indices(n)] = 0.0
    q[np.diag_indices(n)] = -q.sum(axis=0)
    return validate_rate_matrix(q)


def scaled_member(rng, a: RateMatrix, lo=0.5, hi=2.0) -> RateMatrix:
    """Member of a's ratio family: each intensity scaled within [lo, hi]."""
    q = a.q.copy()
    n = a.n
    factors = rng.uniform(lo, hi, size=(n, n))
    off = ~np.eye(n, dtype=bool)
    q[off] *= factors[off]
    q[np.diag_indices(n)] = 0.0
    q[np.diag_indices(n)] = -q.sum(axis=0)
    return validate_rate_matrix(q)


def affine_parts(rng, a: RateMatrix, discounted=True):
    """Random coefficients (b, g, r) for an affine driver on chain ``a``."""
    b = scaled_member(rng, a)
    g = rng.normal(0.0, 1.0, size=a.n)
    if discounted:
        r = rng.uniform(0.05, 1.0, size=a.n)
    else:
        r = np.zeros(a.n)
    return b, g, r


def linear_field_oracle(qb, target, phi, g, r):
    """Direct solve of the stationary affine field equation.

    On free states the field satisfies g - r*u + B^T u = 0 with u pinned to
    phi on the target; nothing here touches the package solvers.
    """
    qb = np.asarray(qb, dtype=float)
    n = qb.shape[0]
    tgt = sorted(int(i) for i in target)
    free = [i for i in range(n) if i not in set(tgt)]
    phi = np.asarray(phi, dtype=float)
    g = np.asarray(g, dtype=float)
    r = np.asarray(r, dtype=float)
    u = np.zeros(n)
    u[tgt] = phi[tgt]
    if free:
        bt = qb.T
        m = bt[np.ix_(free, free)] - np.diag(r[free])
        rhs = -g[free] - bt[np.ix_(free, tgt)] @ phi[tgt]
        u[free] = np.linalg.solve(m, rhs)
    return u


def expm_grid_oracle(qb, target, phi, g, r, terminal, tau):
    """Finite-horizon affine field at time-to-go tau, via one matrix exponential.

    The free block evolves as dw/ds = M w + c with M = B^T_ff - diag(r_f)
    and c = g_f + B^T_ft phi_t; the affine ODE is integrated exactly with
    the augmented-matrix exponential.  ``terminal`` is the full data vector
    at time-to-go zero.
    """
    qb = np.asarray(qb, dtype=float)
    n = qb.shape[0]
    tgt = sorted(int(i) for i in target)
    free = [i for i in range(n) if i not in set(tgt)]
    phi = np.asarray(phi, dtype=float)
    w = np.asarray(terminal, dtype=float).copy()
    w[tgt] = phi[tgt]
    if not free:
        return w
    bt = qb.T
    m = bt[np.ix_(free, free)] - np.diag(np.asarray(r, dtype=float)[free])
    c = np.asarray(g, dtype=float)[free] + bt[np.ix_(free, tgt)] @ phi[tgt]
    k = len(free)
    aug = np.zeros((k + 1, k + 1))
    aug[:k, :k] = m
    aug[:k, k] = c
    vec = np.concatenate([w[free], [1.0]])
    out = scipy.linalg.expm(aug * float(tau)) @ vec
    w[free] = out[:k]
    return w


def policy_value_oracle(matrices, cost_table, policy, target, phi):
    """Expected cost-to-target of one stationary policy, by direct solve."""
    n = matrices[0].shape[0]
    tgt = sorted(int(i) for i in target)
    free = [i for i in range(n) if i not in set(tgt)]
    q = np.empty((n, n))
    for x in range(n):
        q[:, x] = np.asarray(matrices[policy[x]], dtype=float)[:, x]
    phi = np.asarray(phi, dtype=float)
    u = np.zeros(n)
    u[tgt] = phi[tgt]
    if free:
        qt = q.T
        rhs = -np.array([cost_table[x][policy[x]] for x in free])
        rhs -= qt[np.ix_(free, tgt)] @ phi[tgt]
        u[free] = np.linalg.solve(qt[np.ix_(free, free)], rhs)
    return u


def enumerate_policy_values(matrices, cost_table, target, phi):
    """Values of every stationary policy (controls fixed per free state).

    Target-state choices are irrelevant, so they are pinned to control 0.
    """
    n = matrices[0].shape[0]
    n_controls = len(matrices)
    tgt = set(int(i) for i in target)
    free = [i for i in range(n) if i not in tgt]
    values = []
    for assignment in itertools.product(range(n_controls), repeat=len(free)):
        policy = [0] * n
        for x, u in zip(free, assignment):
            policy[x] = u
        values.append((tuple(policy), policy_value_oracle(matrices, cost_table, policy, target, phi)))
    return values


def resolvent_oracle(q, target, beta):
    """Exponential hitting moment by direct solve; None when not finite.

    Solves (beta I + Q^T_ff) h_f = -Q^T_ft 1 and demands a strictly
    positive, finite solution, mirroring the definition rather than the
    package implementation.
    """
    q = np.asarray(q, dtype=float)
    n = q.shape[0]
    tgt = sorted(int(i) for i in target)
    free = [i for i in range(n) if i not in set(tgt)]
    h = np.ones(n)
    if not free:
        return h
    qt = q.T
    m = qt[np.ix_(free, free)] + beta * np.eye(len(free))
    rhs = -qt[np.ix_(free, tgt)].sum(axis=1)
    try:
        with np.errstate(divide="ignore", invalid="ignore"):
            hf = np.linalg.solve(m, rhs)
    except np.linalg.LinAlgError:
        return None
    if not np.isfinite(hf).all() or (hf <= 0.0).any():
        return None
    h[free] = hf
    return h


def resistor_nodal_oracle(conductances, sources):
    """Potentials of a pure-resistor network by direct nodal analysis.

    ``conductances`` is a symmetric (n, n) array of edge conductances
    (zero off the edges); ``sources`` maps node index -> pinned volts.
    """
    gmat = np.asarray(conductances, dtype=float)
    n = gmat.shape[0]
    pinned = sorted(sources)
    free = [i for i in range(n) if i not in set(pinned)]
    v = np.zeros(n)
    for i in pinned:
        v[i] = sources[i]
    if not free:
        return v
    lap = np.diag(gmat.sum(axis=1)) - gmat
    rhs = -lap[np.ix_(free, pinned)] @ v[pinned]
    v[free] = np.linalg.solve(lap[np.ix_(free, free)], rhs)
    return v
