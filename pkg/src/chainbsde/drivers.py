"""Drivers for chain-driven backward equations.

A driver is a map ``f(x, t, y, z)`` where ``x`` is the current state, ``y``
the current solution value and ``z`` a vector over states (only differences
``z[j] - z[x]`` ever matter; every constructor here produces drivers that are
exactly invariant under adding a constant to ``z``).

The key structural property is *balance at level gamma*: every increment in
``z`` can be written against a jump-intensity vector whose components stay
within a factor ``[gamma, 1/gamma]`` of the reference chain's rates.  Balance
is what lets hitting-time estimates transfer from the reference chain to the
controlled/tilted dynamics, and it is preserved by pointwise infima and
suprema over finite control families, which is why Hamiltonians built below
inherit it.
"""

from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray
from scipy.optimize import linprog

from .chain import RateMatrix, max_gamma
from .errors import (
    DimensionMismatchError,
    EmptyControlSetError,
    GammaNotCertifiableError,
    InputError,
    NotCertifiedError,
)

__all__ = [
    "MarkovianDriver",
    "ControlSet",
    "BalanceCertificate",
    "affine_driver",
    "zero_driver",
    "constant_driver",
    "hamiltonian_inf",
    "hamiltonian_sup",
    "hamiltonian_argmin",
    "hamiltonian_argmax",
    "reliability_driver",
    "shortest_path_driver",
    "measure_envelope_driver",
    "truncate_driver",
    "check_balanced",
    "lipschitz_bound",
    "incremental_ratio",
    "shift_invariance_defect",
]


@dataclass(frozen=True)
class MarkovianDriver:
    """A driver ``f(x, t, y, z)`` with declared growth metadata.

    Parameters
    ----------
    fn : callable
        ``fn(x, t, y, z) -> float`` with ``z`` a vector over states.
    c : float
        Lipschitz constant of ``f`` in ``y``; for monotone drivers the
        incremental ratio ``-(f(y) - f(y')) / (y - y')`` lies in ``[0, c]``.
    beta_hat : float
        Growth exponent of the free term: ``|f(x, t, 0, 0)| <= const * (1 + t^beta_hat)``.
    monotone : bool
        Declared nonincreasing dependence on ``y``.
    time_dependent : bool
        Whether ``f`` genuinely depends on ``t``; stationary solvers reject
        time-dependent drivers.
    spec : dict or None
        Declarative payload for serialization (present for file-loadable
        drivers), ignored by the numerics.
    """

    fn: Callable[[int, float, float, NDArray[np.float64]], float]
    c: float = 0.0
    beta_hat: float = 0.0
    monotone: bool = True
    time_dependent: bool = False
    spec: dict | None = field(default=None, compare=False)

    def eval(self, x: int, t: float, y: float, z: object) -> float:
        return float(self.fn(int(x), float(t), float(y), np.asarray(z, dtype=float)))

    __call__ = eval


@dataclass(frozen=True)
class ControlSet:
    """A finite family of controlled rate matrices with running costs.

    ``cost`` is either an ``(n_states, n_controls)`` table of running costs
    or a callable ``cost(t, y, x, u) -> float``.  The mutual control level
    ``gamma`` against the reference chain is computed at construction; a
    family with no admissible level is rejected, since none of the hitting
    estimates would transfer to it.
    """

    labels: tuple[str, ...]
    matrices: tuple[RateMatrix, ...]
    cost: object
    reference: RateMatrix
    c: float = 0.0
    beta_hat: float = 0.0
    cost_time_dependent: bool | None = None
    gamma: float = field(init=False, default=0.0)

    def __post_init__(self):
        if len(self.matrices) == 0:
            raise EmptyControlSetError()
        if len(self.labels) != len(self.matrices):
            raise DimensionMismatchError(
                f"{len(self.labels)} labels for {len(self.matrices)} matrices"
            )
        n = self.reference.n
        for m in self.matrices:
            if m.n != n:
                raise DimensionMismatchError(
                    f"control matrix has {m.n} states, reference has {n}"
                )
        if not callable(self.cost):
            table = np.array(self.cost, dtype=float)
            if table.shape != (n, len(self.matrices)):
                raise DimensionMismatchError(
                    f"cost table shape {table.shape}, expected ({n}, {len(self.matrices)})"
                )
            table.setflags(write=False)
            object.__setattr__(self, "cost", table)
            if self.cost_time_dependent is None:
                object.__setattr__(self, "cost_time_dependent", False)
        elif self.cost_time_dependent is None:
            object.__setattr__(self, "cost_time_dependent", True)
        g = max_gamma(self.reference, self.matrices)
        if g <= 0.0:
            raise GammaNotCertifiableError(
                "no gamma in (0, 1] relates every control matrix to the reference; "
                "control matrices must keep the reference's jump structure"
            )
        object.__setattr__(self, "gamma", float(g))

    @property
    def size(self) -> int:
        return len(self.matrices)

    def cost_value(self, t: float, y: float, x: int, u: int) -> float:
        if callable(self.cost):
            return float(self.cost(t, y, x, u))
        return float(self.cost[x, u])


@dataclass(frozen=True)
class BalanceCertificate:
    """Result of sampling-based balance certification.

    A pass is evidence (witnesses found at every sample), a fail is
    conclusive (a sample where no admissible witness exists).  Each stored
    witness ``lam`` sums to zero and keeps componentwise ratios against the
    reference column inside ``[gamma, 1/gamma]`` up to 1e-9 slack.
    """

    gamma: float
    passed: bool
    samples: int
    witnesses: tuple = ()
    failures: tuple = ()


def affine_driver(
    a: RateMatrix,
    b: RateMatrix | object | None = None,
    g: object | None = None,
    r: object | None = None,
) -> MarkovianDriver:
    """Driver ``f(x, t, y, z) = z @ (B - A) e_x + g[x] - r[x] * y``.

    ``b`` defaults to the reference itself (no intensity tilt), ``g`` to
    zeros (no running reward), ``r`` to zeros (no discounting).  ``r`` must
    be nonnegative so the driver is monotone in ``y``.
    """
    n = a.n
    bq = _as_matrix(b, a)
    gv = _as_vector(g, n, "g")
    rv = _as_vector(r, n, "r")
    if (rv < 0).any():
        raise InputError("discount rates r must be nonnegative")
    diff = bq - a.q

    def fn(x: int, t: float, y: float, z: NDArray[np.float64]) -> float:
        return float(z @ diff[:, x] + gv[x] - rv[x] * y)

    return MarkovianDriver(
        fn,
        c=float(rv.max()) if n else 0.0,
        beta_hat=0.0,
        monotone=True,
        time_dependent=False,
        spec={
            "type": "affine",
            "b": bq.tolist(),
            "g": gv.tolist(),
            "r": rv.tolist(),
        },
    )


def zero_driver(a: RateMatrix) -> MarkovianDriver:
    """The identically-zero driver (harmonic extension / hitting laws)."""
    return affine_driver(a)


def constant_driver(a: RateMatrix, value: float) -> MarkovianDriver:
    """Driver ``f = value`` everywhere (e.g. +1 accumulates elapsed time)."""
    return affine_driver(a, g=np.full(a.n, float(value)))


def hamiltonian_inf(cs: ControlSet, a: RateMatrix | None = None) -> MarkovianDriver:
    """Lower Hamiltonian ``min_u { cost(t,y,x,u) + z @ (A^u - A) e_x }``.

    The minimum over a finite family of drivers that are balanced at the
    family's gamma is again balanced at that gamma, so the Hamiltonian
    inherits the certification level of the control set.  Ties resolve to
    the lowest control index.
    """
    return _hamiltonian(cs, a, sign=+1)


def hamiltonian_sup(cs: ControlSet, a: RateMatrix | None = None) -> MarkovianDriver:
    """Upper Hamiltonian ``max_u { cost(t,y,x,u) + z @ (A^u - A) e_x }``.

    Equal to the negation of the lower Hamiltonian applied to negated costs
    and negated ``z``.  Ties resolve to the lowest control index.
    """
    return _hamiltonian(cs, a, sign=-1)


def _hamiltonian(cs: ControlSet, a: RateMatrix | None, sign: int) -> MarkovianDriver:
    ref = cs.reference if a is None else a
    if ref.n != cs.reference.n:
        raise DimensionMismatchError("reference dimension differs from control set")
    diffs = np.stack([m.q - ref.q for m in cs.matrices])  # (m, n, n)
    m = cs.size

    def fn(x: int, t: float, y: float, z: NDArray[np.float64]) -> float:
        vals = np.array(
            [cs.cost_value(t, y, x, u) + z @ diffs[u, :, x] for u in range(m)]
        )
        return float(vals.min() if sign > 0 else vals.max())

    return MarkovianDriver(
        fn,
        c=float(cs.c),
        beta_hat=float(cs.beta_hat),
        monotone=True,
        time_dependent=bool(cs.cost_time_dependent),
        spec={"type": "hamiltonian_inf" if sign > 0 else "hamiltonian_sup"},
    )


def hamiltonian_argmin(
    cs: ControlSet, a: RateMatrix, x: int, t: float, y: float, z: object
) -> int:
    """Index of the control attaining the lower Hamiltonian (lowest index on ties)."""
    zv = np.asarray(z, dtype=float)
    vals = np.array(
        [
            cs.cost_value(t, y, x, u) + zv @ (cs.matrices[u].q[:, x] - a.q[:, x])
            for u in range(cs.size)
        ]
    )
    return int(np.argmin(vals))


def hamiltonian_argmax(
    cs: ControlSet, a: RateMatrix, x: int, t: float, y: float, z: object
) -> int:
    """Index of the control attaining the upper Hamiltonian (lowest index on ties)."""
    zv = np.asarray(z, dtype=float)
    vals = np.array(
        [
            cs.cost_value(t, y, x, u) + zv @ (cs.matrices[u].q[:, x] - a.q[:, x])
            for u in range(cs.size)
        ]
    )
    return int(np.argmax(vals))


def reliability_driver(
    a: RateMatrix,
    loss_rates: object,
    control_matrices: Sequence[RateMatrix] | None = None,
) -> MarkovianDriver:
    """Driver ``-loss[x] * y`` plus, when controlled, ``max_u z @ (A^u - A) e_x``.

    The solution of the associated stationary system is the expected
    discounted indicator of reaching the delivery node, i.e. the survival
    probability of a signal that dies at rate ``loss[x]`` in state ``x``.
    """
    rv = _as_vector(loss_rates, a.n, "loss_rates")
    if (rv < 0).any():
        raise InputError("loss rates must be nonnegative")
    if control_matrices:
        diffs = np.stack([m.q - a.q for m in control_matrices])

        def fn(x: int, t: float, y: float, z: NDArray[np.float64]) -> float:
            return float(-rv[x] * y + max(z @ diffs[u, :, x] for u in range(len(diffs))))

    else:

        def fn(x: int, t: float, y: float, z: NDArray[np.float64]) -> float:
            return float(-rv[x] * y)

    return MarkovianDriver(
        fn,
        c=float(rv.max()),
        beta_hat=0.0,
        monotone=True,
        time_dependent=False,
        spec={
            "type": "reliability",
            "loss_rates": rv.tolist(),
            "controlled": bool(control_matrices),
        },
    )


def shortest_path_driver(
    a: RateMatrix, control_matrices: Sequence[RateMatrix] | None = None
) -> MarkovianDriver:
    """Driver ``min_u z @ (A^u - A) e_x + 1`` for remaining travel time.

    With the singleton family this is the constant driver 1; the +1
    accumulates elapsed time so the stationary solution is the (optimal)
    expected remaining time to the destination.
    """
    mats = list(control_matrices) if control_matrices else [a]
    diffs = np.stack([m.q - a.q for m in mats])

    def fn(x: int, t: float, y: float, z: NDArray[np.float64]) -> float:
        return float(min(z @ diffs[u, :, x] for u in range(len(diffs))) + 1.0)

    return MarkovianDriver(
        fn,
        c=0.0,
        beta_hat=0.0,
        monotone=True,
        time_dependent=False,
        spec={"type": "shortest_path"},
    )


def measure_envelope_driver(a: RateMatrix, gamma: float) -> MarkovianDriver:
    """Upper envelope ``sup { z @ (B - A) e_x }`` over the gamma ratio family.

    The supremum ranges over matrices whose off-diagonal columns stay within
    a factor ``[gamma, 1/gamma]`` of the reference, the Markov members of
    the gamma measure family.  Closed form:
    ``sum_{j != x} q[j, x] * ((1/gamma - 1) (z_j - z_x)^+ + (1 - gamma) (z_x - z_j)^+)``.
    """
    if not 0.0 < gamma <= 1.0:
        raise InputError(f"gamma must lie in (0, 1], got {gamma!r}")
    up = 1.0 / gamma - 1.0
    down = 1.0 - gamma

    def fn(x: int, t: float, y: float, z: NDArray[np.float64]) -> float:
        col = np.maximum(a.q[:, x], 0.0)
        d = z - z[x]
        d[x] = 0.0
        return float(np.dot(col, up * np.maximum(d, 0.0) + down * np.maximum(-d, 0.0)))

    return MarkovianDriver(
        fn,
        c=0.0,
        beta_hat=0.0,
        monotone=True,
        time_dependent=False,
        spec={"type": "measure_envelope", "gamma": gamma},
    )


def truncate_driver(d: MarkovianDriver, bound: float) -> MarkovianDriver:
    """Clamp ``y`` and the recentered ``z`` into ``[-bound, bound]``.

    The truncated driver evaluates ``d`` at ``clip(y)`` and at
    ``clip(z - z[x])``; recentering first makes the clamp respect the
    constant-shift invariance, so the truncation agrees with ``d`` exactly
    whenever ``|y|`` and the recentered components are within the bound, and
    converges pointwise to ``d`` as the bound grows.
    """
    if not bound > 0.0:
        raise InputError(f"truncation bound must be positive, got {bound!r}")
    b = float(bound)

    def fn(x: int, t: float, y: float, z: NDArray[np.float64]) -> float:
        yc = min(max(y, -b), b)
        zc = np.clip(z - z[x], -b, b)
        return d.fn(x, t, yc, zc)

    return MarkovianDriver(
        fn,
        c=d.c,
        beta_hat=d.beta_hat,
        monotone=d.monotone,
        time_dependent=d.time_dependent,
        spec={"type": "truncated", "bound": b, "inner": d.spec},
    )


def check_balanced(
    d: MarkovianDriver,
    a: RateMatrix,
    gamma: float,
    samples: int = 200,
    seed: int = 0,
    scale: float = 1.0,
) -> BalanceCertificate:
    """Sampling-based certification that ``d`` is balanced at level ``gamma``.

    For each sampled ``(x, t, y, z, z')`` the increment
    ``f(z) - f(z')`` must be representable as ``(z - z') @ (lam - A e_x)``
    with ``lam`` supported on the coordinates reachable from ``x``, summing
    to zero, and with componentwise ratios ``lam_j / (A e_x)_j`` inside
    ``[gamma, 1/gamma]`` (0/0 counts as 1).  The witness is recovered by
    projecting the reference column onto the two-constraint affine set; if
    the projection violates the ratio bounds an exact linear-programming
    feasibility check decides the sample.  A pass is evidence of balance; a
    fail carries a concrete counterexample and is conclusive.
    """
    if not 0.0 < gamma <= 1.0:
        raise InputError(f"gamma must lie in (0, 1], got {gamma!r}")
    rng = np.random.default_rng(seed)
    n = a.n
    slack = 1e-9
    witnesses: list[tuple] = []
    failures: list[tuple] = []
    for _ in range(int(samples)):
        x = int(rng.integers(n))
        t = float(rng.exponential(1.0))
        y = float(rng.normal(0.0, scale))
        z = rng.normal(0.0, scale, size=n)
        zp = rng.normal(0.0, scale, size=n)
        ok, lam, reason = _find_witness(d, a, gamma, x, t, y, z, zp, slack)
        if ok:
            if len(witnesses) < 10:
                witnesses.append((x, t, z.copy(), zp.copy(), lam))
        else:
            failures.append((x, t, z.copy(), zp.copy(), reason))
    return BalanceCertificate(
        gamma=float(gamma),
        passed=not failures,
        samples=int(samples),
        witnesses=tuple(witnesses),
        failures=tuple(failures),
    )


def _find_witness(d, a, gamma, x, t, y, z, zp, slack):
    col = a.q[:, x]
    reach = np.flatnonzero(col > 0.0)
    idx = np.concatenate([reach, [x]]).astype(int)
    delta = z - zp
    df = d.eval(x, t, y, z) - d.eval(x, t, y, zp)
    # increment identity: delta @ lam = df + delta @ col, zero total mass
    rhs = np.array([df + float(delta @ col), 0.0])
    C = np.vstack([delta[idx], np.ones(len(idx))])
    qJ = col[idx]

    M = C @ C.T
    try:
        mu = np.linalg.solve(M, rhs - C @ qJ)
    except np.linalg.LinAlgError:
        mu, *_ = np.linalg.lstsq(M, rhs - C @ qJ, rcond=None)
    lamJ = qJ + C.T @ mu
    resid = float(np.abs(C @ lamJ - rhs).max())
    if resid < slack and _ratios_ok(lamJ, qJ, gamma, slack):
        return True, _scatter(lamJ, idx, a.n), ""

    # exact feasibility over the admissible box (widened by the slack)
    lo = np.empty(len(idx))
    hi = np.empty(len(idx))
    for k, j in enumerate(idx):
        if j == x:
            lo[k] = qJ[k] / gamma - slack
            hi[k] = gamma * qJ[k] + slack
        else:
            lo[k] = gamma * qJ[k] - slack
            hi[k] = qJ[k] / gamma + slack
    res = linprog(
        np.zeros(len(idx)),
        A_eq=C,
        b_eq=rhs,
        bounds=list(zip(lo, hi)),
        method="highs",
    )
    if res.success:
        return True, _scatter(res.x, idx, a.n), ""
    return False, None, (
        f"no admissible witness: increment {df!r} at state {x} cannot be matched "
        f"with intensity ratios in [{gamma}, {1.0 / gamma}]"
    )


def _ratios_ok(lamJ, qJ, gamma, slack):
    for lv, qv in zip(lamJ, qJ):
        if qv == 0.0:
            if abs(lv) > slack:
                return False
            continue
        r = lv / qv
        if not (gamma - slack <= r <= 1.0 / gamma + slack):
            return False
    return True


def _scatter(lamJ, idx, n):
    lam = np.zeros(n)
    lam[idx] = lamJ
    return lam


def lipschitz_bound(
    d: MarkovianDriver,
    a: RateMatrix,
    gamma: float,
    certificate: BalanceCertificate | None = None,
) -> float:
    """Lipschitz constant of a balanced driver against the jump seminorm.

    Returns ``sqrt(max_i |q[i, i]|) * sqrt(1/gamma)``: balance lets every
    increment be written against scaled intensities, the scaling factor is
    controlled by ``1/gamma``, and the seminorm absorbs the remaining state
    dependence through the worst total jump rate.  Requires a passing
    certificate at a level at least ``gamma`` (balance at a higher level
    implies balance at any lower one).
    """
    if certificate is None or not certificate.passed:
        raise NotCertifiedError(
            "driver carries no passing balance certificate; run check_balanced first"
        )
    if certificate.gamma < gamma - 1e-12:
        raise NotCertifiedError(
            f"certificate level {certificate.gamma!r} is below requested {gamma!r}"
        )
    if not 0.0 < gamma <= 1.0:
        raise InputError(f"gamma must lie in (0, 1], got {gamma!r}")
    return float(np.sqrt(a.max_rate / gamma))


def incremental_ratio(
    d: MarkovianDriver, x: int, t: float, y1: float, y2: float, z: object
) -> float:
    """``-(f(y1) - f(y2)) / (y1 - y2)``; lies in ``[0, c]`` for monotone drivers."""
    if y1 == y2:
        raise InputError("incremental ratio needs two distinct y values")
    zv = np.asarray(z, dtype=float)
    return float(-(d.eval(x, t, y1, zv) - d.eval(x, t, y2, zv)) / (y1 - y2))


def shift_invariance_defect(
    d: MarkovianDriver, n: int, samples: int = 100, seed: int = 0, scale: float = 1.0
) -> float:
    """Largest observed ``|f(x,t,y,z + alpha) - f(x,t,y,z)|`` over random samples."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(int(samples)):
        x = int(rng.integers(n))
        t = float(rng.exponential(1.0))
        y = float(rng.normal(0.0, scale))
        z = rng.normal(0.0, scale, size=n)
        alpha = float(rng.normal(0.0, 10.0 * scale))
        worst = max(worst, abs(d.eval(x, t, y, z + alpha) - d.eval(x, t, y, z)))
    return worst


def _as_matrix(b, a: RateMatrix) -> NDArray[np.float64]:
    if b is None:
        return a.q
    if isinstance(b, RateMatrix):
        if b.n != a.n:
            raise DimensionMismatchError(f"matrix has {b.n} states, expected {a.n}")
        return b.q
    arr = np.asarray(b, dtype=float)
    if arr.shape != (a.n, a.n):
        raise DimensionMismatchError(f"matrix shape {arr.shape}, expected ({a.n}, {a.n})")
    return arr


def _as_vector(v, n: int, name: str) -> NDArray[np.float64]:
    if v is None:
        return np.zeros(n)
    arr = np.asarray(v, dtype=float)
    if arr.shape != (n,):
        raise DimensionMismatchError(f"{name} has shape {arr.shape}, expected ({n},)")
    if not np.isfinite(arr).all():
        raise InputError(f"{name} contains non-finite entries")
    return arr
