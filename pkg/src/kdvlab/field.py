"""Soliton fields on grids: the potential, its mode functions, and the KdV residual.

Two independent closed forms of the same field are kept side by side:

    V = -2 d_x^2 log det(1 + C)            (determinant route)
    V = -4 sum_j kappa_j psi_j^2           (mode-sum route)

with Psi = (1+C)^{-1} Psi0, Psi0_j = c_j e^{4 kappa_j^3 t - kappa_j x}.  Their
agreement at every point is one of the package's standing cross-checks, so the
two routes deliberately share nothing past the matrix factorization.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .engine import CauchyJets
from .params import SolitonParams, tail_trace_bound

__all__ = [
    "Grid", "FieldSample", "EigenfunctionSet", "potential_det", "potential_sq",
    "eigenfunctions", "kdv_residual", "sample_field", "write_field_csv",
]

CHUNK_ELEMS = 2_000_000  # batch nodes so each (nodes, N, N) tensor stays small


def _chunk(n_modes: int) -> int:
    return max(256, CHUNK_ELEMS // max(1, n_modes * n_modes))


@dataclass(frozen=True)
class Grid:
    """Rectangular (t,x) sampling lattice."""
    t_values: tuple[float, ...]
    x_min: float
    x_max: float
    nx: int

    def __post_init__(self):
        if self.nx < 2:
            raise ValueError("nx must be >= 2")
        if not self.x_min < self.x_max:
            raise ValueError("x_min must be < x_max")
        if len(self.t_values) == 0:
            raise ValueError("need at least one t value")

    @property
    def x_values(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.nx)


@dataclass
class FieldSample:
    """Field values (and optional derivatives) on a rectangular grid.

    `derivs` maps (m, n) to d_t^m d_x^n V arrays of shape (nt, nx).
    `eps_tail` is the truncation certificate: the tail trace bound past the
    used modes, maximized over the grid corners.
    """
    t_values: np.ndarray
    x_values: np.ndarray
    V: np.ndarray
    N_used: int
    eps_tail: float
    derivs: dict[tuple[int, int], np.ndarray] = field(default_factory=dict)
    residual: np.ndarray | None = None

    def row(self, ti: int) -> np.ndarray:
        return self.V[ti]

    def validate(self) -> list[str]:
        problems = []
        if not np.all(np.isfinite(self.V)):
            problems.append("non-finite field values")
        for k, d in self.derivs.items():
            if not np.all(np.isfinite(d)):
                problems.append(f"non-finite derivative {k}")
        tailcols = np.max(np.abs(self.V[:, -3:]), axis=0)
        slack = 1e-9 * (1.0 + np.max(np.abs(self.V)))
        if np.any(np.diff(tailcols) > slack):
            problems.append("right-edge columns of |V| fail monotone decay")
        return problems


@dataclass
class EigenfunctionSet:
    """Mode functions psi_j and their exact x-derivatives at the sampled points."""
    kappas: np.ndarray
    psi: np.ndarray          # (..., N)
    dpsi_dx: np.ndarray      # (..., N)
    d2psi_dx2: np.ndarray | None = None


def potential_det(params: SolitonParams, N: int, t, x) -> np.ndarray | float:
    """V = -2 d_x^2 log det(1 + C); scalar in, scalar out."""
    J = CauchyJets(params, N, t, x, 0, 2)
    out = -2.0 * J.logdet(0, 2)
    return float(out) if out.shape == () else out


def potential_sq(params: SolitonParams, N: int, t, x) -> np.ndarray | float:
    """V = -4 sum_j kappa_j psi_j^2 from the solved mode vector."""
    J = CauchyJets(params, N, t, x, 0, 0)
    psi = J.psi_jets(0, 0)[(0, 0)]
    out = -4.0 * np.sum(params.kap(N) * psi * psi, axis=-1)
    return float(out) if out.shape == () else out


def eigenfunctions(params: SolitonParams, N: int, t, x,
                   second_derivative: bool = False) -> EigenfunctionSet:
    """Mode functions from the resolvent solve, with analytic x-derivatives."""
    nx = 2 if second_derivative else 1
    J = CauchyJets(params, N, t, x, 0, nx)
    pj = J.psi_jets(0, nx)
    return EigenfunctionSet(
        kappas=params.kap(N),
        psi=pj[(0, 0)],
        dpsi_dx=pj[(0, 1)],
        d2psi_dx2=pj[(0, 2)] if second_derivative else None,
    )


def kdv_residual(params: SolitonParams, N: int, t, x) -> np.ndarray | float:
    """V_t - 6 V V_x + V_xxx with every derivative taken from the analytic jet.

    Identically zero for each finite N; what is returned is pure factorization
    round-off.
    """
    J = CauchyJets(params, N, t, x, 1, 5)
    V = J.potential(0, 0)
    Vt = J.potential(1, 0)
    Vx = J.potential(0, 1)
    Vxxx = J.potential(0, 3)
    out = Vt - 6.0 * V * Vx + Vxxx
    return float(out) if out.shape == () else out


def sample_field(params: SolitonParams, N: int, grid: Grid,
                 orders: tuple[tuple[int, int], ...] = (),
                 with_residual: bool = False) -> FieldSample:
    """Evaluate V (plus requested derivative orders) on the grid.

    Nodes are processed in independent batches; each node recomputes its own
    factorization, so the map parallelizes trivially.
    """
    xs = grid.x_values
    ts = np.asarray(grid.t_values, dtype=float)
    mt = max([m for m, _ in orders], default=0)
    nx = max([n for _, n in orders], default=0)
    if with_residual:
        mt = max(mt, 1)
        nx = max(nx, 3)
    nt = len(ts)
    V = np.empty((nt, len(xs)))
    derivs = {o: np.empty((nt, len(xs))) for o in orders}
    resid = np.empty((nt, len(xs))) if with_residual else None
    step = _chunk(N)
    for ti, t in enumerate(ts):
        for i in range(0, len(xs), step):
            xi = xs[i:i + step]
            J = CauchyJets(params, N, t, xi, mt, nx + 2)
            sl = slice(i, i + len(xi))
            V[ti, sl] = J.potential(0, 0)
            for (m, n) in orders:
                derivs[(m, n)][ti, sl] = J.potential(m, n)
            if with_residual:
                resid[ti, sl] = (J.potential(1, 0) - 6.0 * J.potential(0, 0) * J.potential(0, 1)
                                 + J.potential(0, 3))
    corners = [(t, x) for t in (ts.min(), ts.max()) for x in (grid.x_min, grid.x_max)]
    eps_tail = max(tail_trace_bound(params, N + 1, t, x) for t, x in corners)
    return FieldSample(t_values=ts, x_values=xs, V=V, N_used=N,
                       eps_tail=eps_tail, derivs=derivs, residual=resid)


_CSV_ORDER_NAMES = {(1, 0): "Vt", (0, 1): "Vx", (0, 3): "Vxxx"}


def write_field_csv(sample: FieldSample, path) -> None:
    """Rows in lexicographic (t, x) order; floats as shortest round-trip reprs."""
    cols = ["t", "x", "V"]
    present = [o for o in ((1, 0), (0, 1), (0, 3)) if o in sample.derivs]
    cols += [_CSV_ORDER_NAMES[o] for o in present]
    if sample.residual is not None:
        cols.append("kdv_residual")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for ti in np.argsort(sample.t_values, kind="stable"):
            for xi in range(len(sample.x_values)):
                row = [repr(float(sample.t_values[ti])), repr(float(sample.x_values[xi])),
                       repr(float(sample.V[ti, xi]))]
                row += [repr(float(sample.derivs[o][ti, xi])) for o in present]
                if sample.residual is not None:
                    row.append(repr(float(sample.residual[ti, xi])))
                w.writerow(row)
