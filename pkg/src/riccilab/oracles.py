"""Independent reference computations for test certification.

Nothing here shares stencil code with the main operator stack: spectral
solutions are evaluated from closed-form mode decay, the cigar background from
its closed-form conformal factor and curvature, and integrals from plain
Riemann/trapezoid accumulation with compensated summation at refined
resolution plus Richardson extrapolation.  Every oracle reports a strictly
positive error bound; comparisons must use value +/- bound, never bare
equality.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainTooSmallError, OracleInapplicableError, UnreliableOracleError
from .geometry import Grid2D, MetricField, OneFormField, conformal_metric


@dataclass
class OracleResult:
    label: str
    value: object
    method: str
    error_bound: float

    def __post_init__(self):
        if not self.error_bound > 0:
            raise ValueError("oracle error bound must be strictly positive")


@dataclass(frozen=True)
class TrigMode:
    """One Fourier mode of initial data: amplitude * trig(kx * x + kt * theta)
    attached to a scalar or to a 1-form component."""
    target: str        # "scalar" | "form_x" | "form_t"
    trig: str          # "sin" | "cos"
    kx: int
    kt: int
    amplitude: float = 1.0


def _is_flat(g: MetricField) -> bool:
    return (np.max(np.abs(g.gxx - 1)) < 1e-13 and np.max(np.abs(g.gtt - 1)) < 1e-13
            and np.max(np.abs(g.gxt)) < 1e-13)


def flat_spectral_oracle(modes, t: float, grid: Grid2D,
                         g: MetricField | None = None) -> OracleResult:
    """Exact heat-flow solution on the static flat torus: each mode decays by
    exp(-|k|^2 t).  Value is a OneFormField when any mode targets a form
    component, otherwise a plain scalar array."""
    if g is not None and not _is_flat(g):
        raise OracleInapplicableError("spectral oracle needs a flat metric")
    X, T = grid.mesh()
    kx_base = 2 * math.pi / grid.lx
    kt_base = 2 * math.pi / grid.ly
    is_form = any(m.target != "scalar" for m in modes)
    acc = {"scalar": np.zeros_like(X), "form_x": np.zeros_like(X),
           "form_t": np.zeros_like(X)}
    amp_scale = 0.0
    for m in modes:
        kx, kt = m.kx * kx_base, m.kt * kt_base
        phase = kx * X + kt * T
        wave = np.sin(phase) if m.trig == "sin" else np.cos(phase)
        decay = math.exp(-(kx ** 2 + kt ** 2) * t)
        acc[m.target] += m.amplitude * decay * wave
        amp_scale = max(amp_scale, abs(m.amplitude))
    bound = max(1e-14 * amp_scale * len(modes), 1e-300)
    value = OneFormField(acc["form_x"], acc["form_t"]) if is_form else acc["scalar"]
    return OracleResult("flat-spectral", value, "modewise exact decay", bound)


@dataclass
class CigarReference:
    metric: MetricField
    scalar_curvature: np.ndarray
    sup_R: float


def cigar_oracle(grid: Grid2D) -> OracleResult:
    """Closed-form steady-soliton background: conformal factor 1/(1+r^2),
    scalar curvature 4/(1+r^2), peak curvature exactly 4 at the origin.

    The grid must be truncated on both axes and wide enough to contain the
    curvature core (half-width >= 2, where R has fallen to 20% of its peak).
    """
    if grid.topology_x != "truncated" or grid.topology_y != "truncated":
        raise OracleInapplicableError("cigar background lives on a truncated plane")
    half = 0.5 * min(grid.lx, grid.ly)
    if half < 2.0:
        raise DomainTooSmallError(
            f"cigar grid half-width {half:g} does not contain the curvature core")
    X, T = grid.mesh()
    r2 = X ** 2 + T ** 2
    u = -0.5 * np.log1p(r2)
    metric = conformal_metric(grid, u)
    scal = 4.0 / (1.0 + r2)
    ref = CigarReference(metric, scal, 4.0)
    return OracleResult("cigar", ref, "closed-form profile", 1e-14)


def quadrature_oracle(integrand, grid: Grid2D, refine: int = 4,
                      label: str = "integral") -> OracleResult:
    """Richardson-extrapolated integral of integrand(x, theta) over the domain.

    Evaluates on grids refined by `refine` and 2*refine, accumulates with
    compensated summation, extrapolates at second order and uses the level
    difference as the error bound.  A third, coarser level guards against
    non-convergent refinement.
    """
    if refine < 2:
        raise ValueError("refinement factor must be >= 2")

    def level(factor):
        # the oracle builds its own trapezoid weights so it shares no
        # quadrature or stencil machinery with the operator stack
        gr = grid.refined(factor)
        X, T = gr.mesh()
        wx = np.full(gr.nx, gr.hx)
        wy = np.full(gr.ny, gr.hy)
        if gr.topology_x == "truncated":
            wx[0] = wx[-1] = 0.5 * gr.hx
        if gr.topology_y == "truncated":
            wy[0] = wy[-1] = 0.5 * gr.hy
        vals = np.asarray(integrand(X, T), dtype=float) * np.outer(wx, wy)
        return math.fsum(vals.ravel())

    i0 = level(max(refine // 2, 1))
    i1 = level(refine)
    i2 = level(2 * refine)
    e1 = abs(i1 - i0)
    e2 = abs(i2 - i1)
    scale = max(abs(i2), 1.0)
    if e1 > 1e-13 * scale and e2 > 0.6 * e1:
        raise UnreliableOracleError(
            f"refinement not converging for {label}: |I1-I0|={e1:g}, |I2-I1|={e2:g}")
    value = i2 + (i2 - i1) / 3.0
    bound = max(e2 / 3.0, 1e-14 * scale)
    return OracleResult(label, value, f"trapezoid refined x{2 * refine}, Richardson",
                        bound)
