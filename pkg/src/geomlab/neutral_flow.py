"""Mean curvature flow of graphical discs in the oriented-line space.

The flow lives in a holomorphic chart over a hemisphere: stereographic
base coordinates (x, y) and fiber coordinates (w1, w2) in which the
ambient complex structure is literally multiplication by i (verified by
the test suite).  Consequences used here:

  * the neutral metric and its Christoffel symbols are exact (jets through
    the chart embedding), so the only discretisation is in the disc's own
    finite differences;
  * fiber-affine discs w = c0 + c1 (x + i y) are holomorphic, hence
    maximal: their discrete mean curvature vanishes to rounding because
    second differences of affine data are exactly zero.

A step moves interior samples by h * H (H the G-orthogonal projection of
the discrete tension field), re-projects boundary samples onto the target
section along the fiber, optionally applies one penalty iteration pulling
the boundary hyperbolic angle toward its target, and records diagnostics:
induced area, definiteness margin, max |H|, the normal-projection
residual, the boundary angle residual, and the boundary dbar defect
against the monitored schedule C/(1+t).
"""

from dataclasses import dataclass, field

import numpy as np

from . import jets
from .errors import ChartDomainError, ConfigError, SignatureLossError
from .kernels import sym_eig2_batch
from .line_space import _complement_basis, _cross3, _dot3, defect_psi, stereo_to_sphere


# -- chart geometry -----------------------------------------------------------

def _apply_j_c(u, V, du, dV):
    """Component-list version of the line-space J (jets or arrays)."""
    du2 = _cross3(u, du)
    udv = _dot3(u, dV)
    perp = [dV[i] - udv * u[i] for i in range(3)]
    rot = _cross3(u, perp)
    c = -_dot3(V, du2)
    dV2 = [rot[i] + c * u[i] for i in range(3)]
    return du2, dV2


def _omega_c(du_x, dv_x, du_y, dv_y):
    return _dot3(dv_x, du_y) - _dot3(dv_y, du_x)


def _metric_c(u, V, du_x, dv_x, du_y, dv_y):
    ju, jv = _apply_j_c(u, V, du_x, dv_x)
    return _omega_c(ju, jv, du_y, dv_y)


class LineSpaceChart:
    """Holomorphic coordinates (x, y, w1, w2) on the line space.

    (x, y) is the stereographic chart of the direction sphere around
    ``center`` (covering the open hemisphere for x^2+y^2 < 1) and
    (w1, w2) the fiber components in the chart frame, scaled so that
    w = w1 + i w2 transforms as the holomorphic fiber coordinate.
    """

    def __init__(self, center=(0.0, 0.0, 1.0)):
        self.center = np.asarray(center, dtype=float)
        self.center /= np.linalg.norm(self.center)
        self._cpq = _complement_basis(self.center)

    def _sigma(self, x, y, w1, w2):
        c, p, q = self._cpq
        u = list(stereo_to_sphere(x, y, self.center))
        e1 = [p[i] - x * (c[i] + u[i]) for i in range(3)]
        n1 = jets.sqrt(_dot3(e1, e1))
        e1 = [e / n1 for e in e1]
        e2 = _cross3(u, e1)
        beta = 2.0 / (1.0 + x * x + y * y)
        V = [beta * (w1 * e1[i] + w2 * e2[i]) for i in range(3)]
        return u, V

    def embed(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        u, V = self._sigma(pts[:, 0], pts[:, 1], pts[:, 2], pts[:, 3])
        return np.stack(u, axis=-1), np.stack(V, axis=-1)

    def embed_differential(self, pts):
        """(u, V, D) with D[n, A] = (du, dV) of the chart direction A."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        vs = jets.variables([pts[:, k] for k in range(4)], order=1)
        u, V = self._sigma(*vs)
        n = pts.shape[0]
        uval = np.stack([np.broadcast_to(c.f, (n,)) for c in u], axis=-1)
        vval = np.stack([np.broadcast_to(c.f, (n,)) for c in V], axis=-1)
        diff = np.empty((n, 4, 6))
        for a in range(4):
            for i in range(3):
                diff[:, a, i] = np.broadcast_to(u[i].g[a], (n,))
                diff[:, a, 3 + i] = np.broadcast_to(V[i].g[a], (n,))
        return uval, vval, diff

    def metric_and_christoffel(self, pts):
        """Exact G_AB and Gamma^D_AB of the chart metric at the points."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        n = pts.shape[0]
        vs = jets.variables([pts[:, k] for k in range(4)], order=2)
        u, V = self._sigma(*vs)
        # first-order jets of the coordinate tangents
        basis = []
        for a in range(4):
            du = [jets.Jet(u[i].g[a], u[i].h[a]) for i in range(3)]
            dV = [jets.Jet(V[i].g[a], V[i].h[a]) for i in range(3)]
            basis.append((du, dV))
        u1 = [jets.Jet(u[i].f, u[i].g) for i in range(3)]
        v1 = [jets.Jet(V[i].f, V[i].g) for i in range(3)]
        g4 = np.empty((n, 4, 4))
        dg4 = np.empty((n, 4, 4, 4))
        for a in range(4):
            for b in range(a, 4):
                entry = _metric_c(u1, v1, *basis[a], *basis[b])
                g4[:, a, b] = g4[:, b, a] = np.broadcast_to(entry.f, (n,))
                for k in range(4):
                    dg4[:, k, a, b] = dg4[:, k, b, a] = np.broadcast_to(entry.g[k], (n,))
        ginv = np.linalg.inv(g4)
        term = dg4 + dg4.transpose(0, 2, 1, 3) - dg4.transpose(0, 2, 3, 1)
        gamma = 0.5 * np.einsum("ndc,nabc->ndab", ginv, term)
        return g4, gamma

    def metric(self, pts):
        u, V, diff = self.embed_differential(pts)
        g4 = np.empty((len(diff), 4, 4))
        for a in range(4):
            for b in range(a, 4):
                val = _metric_c([u[:, i] for i in range(3)], [V[:, i] for i in range(3)],
                                [diff[:, a, i] for i in range(3)],
                                [diff[:, a, 3 + i] for i in range(3)],
                                [diff[:, b, i] for i in range(3)],
                                [diff[:, b, 3 + i] for i in range(3)])
                g4[:, a, b] = g4[:, b, a] = val
        return g4


# -- target sections ----------------------------------------------------------

class ChartSection:
    """Graphical section (x, y) -> fiber (w1, w2); the map must accept jets."""

    def __init__(self, fiber_fn, name="section"):
        self.fiber_fn = fiber_fn
        self.name = name

    def fiber(self, x, y):
        w1, w2 = self.fiber_fn(np.asarray(x, float), np.asarray(y, float))
        return np.broadcast_to(w1, np.shape(x)).copy(), np.broadcast_to(w2, np.shape(x)).copy()

    def fiber_with_partials(self, x, y):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        xv, yv = jets.variables([x, y], order=1)
        w1, w2 = self.fiber_fn(xv, yv)
        n = x.shape[0]
        w = np.empty((n, 2))
        dw = np.empty((n, 2, 2))
        for k, comp in enumerate((w1, w2)):
            if isinstance(comp, jets.Jet):
                w[:, k] = np.broadcast_to(comp.f, (n,))
                dw[:, 0, k] = np.broadcast_to(comp.g[0], (n,))
                dw[:, 1, k] = np.broadcast_to(comp.g[1], (n,))
            else:
                w[:, k] = np.broadcast_to(comp, (n,))
                dw[:, :, k] = 0.0
        return w, dw


def twisted_zero_section(strength):
    """Zero section plus the linear holomorphic twist, w = -i s (x + i y).

    For strength > 0 the induced metric is positive definite on the open
    hemisphere around the chart center and degenerates at the equator.
    """
    s = float(strength)
    return ChartSection(lambda x, y: (s * y, -s * x), name=f"twisted-zero[{s}]")


def affine_section(c0=(0.0, 0.0), c1=(0.0, 0.0)):
    """Holomorphic affine section w = c0 + c1 * (x + i y)."""
    c0 = complex(c0[0], c0[1]) if not isinstance(c0, complex) else c0
    c1 = complex(c1[0], c1[1]) if not isinstance(c1, complex) else c1

    def fiber(x, y):
        return (c0.real + c1.real * x - c1.imag * y,
                c0.imag + c1.imag * x + c1.real * y)
    return ChartSection(fiber, name="affine")


# -- flow state ---------------------------------------------------------------

@dataclass
class FlowDiagnostics:
    step: int
    time: float
    area: float
    margin: float
    max_h: float
    normal_residual: float
    angle_residual: float
    dbar_norm: float
    dbar_target: float

    def as_row(self):
        return [self.step, self.time, self.area, self.margin, self.max_h,
                self.normal_residual, self.angle_residual,
                self.dbar_norm, self.dbar_target]


@dataclass
class FlowState:
    chart: LineSpaceChart
    x_axis: np.ndarray
    y_axis: np.ndarray
    f: np.ndarray              # (nx, ny, 4) chart coordinates
    section: ChartSection      # boundary target
    h: float
    t: float = 0.0
    cosh_target: float = None
    dbar_c: float = 1.0
    angle_rate: float = 0.0
    chart_limit: float = 0.98  # hemisphere edge in chart radius
    diagnostics: list = field(default_factory=list)
    halted: str = ""

    @property
    def shape(self):
        return self.f.shape[:2]


def _fd_derivatives(f, dx, dy):
    """First and second central differences; one-sided first at the edges."""
    d1 = np.empty(f.shape[:2] + (2,) + f.shape[2:])
    d1[1:-1, :, 0] = (f[2:] - f[:-2]) / (2 * dx)
    d1[0, :, 0] = (-3 * f[0] + 4 * f[1] - f[2]) / (2 * dx)
    d1[-1, :, 0] = (3 * f[-1] - 4 * f[-2] + f[-3]) / (2 * dx)
    d1[:, 1:-1, 1] = (f[:, 2:] - f[:, :-2]) / (2 * dy)
    d1[:, 0, 1] = (-3 * f[:, 0] + 4 * f[:, 1] - f[:, 2]) / (2 * dy)
    d1[:, -1, 1] = (3 * f[:, -1] - 4 * f[:, -2] + f[:, -3]) / (2 * dy)

    d2 = np.zeros(f.shape[:2] + (2, 2) + f.shape[2:])
    d2[1:-1, :, 0, 0] = (f[2:] - 2 * f[1:-1] + f[:-2]) / dx ** 2
    d2[:, 1:-1, 1, 1] = (f[:, 2:] - 2 * f[:, 1:-1] + f[:, :-2]) / dy ** 2
    mixed = np.zeros_like(f)
    mixed[1:-1, 1:-1] = (f[2:, 2:] - f[2:, :-2] - f[:-2, 2:] + f[:-2, :-2]) / (4 * dx * dy)
    d2[:, :, 0, 1] = mixed
    d2[:, :, 1, 0] = mixed
    return d1, d2


def _induced_gram(g4, d1):
    return np.einsum("...aA,...AB,...bB->...ab", d1, g4, d1)


def flow_geometry(state):
    """Shared per-step geometry: derivatives, Gram, mean curvature field."""
    nx, ny = state.shape
    dx = state.x_axis[1] - state.x_axis[0]
    dy = state.y_axis[1] - state.y_axis[0]
    d1, d2 = _fd_derivatives(state.f, dx, dy)
    pts = state.f.reshape(-1, 4)
    g4, gamma = state.chart.metric_and_christoffel(pts)
    g4 = g4.reshape(nx, ny, 4, 4)
    gamma = gamma.reshape(nx, ny, 4, 4, 4)
    gram = _induced_gram(g4, d1)

    lo, hi = sym_eig2_batch(np.ascontiguousarray(gram.reshape(-1, 2, 2)))
    margin = float(np.min(lo))
    if margin <= 0.0:
        raise SignatureLossError(
            f"induced metric lost definiteness (margin {margin:.3e})")

    det = gram[..., 0, 0] * gram[..., 1, 1] - gram[..., 0, 1] ** 2
    ginv = np.empty_like(gram)
    ginv[..., 0, 0] = gram[..., 1, 1] / det
    ginv[..., 1, 1] = gram[..., 0, 0] / det
    ginv[..., 0, 1] = ginv[..., 1, 0] = -gram[..., 0, 1] / det

    tension = np.einsum("...ab,...abA->...A", ginv, d2)
    tension += np.einsum("...ab,...ABC,...aB,...bC->...A", ginv, gamma, d1, d1)
    # project G-orthogonally to the tangent plane
    rhs = np.einsum("...A,...AB,...aB->...a", tension, g4, d1)
    coef = np.einsum("...ab,...b->...a", ginv, rhs)
    mean_curv = tension - np.einsum("...a,...aA->...A", coef, d1)
    residual = np.einsum("...A,...AB,...aB->...a", mean_curv, g4, d1)
    return {
        "d1": d1, "d2": d2, "g4": g4, "gram": gram, "det": det,
        "mean_curv": mean_curv, "margin": margin,
        "normal_residual": float(np.max(np.abs(residual))),
        "dx": dx, "dy": dy,
    }


def mean_curvature_vector(state):
    """Mean curvature field H in chart components, zero on the boundary ring."""
    geo = flow_geometry(state)
    h_field = geo["mean_curv"].copy()
    h_field[0, :] = h_field[-1, :] = 0.0
    h_field[:, 0] = h_field[:, -1] = 0.0
    return h_field, geo


def induced_area(state, geo=None):
    """Trapezoid integral of sqrt(det Gram) over the parameter square."""
    if geo is None:
        geo = flow_geometry(state)
    dens = np.sqrt(geo["det"])
    wx = np.full(state.shape[0], geo["dx"])
    wx[0] = wx[-1] = 0.5 * geo["dx"]
    wy = np.full(state.shape[1], geo["dy"])
    wy[0] = wy[-1] = 0.5 * geo["dy"]
    return float(np.einsum("ij,i,j->", dens, wx, wy))


def boundary_mask(shape):
    mask = np.zeros(shape, dtype=bool)
    mask[0, :] = mask[-1, :] = True
    mask[:, 0] = mask[:, -1] = True
    return mask


def _edge_indices(shape):
    """Boundary samples excluding the four corners, with their unique
    first-interior neighbours.  Corner tangent frames are one-sided in both
    directions and carry no interior dependence, so the angle machinery
    skips them."""
    nx, ny = shape
    pairs = []
    pairs.extend(((0, j), (1, j)) for j in range(1, ny - 1))
    pairs.extend(((nx - 1, j), (nx - 2, j)) for j in range(1, ny - 1))
    pairs.extend(((i, 0), (i, 1)) for i in range(1, nx - 1))
    pairs.extend(((i, ny - 1), (i, ny - 2)) for i in range(1, nx - 1))
    return pairs


def dbar_boundary_norm(state, geo):
    """max |psi| of the disc's tangent planes along the boundary ring."""
    ii, jj = np.nonzero(boundary_mask(state.shape))
    pts = state.f[ii, jj]
    u, V, diff = state.chart.embed_differential(pts)
    d1 = geo["d1"][ii, jj]                        # (m, 2, 4)
    lifted = np.einsum("maA,mAk->mak", d1, diff)  # (m, 2, 6)
    psi = defect_psi(u, V, lifted[:, 0, :3], lifted[:, 0, 3:],
                     lifted[:, 1, :3], lifted[:, 1, 3:], tuple(state.chart.center))
    return float(np.max(np.abs(psi)))


def _plane_cosh(g4, p_basis, q_basis):
    """cosh of the hyperbolic angle between two definite planes at a point.

    Bases are G-orthonormalised (against the common definite sign); the
    value is |det| of the cross Gram of the unit bivectors, 1 for equal
    planes.
    """
    def orthonormalise(basis):
        gram = np.einsum("...iA,...AB,...jB->...ij", basis, g4, basis)
        sign = np.where(np.trace(gram, axis1=-2, axis2=-1) >= 0, 1.0, -1.0)
        gram = gram * sign[..., None, None]
        chol = np.linalg.cholesky(gram)
        inv = np.linalg.inv(chol)
        return np.einsum("...ji,...jA->...iA", inv.transpose(0, 2, 1), basis), sign

    try:
        b1, s1 = orthonormalise(p_basis)
        b2, s2 = orthonormalise(q_basis)
    except np.linalg.LinAlgError:
        raise SignatureLossError("boundary tangent plane is not definite")
    cross = np.einsum("...iA,...AB,...jB->...ij", b1, g4, b2)
    return np.abs(np.linalg.det(cross))


def boundary_angle_cosh(state, geo):
    """cosh of the angle between the disc and the target section, per
    non-corner boundary sample."""
    edges = _edge_indices(state.shape)
    ii = np.array([e[0][0] for e in edges])
    jj = np.array([e[0][1] for e in edges])
    pts = state.f[ii, jj]
    g4 = geo["g4"][ii, jj]
    disc_basis = geo["d1"][ii, jj].copy()         # (m, 2, 4)
    w, dw = state.section.fiber_with_partials(pts[:, 0], pts[:, 1])
    sec_basis = np.zeros_like(disc_basis)
    sec_basis[:, 0, 0] = 1.0
    sec_basis[:, 0, 2:] = dw[:, 0, :]
    sec_basis[:, 1, 1] = 1.0
    sec_basis[:, 1, 2:] = dw[:, 1, :]
    return _plane_cosh(g4, disc_basis, sec_basis)


def angle_residual(state, geo=None):
    """Mean |cosh(angle) - cosh(target)| over the non-corner boundary."""
    if geo is None:
        geo = flow_geometry(state)
    cosh_vals = boundary_angle_cosh(state, geo)
    if state.cosh_target is None:
        state.cosh_target = float(np.mean(cosh_vals))
    return float(np.mean(np.abs(cosh_vals - state.cosh_target)))


def angle_penalty_step(state, rate=None, probe=1e-6):
    """One penalty iteration on the boundary angle.

    Nudges the fiber components of the first interior ring along the
    numerically estimated gradient of (cosh angle - cosh target)^2, with
    the per-sample move clamped to a fraction of the grid spacing.
    Returns the post-step residual.
    """
    rate = state.angle_rate if rate is None else rate
    geo = flow_geometry(state)
    base = boundary_angle_cosh(state, geo)
    if state.cosh_target is None:
        state.cosh_target = float(np.mean(base))
    target = state.cosh_target
    pairs = _edge_indices(state.shape)
    grads = np.zeros((len(pairs), 2))
    for k in range(2):
        trial = state.f.copy()
        for (_, (ii, jj)) in pairs:
            trial[ii, jj, 2 + k] += probe
        trial_state = FlowState(state.chart, state.x_axis, state.y_axis, trial,
                                state.section, state.h, state.t,
                                cosh_target=target)
        vals = boundary_angle_cosh(trial_state, flow_geometry(trial_state))
        grads[:, k] = (vals - base) / probe
    err = base - target
    norm_sq = np.sum(grads ** 2, axis=1)
    scale = np.where(norm_sq > 1e-30, err / np.maximum(norm_sq, 1e-30), 0.0)
    step = rate * scale[:, None] * grads
    cap = 0.05 * (state.x_axis[1] - state.x_axis[0])
    mag = np.sqrt(np.sum(step ** 2, axis=1, keepdims=True))
    step = np.where(mag > cap, step * (cap / np.maximum(mag, 1e-300)), step)
    # nodes adjacent to a corner serve two boundary samples; average their
    # requested nudges instead of stacking them
    accum = np.zeros(state.shape + (2,))
    count = np.zeros(state.shape)
    for m, (_, (ii, jj)) in enumerate(pairs):
        accum[ii, jj] += step[m]
        count[ii, jj] += 1.0
    nonzero = count > 0
    accum[nonzero] /= count[nonzero][:, None]
    state.f[..., 2:] -= accum
    geo2 = flow_geometry(state)
    return float(np.mean(np.abs(boundary_angle_cosh(state, geo2) - target)))


def project_boundary(state):
    """Condition (ii): boundary fibers snap onto the target section."""
    mask = boundary_mask(state.shape)
    xb = state.f[mask][:, 0]
    yb = state.f[mask][:, 1]
    r = np.sqrt(xb ** 2 + yb ** 2)
    if np.any(r >= state.chart_limit):
        raise ChartDomainError("boundary sample ran off the hemisphere chart")
    w1, w2 = state.section.fiber(xb, yb)
    fib = state.f[mask]
    fib[:, 2] = w1
    fib[:, 3] = w2
    state.f[mask] = fib


def flow_step(state):
    """One explicit step: interior moves by h*H, boundary re-projected."""
    h_field, geo = mean_curvature_vector(state)
    max_h = float(np.max(np.sqrt(np.sum(h_field ** 2, axis=-1))))
    state.f = state.f + state.h * h_field
    interior = ~boundary_mask(state.shape)
    r_int = np.sqrt(state.f[..., 0] ** 2 + state.f[..., 1] ** 2)
    if np.any(r_int[interior] >= state.chart_limit):
        raise ChartDomainError("interior sample ran off the hemisphere chart")
    project_boundary(state)
    ang_res = float("nan")
    if state.angle_rate > 0.0:
        ang_res = angle_penalty_step(state)
    state.t += state.h

    geo_after = flow_geometry(state)
    if not (state.angle_rate > 0.0):
        ang_res = angle_residual(state, geo_after)
    diag = FlowDiagnostics(
        step=len(state.diagnostics), time=state.t,
        area=induced_area(state, geo_after),
        margin=geo_after["margin"], max_h=max_h,
        normal_residual=geo_after["normal_residual"],
        angle_residual=ang_res,
        dbar_norm=dbar_boundary_norm(state, geo_after),
        dbar_target=state.dbar_c / (1.0 + state.t),
    )
    state.diagnostics.append(diag)
    return state


# -- configuration ------------------------------------------------------------

FLOW_CONFIG_KEYS = {
    "grid_n": 25, "chart_radius": 0.55, "center": (0.0, 0.0, 1.0),
    "twist_strength": 1.0, "disc": "twisted-hemisphere",
    "perturbation": 0.0, "h": None, "cfl": 0.2, "steps": 200,
    "angle_target": None, "dbar_c": 1.0, "angle_rate": 0.0,
    "stagnation_tol": 0.0, "snapshot_every": 0, "seed": 0,
}


def build_state(config=None, **overrides):
    """Assemble a FlowState from a config mapping (unknown keys rejected)."""
    cfg = dict(FLOW_CONFIG_KEYS)
    supplied = dict(config or {})
    supplied.update(overrides)
    for key, value in supplied.items():
        if key not in FLOW_CONFIG_KEYS:
            raise ConfigError(
                f"unknown flow config key {key!r}; valid keys: "
                f"{sorted(FLOW_CONFIG_KEYS)}")
        cfg[key] = value
    n = int(cfg["grid_n"])
    if n < 5:
        raise ConfigError("grid_n must be at least 5")
    radius = float(cfg["chart_radius"])
    if not (0.0 < radius < 1.0):
        raise ConfigError("chart_radius must sit inside the open hemisphere (0,1)")
    strength = float(cfg["twist_strength"])
    chart = LineSpaceChart(cfg["center"])
    section = twisted_zero_section(strength)
    x_axis = np.linspace(-radius, radius, n)
    y_axis = np.linspace(-radius, radius, n)
    xm, ym = np.meshgrid(x_axis, y_axis, indexing="ij")
    f = np.zeros((n, n, 4))
    f[..., 0] = xm
    f[..., 1] = ym
    disc = cfg["disc"]
    w1, w2 = section.fiber(xm, ym)
    if disc == "twisted-hemisphere":
        f[..., 2] = w1
        f[..., 3] = w2
        amp = float(cfg["perturbation"])
        if amp:
            shape_fn = (1.0 - (xm / radius) ** 2) * (1.0 - (ym / radius) ** 2)
            f[..., 2] += amp * shape_fn
            f[..., 3] += 0.5 * amp * shape_fn * (xm / radius)
    elif disc == "holomorphic-affine":
        sec = affine_section(c0=(0.05, -0.02), c1=(0.0, -strength))
        w1a, w2a = sec.fiber(xm, ym)
        f[..., 2] = w1a
        f[..., 3] = w2a
        section = sec
    else:
        raise ConfigError(f"unknown disc id {disc!r}; "
                          "use twisted-hemisphere or holomorphic-affine")
    dx = x_axis[1] - x_axis[0]
    h = cfg["h"] if cfg["h"] is not None else float(cfg["cfl"]) * dx * dx
    state = FlowState(chart, x_axis, y_axis, f, section, float(h),
                      cosh_target=None if cfg["angle_target"] is None
                      else float(np.cosh(cfg["angle_target"])),
                      dbar_c=float(cfg["dbar_c"]),
                      angle_rate=float(cfg["angle_rate"]))
    return state, cfg


def run_flow(config=None, **overrides):
    """Iterate flow steps per the config; halts on budget, signature loss,
    chart exit, or stagnation.  Returns (state, snapshots)."""
    state, cfg = build_state(config, **overrides)
    try:
        geo = flow_geometry(state)
        h_field, _ = mean_curvature_vector(state)
    except (SignatureLossError, ChartDomainError) as err:
        state.halted = f"{type(err).__name__}: {err}"
        return state, []
    state.diagnostics.append(FlowDiagnostics(
        step=0, time=0.0, area=induced_area(state, geo), margin=geo["margin"],
        max_h=float(np.max(np.sqrt(np.sum(h_field ** 2, axis=-1)))),
        normal_residual=geo["normal_residual"],
        angle_residual=angle_residual(state, geo),
        dbar_norm=dbar_boundary_norm(state, geo), dbar_target=state.dbar_c))
    snapshots = []
    every = int(cfg["snapshot_every"])
    for step in range(int(cfg["steps"])):
        try:
            flow_step(state)
        except (SignatureLossError, ChartDomainError) as err:
            state.halted = f"{type(err).__name__}: {err}"
            break
        if every and (step + 1) % every == 0:
            snapshots.append((state.t, state.f.copy()))
        tol = float(cfg["stagnation_tol"])
        if tol and state.diagnostics[-1].max_h < tol:
            state.halted = "stagnation"
            break
    return state, snapshots
