"""The space of oriented lines of flat R^3 and its neutral pseudo-Kahler structure.

An oriented line is a pair (u, V) with |u| = 1 the direction and V the
foot of the perpendicular from the origin (u.V = 0); this realises the
space as the total space of the tangent bundle of the 2-sphere.  Tangent
vectors (du, dV) obey u.du = 0 and u.dV + V.du = 0.

The structure triple used throughout:

  J(du, dV) = (u x du, u x P(dV) + c u),  P(w) = w - (u.w)u,
              c = -V.(u x du)               [rotation by 90 deg about u]
  omega(X, Y) = dV_X . du_Y - dV_Y . du_X   [exact: omega = d(V . du)]
  G(X, Y) = omega(J X, Y)                   [symmetric, signature (2,2)]

Normal congruences of oriented surfaces are Lagrangian sections; their
complex points (tangent plane preserved by J) sit exactly over the
surface's umbilics, and the Keller-Maslov index of a loop equals four
times the enclosed umbilic index sum.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import jets
from .errors import ChartDomainError, UnreliableLoopError
from .kernels import winding_total
from .surface_geom import _jet_map

TWO_PI = 2.0 * np.pi
CONSTRAINT_TOL = 1e-12


# -- containers --------------------------------------------------------------

@dataclass
class OrientedLine:
    u: np.ndarray
    V: np.ndarray

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        self.V = np.asarray(self.V, dtype=float)

    def validate(self, tol=CONSTRAINT_TOL):
        if abs(np.dot(self.u, self.u) - 1.0) > tol:
            raise ValueError("direction is not unit length")
        if abs(np.dot(self.u, self.V)) > tol:
            raise ValueError("foot vector is not perpendicular to the direction")


@dataclass
class LineTangent:
    base: OrientedLine
    du: np.ndarray
    dV: np.ndarray

    def __post_init__(self):
        self.du = np.asarray(self.du, dtype=float)
        self.dV = np.asarray(self.dV, dtype=float)

    def validate(self, tol=CONSTRAINT_TOL):
        scale = 1.0 + float(np.max(np.abs(self.du)) + np.max(np.abs(self.dV)))
        if abs(np.dot(self.base.u, self.du)) > tol * scale:
            raise ValueError("du is not tangent to the direction sphere")
        res = np.dot(self.base.u, self.dV) + np.dot(self.base.V, self.du)
        if abs(res) > tol * scale:
            raise ValueError("(du, dV) violates the foot-perpendicularity constraint")


def line_through(point, direction):
    """Oriented line through ``point`` with unit ``direction``."""
    u = np.asarray(direction, dtype=float)
    u = u / np.linalg.norm(u)
    p = np.asarray(point, dtype=float)
    return OrientedLine(u, p - np.dot(p, u) * u)


def random_base(rng):
    u = rng.normal(size=3)
    u /= np.linalg.norm(u)
    w = rng.normal(size=3)
    return OrientedLine(u, w - np.dot(w, u) * u)


def random_tangent(rng, base, scale=1.0):
    a = rng.normal(size=3) * scale
    du = a - np.dot(a, base.u) * base.u
    w = rng.normal(size=3) * scale
    dV = w - (np.dot(base.u, w) + np.dot(base.V, du)) * base.u
    return LineTangent(base, du, dV)


# -- structure kernels (batched over leading axes) ---------------------------

def _dot(a, b):
    return np.einsum("...i,...i->...", a, b)


def apply_j(u, V, du, dV):
    """Ambient complex structure on a tangent (du, dV) at base (u, V)."""
    du2 = np.cross(u, du)
    perp = dV - _dot(u, dV)[..., None] * u
    c = -_dot(V, du2)
    dV2 = np.cross(u, perp) + c[..., None] * u
    return du2, dV2


def omega_pair(du_x, dv_x, du_y, dv_y):
    """Symplectic form on two tangents given by their components."""
    return _dot(dv_x, du_y) - _dot(dv_y, du_x)


def metric_pair(u, V, du_x, dv_x, du_y, dv_y):
    """Neutral metric G(X, Y) = omega(J X, Y)."""
    ju, jv = apply_j(u, V, du_x, dv_x)
    return omega_pair(ju, jv, du_y, dv_y)


def neutral_structures(x, y):
    """(J x, omega(x, y), G(x, y)) for tangents at a common base line."""
    if not np.allclose(x.base.u, y.base.u) or not np.allclose(x.base.V, y.base.V):
        raise ValueError("tangents live at different base lines")
    u, V = x.base.u, x.base.V
    ju, jv = apply_j(u, V, x.du, x.dV)
    om = omega_pair(x.du, x.dV, y.du, y.dV)
    g = metric_pair(u, V, x.du, x.dV, y.du, y.dV)
    return LineTangent(x.base, ju, jv), float(om), float(g)


def potential_form(V, du):
    """Primitive lambda with d(lambda) = omega: lambda(du, dV) = V . du."""
    return _dot(V, du)


# -- sphere frames ------------------------------------------------------------

def _complement_basis(center):
    c = np.asarray(center, dtype=float)
    c = c / np.linalg.norm(c)
    k = np.argmin(np.abs(c))
    axis = np.zeros(3)
    axis[k] = 1.0
    p = np.cross(c, axis)
    p /= np.linalg.norm(p)
    q = np.cross(c, p)
    return c, p, q


def sphere_frame(u, center):
    """Smooth orthonormal frame (e1, e2 = u x e1) of u-perp over a chart.

    e1 follows the first stereographic coordinate direction of the chart
    centred at ``center`` (projection from -center), so the frame is smooth
    on the sphere minus the antipode of the center and J-compatible:
    J maps (0, e1) to (0, e2) in the vertical splitting.
    """
    c, p, q = _complement_basis(center)
    u = np.asarray(u, dtype=float)
    denom = 1.0 + np.einsum("...i,i->...", u, c)
    if np.any(denom <= 1e-12):
        raise ChartDomainError("direction at or beyond the chart antipode")
    x = np.einsum("...i,i->...", u, p) / denom
    # d/dx of u(x, y) = (2x p + 2y q + (1 - r^2) c)/(1 + r^2) is a positive
    # multiple of p - x (c + u)
    e1 = p - x[..., None] * (c + u)
    e1 = e1 / np.linalg.norm(e1, axis=-1, keepdims=True)
    e2 = np.cross(u, e1)
    return e1, e2


def stereo_to_sphere(x, y, center):
    """Inverse stereographic chart: plane coords -> unit direction (jets ok)."""
    c, p, q = _complement_basis(center)
    r_sq = x * x + y * y
    denom = 1.0 + r_sq
    ux = (2.0 * x * p[0] + 2.0 * y * q[0] + (1.0 - r_sq) * c[0]) / denom
    uy = (2.0 * x * p[1] + 2.0 * y * q[1] + (1.0 - r_sq) * c[1]) / denom
    uz = (2.0 * x * p[2] + 2.0 * y * q[2] + (1.0 - r_sq) * c[2]) / denom
    return ux, uy, uz


def sphere_to_stereo(u, center):
    c, p, q = _complement_basis(center)
    denom = 1.0 + np.einsum("...i,i->...", u, c)
    return (np.einsum("...i,i->...", u, p) / denom,
            np.einsum("...i,i->...", u, q) / denom)


# -- the anti-complex defect --------------------------------------------------

def defect_psi(u, V, du1, dv1, du2, dv2, center, normalize=True):
    """Complex defect whose zeros are the J-invariant tangent planes.

    Decomposes J X1 over the frame (X1, X2, E1, E2), with E_i the vertical
    complement vectors built from the chart frame of ``center``; the two
    vertical coefficients form psi = g1 + i g2.  A smooth nonvanishing
    rescale of the tangent frame changes psi by a nonvanishing factor and
    never the winding around a zero; ``normalize`` applies the unit-frame
    rescale that makes |psi| a dimensionless measure.
    """
    if normalize:
        n1 = np.sqrt(_dot(du1, du1) + _dot(dv1, dv1))[..., None]
        n2 = np.sqrt(_dot(du2, du2) + _dot(dv2, dv2))[..., None]
        du1, dv1 = du1 / n1, dv1 / n1
        du2, dv2 = du2 / n2, dv2 / n2
    e1, e2 = sphere_frame(u, center)
    zeros = np.zeros_like(e1)
    ju, jv = apply_j(u, V, du1, dv1)
    rhs = np.concatenate([ju, jv], axis=-1)
    cols = [np.concatenate([du1, dv1], axis=-1),
            np.concatenate([du2, dv2], axis=-1),
            np.concatenate([zeros, e1], axis=-1),
            np.concatenate([zeros, e2], axis=-1)]
    m = np.stack(cols, axis=-1)                       # (..., 6, 4)
    mtm = np.einsum("...ia,...ib->...ab", m, m)
    mtb = np.einsum("...ia,...i->...a", m, rhs)
    sol = np.linalg.solve(mtm, mtb[..., None])[..., 0]
    return sol[..., 2] + 1j * sol[..., 3]


def plane_off_j_fraction(u, V, du1, dv1, du2, dv2):
    """Relative size of the part of J X_a outside span(X1, X2)."""
    x1 = np.concatenate([du1, dv1], axis=-1)
    x2 = np.concatenate([du2, dv2], axis=-1)
    basis = np.stack([x1, x2], axis=-1)              # (..., 6, 2)
    btb = np.einsum("...ia,...ib->...ab", basis, basis)
    worst = np.zeros(np.shape(u)[:-1])
    for dua, dva in ((du1, dv1), (du2, dv2)):
        ju, jv = apply_j(u, V, dua, dva)
        w = np.concatenate([ju, jv], axis=-1)
        rhs = np.einsum("...ia,...i->...a", basis, w)
        coef = np.linalg.solve(btb, rhs[..., None])[..., 0]
        resid = w - np.einsum("...ia,...a->...i", basis, coef)
        frac = np.sqrt(_dot(resid, resid) / _dot(w, w))
        worst = np.maximum(worst, frac)
    return worst


# -- plane classification and the Wirtinger identity -------------------------

@dataclass
class PlaneClass:
    kind: str
    lagrangian: bool
    holomorphic: bool
    eigenvalues: tuple
    omega: float


def classify_plane(x1, x2, rel_tol=1e-8):
    """Signature type of span(x1, x2) plus Lagrangian/holomorphic flags."""
    u, V = x1.base.u, x1.base.V
    scale1 = np.linalg.norm(np.concatenate([x1.du, x1.dV]))
    scale2 = np.linalg.norm(np.concatenate([x2.du, x2.dV]))
    cross_gram = abs(np.dot(np.concatenate([x1.du, x1.dV]),
                            np.concatenate([x2.du, x2.dV])))
    if cross_gram > (1.0 - 1e-10) * scale1 * scale2 or min(scale1, scale2) == 0.0:
        raise ValueError("tangent inputs are (numerically) linearly dependent")
    gram = np.empty((2, 2))
    pairs = ((x1.du, x1.dV), (x2.du, x2.dV))
    for i, (dui, dvi) in enumerate(pairs):
        for j, (duj, dvj) in enumerate(pairs):
            gram[i, j] = metric_pair(u, V, dui, dvi, duj, dvj)
    om = omega_pair(x1.du, x1.dV, x2.du, x2.dV)
    evals = np.linalg.eigvalsh(0.5 * (gram + gram.T))
    scale = scale1 * scale2
    tol = rel_tol * scale
    small = np.abs(evals) <= tol
    if small.all():
        kind = "totally-null"
    elif small.any():
        kind = "degenerate"
    elif evals[0] > 0:
        kind = "positive-definite"
    elif evals[1] < 0:
        kind = "negative-definite"
    else:
        kind = "lorentz"
    lagrangian = abs(om) <= tol
    holo = plane_off_j_fraction(u[None], V[None], x1.du[None], x1.dV[None],
                                x2.du[None], x2.dV[None])[0] <= rel_tol ** 0.5
    return PlaneClass(kind, bool(lagrangian), bool(holo),
                      (float(evals[0]), float(evals[1])), float(om))


def _quad_form(u, V, a, b, c, d):
    """(omega ^ omega)/2 evaluated on four tangents (component tuples)."""
    om = omega_pair
    return (om(*a, *b) * om(*c, *d)
            - om(*a, *c) * om(*b, *d)
            + om(*a, *d) * om(*b, *c))


_DET4_SIGN = None


def _calibrate_det4_sign():
    """Orientation of the G-volume form, fixed once on a reference plane.

    (omega ^ omega)/2 equals the metric volume form up to a global sign;
    the sign is pinned by requiring the neutral Wirtinger identity
    omega^2 - det4 = det Gram on one generic plane.
    """
    global _DET4_SIGN
    if _DET4_SIGN is not None:
        return _DET4_SIGN
    base = OrientedLine(np.array([0.0, 0.0, 1.0]), np.array([0.3, -0.2, 0.0]))
    x1 = LineTangent(base, np.array([1.0, 0.0, 0.0]), np.array([0.5, 0.7, -0.3]))
    x2 = LineTangent(base, np.array([0.0, 1.0, 0.0]), np.array([-0.4, 0.1, 0.2]))
    u, V = base.u, base.V
    a = (x1.du, x1.dV)
    b = (x2.du, x2.dV)
    c = apply_j(u, V, *a)
    d = apply_j(u, V, *b)
    quad = _quad_form(u, V, a, b, c, d)
    gram = np.array([[metric_pair(u, V, *a, *a), metric_pair(u, V, *a, *b)],
                     [metric_pair(u, V, *b, *a), metric_pair(u, V, *b, *b)]])
    om = omega_pair(*a, *b)
    sign = (om * om - np.linalg.det(gram)) / quad
    _DET4_SIGN = 1.0 if sign > 0 else -1.0
    return _DET4_SIGN


def wirtinger_residual(x1, x2):
    """|omega(X1,X2)^2 - det[X1,X2,JX1,JX2] - det G(Xi,Xj)|.

    The 4-determinant is taken against the G-volume form with the
    calibrated orientation (see _calibrate_det4_sign).
    """
    sign = _calibrate_det4_sign()
    u, V = x1.base.u, x1.base.V
    a = (x1.du, x1.dV)
    b = (x2.du, x2.dV)
    c = apply_j(u, V, *a)
    d = apply_j(u, V, *b)
    det4 = sign * _quad_form(u, V, a, b, c, d)
    gram = np.array([[metric_pair(u, V, *a, *a), metric_pair(u, V, *a, *b)],
                     [metric_pair(u, V, *b, *a), metric_pair(u, V, *b, *b)]])
    om = omega_pair(*a, *b)
    return float(abs(om * om - det4 - np.linalg.det(gram)))


# -- normal congruences -------------------------------------------------------

def _jet_vec(values, grads):
    """Three order-1 jets for a batched 3-vector with parameter gradients."""
    return [jets.Jet(values[..., i], np.stack([grads[..., a, i] for a in range(2)]))
            for i in range(3)]


def _cross3(a, b):
    return [a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0]]


def _dot3(a, b):
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


class CongruenceMap:
    """Oriented normal lines of a surface in the flat chart, jet-evaluable.

    ``eval(s, t)`` returns the section sample u, V and its exact parameter
    tangents dU, dV of shapes (..., 3) and (..., 2, 3).
    """

    def __init__(self, surface):
        if surface.chart != "cartesian":
            raise ChartDomainError("normal congruences require a flat cartesian chart")
        self.surface = surface

    def eval(self, s, t, chunk=1 << 16):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        t = np.atleast_1d(np.asarray(t, dtype=float))
        s, t = np.broadcast_arrays(s, t)
        if s.size > chunk:
            flat_s, flat_t = s.reshape(-1), t.reshape(-1)
            parts = [self.eval(flat_s[k:k + chunk], flat_t[k:k + chunk])
                     for k in range(0, s.size, chunk)]
            out = [np.concatenate([p[i] for p in parts], axis=0)
                   for i in range(4)]
            return (out[0].reshape(s.shape + (3,)), out[1].reshape(s.shape + (3,)),
                    out[2].reshape(s.shape + (2, 3)), out[3].reshape(s.shape + (2, 3)))
        point, d1, d2 = _jet_map(self.surface, s.ravel(), t.ravel())
        shape = s.shape
        p = _jet_vec(point.reshape(-1, 3), d1.reshape(-1, 2, 3))
        xs = _jet_vec(d1.reshape(-1, 2, 3)[:, 0, :], d2.reshape(-1, 2, 2, 3)[:, 0, :, :])
        xt = _jet_vec(d1.reshape(-1, 2, 3)[:, 1, :], d2.reshape(-1, 2, 2, 3)[:, 1, :, :])
        raw = _cross3(xs, xt)
        if self.surface.orient < 0:
            raw = [-c for c in raw]
        norm = jets.sqrt(_dot3(raw, raw))
        n = [c / norm for c in raw]
        pn = _dot3(p, n)
        foot = [p[i] - pn * n[i] for i in range(3)]

        def unpack(vec):
            vals = np.stack([c.f for c in vec], axis=-1).reshape(shape + (3,))
            grads = np.stack([np.stack([c.g[a] for c in vec], axis=-1)
                              for a in range(2)], axis=-2)
            return vals, grads.reshape(shape + (2, 3))

        u, du = unpack(n)
        V, dV = unpack(foot)
        return u, V, du, dV


@dataclass
class LineSection:
    """Sampled section of the line space over a parameter grid.

    ``u`` and ``V`` have shape (ns, nt, 3); tangents ``du``/``dV`` shape
    (ns, nt, 2, 3) hold the parameter derivatives when known exactly, and
    are reconstructed by central differences after deserialisation.
    """

    s_axis: np.ndarray
    t_axis: np.ndarray
    u: np.ndarray
    V: np.ndarray
    du: np.ndarray = None
    dV: np.ndarray = None
    periodic: tuple = (False, False)
    center: tuple = (0.0, 0.0, 1.0)
    source: object = None

    def tangents(self):
        if self.du is None or self.dV is None:
            self.du = _grid_gradient(self.u, self.s_axis, self.t_axis, self.periodic)
            self.dV = _grid_gradient(self.V, self.s_axis, self.t_axis, self.periodic)
        return self.du, self.dV

    def save(self, path):
        ns, nt = self.u.shape[:2]
        header = [
            "geomlab line-section v1",
            f"ns={ns} nt={nt}",
            f"s0={self.s_axis[0]:.17g} s1={self.s_axis[-1]:.17g}",
            f"t0={self.t_axis[0]:.17g} t1={self.t_axis[-1]:.17g}",
            f"periodic={int(self.periodic[0])},{int(self.periodic[1])}",
            f"center={self.center[0]:.17g},{self.center[1]:.17g},{self.center[2]:.17g}",
            "columns: u_x u_y u_z V_x V_y V_z (row-major over the s,t grid)",
        ]
        table = np.concatenate([self.u.reshape(-1, 3), self.V.reshape(-1, 3)], axis=1)
        with open(path, "w", encoding="utf-8") as fh:
            for line in header:
                fh.write(f"# {line}\n")
            for row in table:
                fh.write(" ".join(f"{x:.17g}" for x in row) + "\n")

    @classmethod
    def load(cls, path):
        meta = {}
        rows = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                if line.startswith("#"):
                    for part in line[1:].split():
                        if "=" in part:
                            key, val = part.split("=", 1)
                            meta[key] = val
                    continue
                rows.append([float(x) for x in line.split()])
        ns, nt = int(meta["ns"]), int(meta["nt"])
        table = np.asarray(rows)
        per = tuple(bool(int(x)) for x in meta["periodic"].split(","))
        center = tuple(float(x) for x in meta["center"].split(","))
        s_axis = np.linspace(float(meta["s0"]), float(meta["s1"]), ns)
        t_axis = np.linspace(float(meta["t0"]), float(meta["t1"]), nt)
        return cls(s_axis, t_axis, table[:, :3].reshape(ns, nt, 3),
                   table[:, 3:].reshape(ns, nt, 3), periodic=per, center=center)


def _grid_gradient(values, s_axis, t_axis, periodic):
    out = np.empty(values.shape[:2] + (2, 3))
    for axis, (coords, per) in enumerate(((s_axis, periodic[0]), (t_axis, periodic[1]))):
        if per:
            step = coords[1] - coords[0]
            d = (np.roll(values, -1, axis=axis) - np.roll(values, 1, axis=axis)) / (2 * step)
        else:
            d = np.gradient(values, coords, axis=axis)
        out[:, :, axis, :] = d
    return out


def normal_congruence(surface, grid=(128, 96), center=None):
    """Sampled normal-line section of a surface in flat R^3.

    Warns when the sampled Gauss map is not injective (the section is then
    not graphical over the direction sphere), but still returns samples.
    """
    cmap = CongruenceMap(surface)
    (s0, s1), (t0, t1) = surface.domain
    ns, nt = grid
    margin_s = 0.0 if surface.periodic[0] else (s1 - s0) / (2 * ns)
    margin_t = 0.0 if surface.periodic[1] else (t1 - t0) / (2 * nt)
    if surface.periodic[0]:
        s_axis = s0 + (s1 - s0) * np.arange(ns) / ns
    else:
        s_axis = np.linspace(s0 + margin_s, s1 - margin_s, ns)
    if surface.periodic[1]:
        t_axis = t0 + (t1 - t0) * np.arange(nt) / nt
    else:
        t_axis = np.linspace(t0 + margin_t, t1 - margin_t, nt)
    sm, tm = np.meshgrid(s_axis, t_axis, indexing="ij")
    u, V, du, dV = cmap.eval(sm, tm)
    jac = _dot(np.cross(du[..., 0, :], du[..., 1, :]), u)
    if np.any(jac > 0) and np.any(jac < 0):
        warnings.warn("Gauss map is not injective on the sampled grid; "
                      "the section is not graphical", stacklevel=2)
    if center is None:
        mean = u.reshape(-1, 3).mean(axis=0)
        norm = np.linalg.norm(mean)
        center = tuple(mean / norm) if norm > 1e-8 else (0.0, 0.0, 1.0)
    return LineSection(s_axis, t_axis, u, V, du, dV,
                       periodic=surface.periodic, center=center, source=cmap)


# -- complex points and the Keller-Maslov index -------------------------------

@dataclass
class ComplexPointRecord:
    s: float
    t: float
    direction: tuple
    defect_min: float
    isolated: bool
    winding: int = None
    index: float = None


def section_defect(section, center=None, normalize=True):
    """psi over the section grid (uses exact tangents when available)."""
    du, dV = section.tangents()
    ctr = center if center is not None else section.center
    psi = defect_psi(section.u, section.V, du[..., 0, :], dV[..., 0, :],
                     du[..., 1, :], dV[..., 1, :], ctr, normalize=normalize)
    return psi


def _psi_at(source, s, t, center):
    u, V, du, dV = source.eval(s, t)
    return defect_psi(u, V, du[..., 0, :], dV[..., 0, :],
                      du[..., 1, :], dV[..., 1, :], center)


def complex_point_scan(section, tol=None, degenerate_fraction=0.05,
                       refine_iters=4, loop_cells=4.0):
    """Zeros of the anti-complex defect with their integer windings.

    Returns records with the umbilic index i = winding / 2.  A section
    whose defect vanishes on a large fraction of samples (the zero
    section) is reported as a single non-isolated record.
    """
    psi = section_defect(section)
    mag = np.abs(psi)
    center = section.center
    if tol is None:
        # psi is computed on unit-normalised frames, so an absolute floor is
        # meaningful; it catches identically-complex sections (zero defect)
        tol = max(1e-6 * float(np.max(mag)), 1e-10)

    if np.mean(mag < tol) > degenerate_fraction:
        i, j = np.unravel_index(np.argmin(mag), mag.shape)
        return [ComplexPointRecord(float(section.s_axis[i]), float(section.t_axis[j]),
                                   tuple(section.u[i, j]), float(mag[i, j]),
                                   isolated=False)]

    ds = section.s_axis[1] - section.s_axis[0]
    dt = section.t_axis[1] - section.t_axis[0]
    source = section.source
    records = []
    from .umbilic_topology import _local_minima
    for i, j in _local_minima(mag, section.periodic):
        if mag[i, j] > 0.25 * np.median(mag):
            continue
        s_c, t_c = float(section.s_axis[i]), float(section.t_axis[j])
        if source is not None:
            s_c, t_c = _refine_zero(source, s_c, t_c, ds, dt, center, refine_iters)
            final = float(np.abs(_psi_at(source, s_c, t_c, center))[0])
        else:
            final = float(mag[i, j])
        if final >= tol:
            continue
        if any(abs(r.s - s_c) < 2 * ds and abs(r.t - t_c) < 2 * dt for r in records):
            continue
        u_here = (source.eval(s_c, t_c)[0][0] if source is not None
                  else section.u[i, j])
        rec = ComplexPointRecord(s_c, t_c, tuple(np.asarray(u_here, float)),
                                 final, isolated=True)
        if source is not None:
            rec.winding = _zero_winding(source, s_c, t_c, loop_cells * ds,
                                        loop_cells * dt, center)
            rec.index = rec.winding / 2.0
        records.append(rec)
    records.sort(key=lambda r: (r.s, r.t))
    return records


def _refine_zero(source, s_c, t_c, ds, dt, center, iters):
    span_s, span_t = ds, dt
    offs = np.linspace(-1.0, 1.0, 5)
    for _ in range(iters):
        sm, tm = np.meshgrid(s_c + offs * span_s, t_c + offs * span_t, indexing="ij")
        vals = np.abs(_psi_at(source, sm.ravel(), tm.ravel(), center)) ** 2
        x = (sm.ravel() - s_c) / span_s
        y = (tm.ravel() - t_c) / span_t
        basis = np.stack([np.ones_like(x), x, y, x * x, x * y, y * y], axis=1)
        coef, *_ = np.linalg.lstsq(basis, vals, rcond=None)
        hess = np.array([[2 * coef[3], coef[4]], [coef[4], 2 * coef[5]]])
        rhs = -np.array([coef[1], coef[2]])
        try:
            step = np.clip(np.linalg.solve(hess, rhs), -2.0, 2.0)
        except np.linalg.LinAlgError:
            step = np.zeros(2)
        s_c += step[0] * span_s
        t_c += step[1] * span_t
        span_s *= 0.25
        span_t *= 0.25
    return s_c, t_c


def _chart_orientation(u_loop, center):
    """+1/-1: orientation of the loop's projection to the direction chart.

    Windings are always reported for the boundary orientation induced by
    the direction sphere, so the Maslov values do not depend on the
    handedness of the surface parameterisation.
    """
    x, y = sphere_to_stereo(u_loop, center)
    area = 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)
    return 1.0 if area >= 0 else -1.0


def _zero_winding(source, s_c, t_c, rad_s, rad_t, center, n_loop=1024):
    phi = np.linspace(0.0, TWO_PI, n_loop, endpoint=False)
    ss = s_c + rad_s * np.cos(phi)
    tt = t_c + rad_t * np.sin(phi)
    psi = _psi_at(source, ss, tt, center)
    if np.min(np.abs(psi)) < 1e-12:
        raise UnreliableLoopError("winding loop passes through a defect zero")
    orient = _chart_orientation(source.eval(ss, tt)[0], center)
    total = orient * winding_total(np.ascontiguousarray(np.angle(psi)), TWO_PI)
    return int(round(total / TWO_PI))


def maslov_index(source, loop_s, loop_t, center, min_defect_ratio=1e-6):
    """Keller-Maslov index of a parameter loop on a Lagrangian section.

    mu = 2 x (winding of the defect psi along the loop, traversed with the
    orientation induced from the direction chart); also reports the
    enclosed umbilic index sum i = mu/4, the operator index mu + 2, and
    the unparameterised disc dimension mu - 1.
    """
    loop_s = np.asarray(loop_s, float)
    loop_t = np.asarray(loop_t, float)
    psi = _psi_at(source, loop_s, loop_t, center)
    mag = np.abs(psi)
    if np.min(mag) < min_defect_ratio * np.max(mag):
        raise UnreliableLoopError("loop passes too close to a complex point")
    orient = _chart_orientation(source.eval(loop_s, loop_t)[0], center)
    total = orient * winding_total(np.ascontiguousarray(np.angle(psi)), TWO_PI)
    half = orient * winding_total(np.ascontiguousarray(np.angle(psi[::2])), TWO_PI)
    if int(round(total / TWO_PI)) != int(round(half / TWO_PI)):
        raise UnreliableLoopError("winding is not resolved; densify the loop")
    w = int(round(total / TWO_PI))
    return {"mu": 2 * w, "index_sum": w / 2.0,
            "operator_index": 2 * w + 2, "unparameterized_dim": 2 * w - 1}


def invert_gauss_map(source, directions, section, iters=15, tol=1e-12):
    """Parameter preimages of direction-space points, for convex congruences.

    Seeds each Newton solve from the nearest sampled grid direction; the
    equations are the two components of n(s,t) - u against a fixed basis of
    the plane orthogonal to u.
    """
    directions = np.atleast_2d(np.asarray(directions, dtype=float))
    directions = directions / np.linalg.norm(directions, axis=1, keepdims=True)
    grid_u = section.u.reshape(-1, 3)
    sm, tm = np.meshgrid(section.s_axis, section.t_axis, indexing="ij")
    flat_s, flat_t = sm.ravel(), tm.ravel()
    out_s = np.empty(directions.shape[0])
    out_t = np.empty(directions.shape[0])
    for m, target in enumerate(directions):
        seed = int(np.argmax(grid_u @ target))
        s_c, t_c = float(flat_s[seed]), float(flat_t[seed])
        _, p, q = _complement_basis(target)
        for _ in range(iters):
            u, _, du, _ = source.eval(s_c, t_c)
            res = np.array([np.dot(p, u[0] - target), np.dot(q, u[0] - target)])
            if np.max(np.abs(res)) < tol:
                break
            jac = np.array([[np.dot(p, du[0, 0]), np.dot(p, du[0, 1])],
                            [np.dot(q, du[0, 0]), np.dot(q, du[0, 1])]])
            try:
                step = np.linalg.solve(jac, res)
            except np.linalg.LinAlgError:
                raise UnreliableLoopError(
                    "Gauss-map inversion hit a singular Jacobian")
            s_c -= step[0]
            t_c -= step[1]
        out_s[m], out_t[m] = s_c, t_c
    return out_s, out_t


# -- symplectic area -----------------------------------------------------------

def symplectic_area(disc, n_rad=48, n_ang=256):
    """(integral of omega over the disc, circulation of lambda = V.du).

    ``disc`` must provide eval(a, b) -> (u, V, du, dV) over polar
    parameters a in [0,1], b in [0,2pi); the two returns should agree by
    Stokes' theorem since omega = d(V.du).
    """
    from .quadrature import gauss_legendre, periodic_trapezoid
    ra, wa = gauss_legendre(0.0, 1.0, n_rad)
    tb, wb = periodic_trapezoid(0.0, TWO_PI, n_ang)
    rm, tm = np.meshgrid(ra, tb, indexing="ij")
    u, V, du, dV = disc.eval(rm, tm)
    om = omega_pair(du[..., 0, :], dV[..., 0, :], du[..., 1, :], dV[..., 1, :])
    two_form = float(np.einsum("ab,a,b->", om, wa, wb))
    ub, Vb, dub, dVb = disc.eval(np.ones_like(tb), tb)
    lam = potential_form(Vb, dub[..., 1, :])
    boundary = float(np.sum(lam * wb))
    return two_form, boundary


class SectionDisc:
    """Polar disc inside a section, mapped through surface parameters."""

    def __init__(self, source, s_center, t_center, rad_s, rad_t):
        self.source = source
        self.s_center, self.t_center = s_center, t_center
        self.rad_s, self.rad_t = rad_s, rad_t

    def eval(self, a, b):
        s = self.s_center + self.rad_s * a * np.cos(b)
        t = self.t_center + self.rad_t * a * np.sin(b)
        u, V, du, dV = self.source.eval(s, t)
        # chain rule to polar parameters
        ds = np.stack([self.rad_s * np.cos(b), -self.rad_s * a * np.sin(b)], axis=-1)
        dt = np.stack([self.rad_t * np.sin(b), self.rad_t * a * np.cos(b)], axis=-1)
        du_p = ds[..., :, None] * du[..., 0:1, :] + dt[..., :, None] * du[..., 1:2, :]
        dV_p = ds[..., :, None] * dV[..., 0:1, :] + dt[..., :, None] * dV[..., 1:2, :]
        return u, V, du_p, dV_p


class JetDisc:
    """Disc given by a jet-capable map (a, b) -> (u components, V components).

    The map must return unit directions and perpendicular feet; see
    ``random_jet_disc`` for a generic constructor.
    """

    def __init__(self, fn):
        self.fn = fn

    def eval(self, a, b):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        a2, b2 = np.broadcast_arrays(np.atleast_1d(a), np.atleast_1d(b))
        av, bv = jets.variables([a2.ravel(), b2.ravel()], order=1)
        u_c, v_c = self.fn(av, bv)
        shape = a2.shape

        def unpack(vec):
            vals = np.stack([np.broadcast_to(c.f, a2.ravel().shape) for c in vec],
                            axis=-1).reshape(shape + (3,))
            grads = np.stack([np.stack([np.broadcast_to(c.g[k], a2.ravel().shape)
                                        for c in vec], axis=-1)
                              for k in range(2)], axis=-2)
            return vals, grads.reshape(shape + (2, 3))

        u, du = unpack(u_c)
        V, dV = unpack(v_c)
        return u, V, du, dV


def random_jet_disc(rng, amplitude=0.5):
    """Smooth random disc in line space: u from a trig map, V projected."""
    cu = rng.normal(size=(3, 4)) * amplitude
    cv = rng.normal(size=(3, 4)) * amplitude

    def fn(a, b):
        sa = [1.0 + 0.3 * a * jets.cos(b), 0.4 * a * jets.sin(b), a * a]
        raw_u = [cu[i, 0] + cu[i, 1] * sa[0] + cu[i, 2] * sa[1] + cu[i, 3] * sa[2]
                 for i in range(3)]
        nrm = jets.sqrt(_dot3(raw_u, raw_u))
        u = [c / nrm for c in raw_u]
        raw_v = [cv[i, 0] * sa[1] + cv[i, 1] * sa[0] + cv[i, 2] * sa[2] + cv[i, 3]
                 for i in range(3)]
        uv = _dot3(u, raw_v)
        V = [raw_v[i] - uv * u[i] for i in range(3)]
        return u, V

    return JetDisc(fn)


# -- holomorphic twist ----------------------------------------------------------

class TwistedSection:
    """Section plus the rotational fiber twist V -> V + s (u x axis).

    The added field is the real part of a linear holomorphic vertical
    section vanishing at the axis direction: it keeps every tangency
    constraint, changes no complex point, and for strength s > 0 its
    metric contribution is positive-definite on the open hemisphere around
    ``axis``, degenerating exactly at the equator.
    """

    def __init__(self, source, strength, axis):
        self.source = source
        self.strength = float(strength)
        axis = np.asarray(axis, dtype=float)
        self.axis = axis / np.linalg.norm(axis)

    def eval(self, s, t):
        u, V, du, dV = self.source.eval(s, t)
        sgn = self.strength
        V = V + sgn * np.cross(u, self.axis)
        dV = dV + sgn * np.cross(du, np.broadcast_to(self.axis, du.shape))
        return u, V, du, dV


def holomorphic_twist(section, strength, center):
    """Twist a sampled LineSection fiberwise about `center`.

    Requires the sampled directions to stay inside the open hemisphere
    around the center (the largest domain the twist can positivise).
    """
    axis = np.asarray(center, dtype=float)
    axis = axis / np.linalg.norm(axis)
    inner = np.einsum("ijk,k->ij", section.u, axis)
    if np.any(inner <= 0.0):
        raise ChartDomainError(
            "section leaves the open hemisphere around the twist center")
    du, dV = section.tangents()
    twisted = LineSection(
        section.s_axis.copy(), section.t_axis.copy(),
        section.u.copy(), section.V + strength * np.cross(section.u, axis),
        du.copy(), dV + strength * np.cross(du, np.broadcast_to(axis, du.shape)),
        periodic=section.periodic, center=tuple(axis),
        source=None if section.source is None
        else TwistedSection(section.source, strength, axis))
    return twisted


def section_gram(section):
    """Induced 2x2 Gram matrices of the section tangent planes, (ns,nt,2,2)."""
    du, dV = section.tangents()
    g = np.empty(section.u.shape[:2] + (2, 2))
    for a in range(2):
        for b in range(2):
            g[..., a, b] = metric_pair(section.u, section.V,
                                       du[..., a, :], dV[..., a, :],
                                       du[..., b, :], dV[..., b, :])
    return g
