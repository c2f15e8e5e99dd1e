"""Tensor calculus on three-dimensional coordinate charts.

Provides smooth metric fields with exact derivatives (forward-mode jets),
Christoffel symbols, pointwise tensor norms and L2 distances between
metrics.  Built-in families include the flat metric, the round 3-sphere in
Hopf coordinates (rho, theta1, theta2), and its one-parameter off-diagonal
deformation

    g = d rho^2 + sin^2(rho) d theta1^2 + cos^2(rho) d theta2^2
        + 2 eps * Psi(rho) * sin(rho) cos(rho) d theta1 d theta2,

which stays Riemannian for 0 <= eps < 1 and, with the bump profile Psi
localised around rho = pi/4, differs from the round metric by an L2
amount bounded by 16 pi^2 eps^3.
"""

from dataclasses import dataclass, field

import numpy as np

from . import jets, quadrature
from .errors import ChartDomainError, MetricParameterError
from .exprgrammar import compile_expression
from .kernels import tensor_norm_sq_batch

DOMAIN_CLIP = 1e-6  # stay off Hopf coordinate degeneracies at rho = 0, pi/2


@dataclass(frozen=True)
class Chart:
    name: str
    coords: tuple
    lower: tuple
    upper: tuple
    periodic: tuple

    def contains(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        ok = np.ones(pts.shape[0], dtype=bool)
        for k in range(3):
            if self.periodic[k]:
                continue
            lo, hi = self.lower[k], self.upper[k]
            if np.isfinite(lo):
                ok &= pts[:, k] > lo
            if np.isfinite(hi):
                ok &= pts[:, k] < hi
        return ok


HOPF_CHART = Chart("hopf", ("rho", "theta1", "theta2"),
                   (0.0, 0.0, 0.0), (np.pi / 2, 2 * np.pi, 2 * np.pi),
                   (False, True, True))
CARTESIAN_CHART = Chart("cartesian", ("x", "y", "z"),
                        (-np.inf,) * 3, (np.inf,) * 3, (False,) * 3)


@dataclass
class BumpProfile:
    """Smooth cutoff around rho = pi/4: one on the inner band, zero outside.

    Transition pieces use the classic exp(-1/x) smooth step, which glues
    C-infinity to the constant pieces at |rho - pi/4| = eps/4 and eps/2.
    """

    eps: float

    def __post_init__(self):
        if not (0.0 < self.eps < 1.0):
            raise MetricParameterError(f"bump width eps={self.eps} not in (0, 1)")

    def __call__(self, rho):
        r = rho - np.pi / 4
        r = jets.sqrt(r * r + 1e-120)  # smooth |r| away from the flat core
        x = (0.5 * self.eps - r) / (0.25 * self.eps)  # 1 at r=eps/4, 0 at r=eps/2
        inner = _value(r) <= 0.25 * self.eps
        outer = _value(r) >= 0.5 * self.eps
        return jets.where(inner, 1.0, jets.where(outer, 0.0, smoothstep(x)))


def _value(x):
    return x.f if isinstance(x, jets.Jet) else np.asarray(x)


def _glue(x):
    # exp(-1/x) for x>0, extended by 0; evaluated safely on jets
    pos = _value(x) > 0.0
    safe = jets.where(pos, x, 1.0)
    return jets.where(pos, jets.exp(-1.0 / safe), 0.0)


def smoothstep(x):
    """C-infinity monotone step: 0 for x<=0, 1 for x>=1."""
    clipped = jets.where(_value(x) < 0.0, 0.0, jets.where(_value(x) > 1.0, 1.0, x))
    a = _glue(clipped)
    b = _glue(1.0 - clipped)
    return a / (a + b)


def bump_profile(rho, bump):
    """Evaluate the cutoff profile at rho (scalar or array)."""
    return _value(bump(np.asarray(rho, dtype=float)))


@dataclass
class MetricField:
    """Symmetric 2-tensor field on a chart, with exact derivatives.

    ``components`` maps three coordinate quantities (ndarrays or jets) to a
    3x3 nested list; entries may be plain constants.  ``constant`` marks
    position-independent fields (flat metric), letting callers skip
    Christoffel terms.
    """

    name: str
    chart: Chart
    components: callable
    params: dict = field(default_factory=dict)
    constant: bool = False

    def _components_at(self, c0, c1, c2):
        rows = self.components(c0, c1, c2)
        return rows

    def matrix(self, pts):
        """Metric components g_ij at points, shape (N,3,3)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        rows = self._components_at(pts[:, 0], pts[:, 1], pts[:, 2])
        n = pts.shape[0]
        out = np.empty((n, 3, 3))
        for i in range(3):
            for j in range(3):
                out[:, i, j] = np.broadcast_to(_value(rows[i][j]), (n,))
        return out

    def matrix_and_partials(self, pts):
        """(g_ij, d_k g_ij) with exact first partials, shapes (N,3,3), (N,3,3,3)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        n = pts.shape[0]
        if self.constant:
            return self.matrix(pts), np.zeros((n, 3, 3, 3))
        c = jets.variables([pts[:, 0], pts[:, 1], pts[:, 2]], order=1)
        rows = self._components_at(*c)
        g = np.empty((n, 3, 3))
        dg = np.empty((n, 3, 3, 3))
        for i in range(3):
            for j in range(3):
                entry = rows[i][j]
                if isinstance(entry, jets.Jet):
                    g[:, i, j] = np.broadcast_to(entry.f, (n,))
                    for k in range(3):
                        dg[:, k, i, j] = np.broadcast_to(entry.g[k], (n,))
                else:
                    g[:, i, j] = np.broadcast_to(np.asarray(entry, dtype=float), (n,))
                    dg[:, :, i, j] = 0.0
        return g, dg

    def check_domain(self, pts):
        ok = self.chart.contains(pts)
        if not np.all(ok):
            bad = np.atleast_2d(np.asarray(pts, dtype=float))[~ok][0]
            raise ChartDomainError(
                f"point {tuple(bad)} outside {self.chart.name} chart domain")


# -- built-in families -----------------------------------------------------

def _flat_components(x, y, z):
    return [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]


def _hopf_components(eps=0.0, bump=None):
    def components(rho, th1, th2):
        s, c = jets.sin(rho), jets.cos(rho)
        off = eps * s * c
        if bump is not None:
            off = off * bump(rho)
        return [[1.0, 0.0, 0.0],
                [0.0, s * s, off],
                [0.0, off, c * c]]
    return components


def metric_by_name(name, **params):
    """Look up a metric family by identifier.

    Families: ``flat-r3``, ``round-s3``, ``hopf-eps`` (param eps),
    ``hopf-eps-bumped`` (param eps).
    """
    if name == "flat-r3":
        return MetricField("flat-r3", CARTESIAN_CHART, _flat_components, constant=True)
    if name == "round-s3":
        return MetricField("round-s3", HOPF_CHART, _hopf_components(eps=0.0))
    if name in ("hopf-eps", "hopf-eps-bumped"):
        eps = float(params.get("eps", 0.0))
        if not (0.0 <= eps < 1.0):
            raise MetricParameterError(
                f"eps={eps} outside [0, 1); the deformed metric degenerates at eps=1")
        bump = None
        if name == "hopf-eps-bumped":
            if eps == 0.0:
                return MetricField(name, HOPF_CHART, _hopf_components(0.0), {"eps": 0.0})
            bump = BumpProfile(eps)
        return MetricField(name, HOPF_CHART, _hopf_components(eps, bump), {"eps": eps})
    raise MetricParameterError(f"unknown metric family {name!r}")


_CHARTS = {"hopf": HOPF_CHART, "cartesian": CARTESIAN_CHART}
_COMPONENT_KEYS = [("11", 0, 0), ("12", 0, 1), ("13", 0, 2),
                   ("22", 1, 1), ("23", 1, 2), ("33", 2, 2)]


def metric_from_expressions(chart_name, entries, name="custom"):
    """Build a metric from six component expressions (upper triangle).

    ``entries`` maps keys g11..g33 to expression strings over the chart
    coordinates (rho, theta1, theta2 or x, y, z).
    """
    chart = _CHARTS.get(chart_name)
    if chart is None:
        raise MetricParameterError(f"unknown chart {chart_name!r}; use hopf or cartesian")
    compiled = {}
    for key, i, j in _COMPONENT_KEYS:
        text = entries.get(f"g{key}", "0")
        compiled[(i, j)] = compile_expression(text, chart.coords)

    names = chart.coords

    def components(c0, c1, c2):
        env = {names[0]: c0, names[1]: c1, names[2]: c2}
        rows = [[None] * 3 for _ in range(3)]
        for (i, j), fn in compiled.items():
            rows[i][j] = fn(**env)
            rows[j][i] = rows[i][j]
        return rows

    return MetricField(name, chart, components)


def load_metric(path):
    """Read a metric from a key-value file: chart plus g11..g33 expressions.

    Example file:
        chart = hopf
        g11 = 1
        g22 = sin(rho)^2
        g33 = cos(rho)^2
        g23 = 0.3*sin(rho)*cos(rho)
    """
    from . import kvdoc
    doc = kvdoc.load(path)
    chart_name = doc.pop("chart", "cartesian")
    valid = {f"g{key}" for key, _, _ in _COMPONENT_KEYS}
    unknown = set(doc) - valid
    if unknown:
        raise MetricParameterError(
            f"unknown metric file keys {sorted(unknown)}; valid: "
            f"chart, {sorted(valid)}")
    entries = {k: str(v) for k, v in doc.items()}
    return metric_from_expressions(chart_name, entries, name=str(path))


# -- point operations -------------------------------------------------------

def eval_metric(metric, point):
    """g_ij at a single chart point, with domain validation."""
    pts = np.atleast_2d(np.asarray(point, dtype=float))
    metric.check_domain(pts)
    g = metric.matrix(pts)
    return g[0] if np.asarray(point).ndim == 1 else g


def christoffel(metric, point):
    """Christoffel symbols Gamma^k_ij, shape (...,3,3,3) indexed [k,i,j].

    Gamma^k_ij = 1/2 g^{kl} (d_i g_jl + d_j g_il - d_l g_ij).
    """
    pts = np.atleast_2d(np.asarray(point, dtype=float))
    g, dg = metric.matrix_and_partials(pts)
    ginv = np.linalg.inv(g)
    # dg[:, k, i, j] = d_k g_ij; build term[n,i,j,l] = d_i g_jl + d_j g_il - d_l g_ij
    term = dg + dg.transpose(0, 2, 1, 3) - dg.transpose(0, 2, 3, 1)
    gamma = 0.5 * np.einsum("nkl,nijl->nkij", ginv, term)
    return gamma[0] if np.asarray(point).ndim == 1 else gamma


def tensor_norm_sq(delta, background_inv):
    """|delta|^2 = b^{ik} b^{jl} delta_ij delta_kl, batched."""
    return tensor_norm_sq_batch(np.ascontiguousarray(background_inv),
                                np.ascontiguousarray(delta))


def _default_domain(chart):
    lo = list(chart.lower)
    hi = list(chart.upper)
    for k in range(3):
        if not chart.periodic[k]:
            lo[k] += DOMAIN_CLIP
            hi[k] -= DOMAIN_CLIP
    return list(zip(lo, hi))


def l2_metric_distance(g_a, g_b, background, domain=None, grid=(64, 64, 64),
                       gl_order=4, chunk=1 << 17):
    """Squared L2 distance 2 * integral of |gA - gB|^2 dV over the chart.

    The pointwise norm raises indices with ``background`` and dV is the
    background volume form.  Periodic axes use the trapezoid rule,
    non-periodic axes composite Gauss-Legendre with ``gl_order`` nodes per
    panel.
    """
    if g_a.chart.name != g_b.chart.name or g_a.chart.name != background.chart.name:
        raise ChartDomainError("metrics live on different charts")
    chart = background.chart
    if domain is None:
        domain = _default_domain(chart)
    rules = [quadrature.axis_rule(domain[k][0], domain[k][1], grid[k],
                                  chart.periodic[k], gl_order)
             for k in range(3)]
    coords, weights = quadrature.tensor_nodes(rules)
    pts = np.stack(coords, axis=1)
    total = 0.0
    for start in range(0, pts.shape[0], chunk):
        block = pts[start:start + chunk]
        wb = weights[start:start + chunk]
        gb = background.matrix(block)
        delta = g_a.matrix(block) - g_b.matrix(block)
        norm_sq = tensor_norm_sq(delta, np.linalg.inv(gb))
        dvol = np.sqrt(np.linalg.det(gb))
        total += float(np.sum(norm_sq * dvol * wb))
    return 2.0 * total
