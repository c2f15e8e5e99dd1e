"""Umbilic points: detection, half-integer indices, and bound audits.

Umbilics are zeros of the principal-curvature gap.  The scan works on the
smooth squared gap (k1-k2)^2 = trace^2 - 4 det of the shape operator, so
candidate minima refine cleanly by iterated quadratic fits even though
|k1-k2| itself is conical at a zero.  Indices come from the winding of the
principal-direction line field (an angle modulo pi) around isolating
loops.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import UnreliableLoopError
from .kernels import winding_total
from .surface_geom import fundamental_forms

TWO_PI = 2.0 * np.pi


@dataclass
class UmbilicRecord:
    s: float
    t: float
    chart_position: tuple
    disc_min: float
    isolated: bool
    index: float = None       # half-integer winding, None until computed
    index_num: int = None     # 2 * index as an exact integer
    ambiguous: bool = False


def principal_angles(surface, metric, s, t):
    """Angle (mod pi) of the k1 principal direction in parameter coordinates."""
    rep = fundamental_forms(surface, metric, np.asarray(s, float), np.asarray(t, float))
    first, second = np.atleast_3d(rep.first), np.atleast_3d(rep.second)
    a, b, c = first[..., 0, 0], first[..., 0, 1], first[..., 1, 1]
    det_i = a * c - b * b
    s00 = (c * second[..., 0, 0] - b * second[..., 0, 1]) / det_i
    s01 = (c * second[..., 0, 1] - b * second[..., 1, 1]) / det_i
    s10 = (a * second[..., 0, 1] - b * second[..., 0, 0]) / det_i
    s11 = (a * second[..., 1, 1] - b * second[..., 0, 1]) / det_i
    k1 = np.atleast_1d(rep.k1)
    # two kernel vectors of (S - k1); pick the better conditioned one
    w_a = np.stack([-s01, s00 - k1], axis=-1)
    w_b = np.stack([s11 - k1, -s10], axis=-1)
    use_b = np.einsum("...i,...i->...", w_b, w_b) > np.einsum("...i,...i->...", w_a, w_a)
    w = np.where(use_b[..., None], w_b, w_a)
    return np.mod(np.arctan2(w[..., 1], w[..., 0]), np.pi)


def line_field_winding(angles):
    """Total rotation of a projective angle sequence, divided by 2*pi.

    Returns the half-integer index of the line field for a closed loop of
    samples (continuation stays within +-pi/2 between samples).
    """
    total = winding_total(np.ascontiguousarray(angles, dtype=float), np.pi)
    return total / TWO_PI


def _cells(surface, grid):
    (s0, s1), (t0, t1) = surface.domain
    ns, nt = grid
    ds, dt = (s1 - s0) / ns, (t1 - t0) / nt
    ss = s0 + ds * (np.arange(ns) + 0.5)
    tt = t0 + dt * (np.arange(nt) + 0.5)
    return ss, tt, ds, dt


def _grid_eval(surface, metric, ss, tt, chunk=1 << 16):
    sm, tm = np.meshgrid(ss, tt, indexing="ij")
    flat_s, flat_t = sm.ravel(), tm.ravel()
    disc_sq = np.empty(flat_s.shape)
    kmax = 0.0
    for start in range(0, flat_s.shape[0], chunk):
        rep = fundamental_forms(surface, metric, flat_s[start:start + chunk],
                                tt_block := flat_t[start:start + chunk])
        disc_sq[start:start + len(tt_block)] = rep.disc_sq
        kmax = max(kmax, float(np.max(np.abs(rep.k1))), float(np.max(np.abs(rep.k2))))
    return disc_sq.reshape(len(ss), len(tt)), kmax


def _local_minima(values, periodic):
    """Cells not exceeded by any of their 8 neighbours."""
    is_min = np.ones(values.shape, dtype=bool)
    for axis_shift in ((-1, 0), (1, 0), (0, -1), (0, 1), (-1, -1), (-1, 1), (1, -1), (1, 1)):
        shifted = values
        valid = np.ones(values.shape, dtype=bool)
        for axis, sh in enumerate(axis_shift):
            if sh == 0:
                continue
            shifted = np.roll(shifted, sh, axis=axis)
            if not periodic[axis]:
                idx = [slice(None)] * 2
                idx[axis] = 0 if sh == 1 else -1
                valid[tuple(idx)] = False
        is_min &= ~valid | (values <= shifted)
    return np.argwhere(is_min)


def _fit_quadratic_min(surface, metric, s_c, t_c, span_s, span_t):
    """One refinement step: 5x5 stencil quadratic fit of the squared gap."""
    offs = np.linspace(-1.0, 1.0, 5)
    sm, tm = np.meshgrid(s_c + offs * span_s, t_c + offs * span_t, indexing="ij")
    rep = fundamental_forms(surface, metric, sm.ravel(), tm.ravel())
    x = (sm.ravel() - s_c) / span_s
    y = (tm.ravel() - t_c) / span_t
    basis = np.stack([np.ones_like(x), x, y, x * x, x * y, y * y], axis=1)
    coef, *_ = np.linalg.lstsq(basis, rep.disc_sq, rcond=None)
    fitted = basis @ coef
    scale = float(np.max(rep.disc_sq) - np.min(rep.disc_sq))
    residual = float(np.max(np.abs(fitted - rep.disc_sq)))
    hess = np.array([[2 * coef[3], coef[4]], [coef[4], 2 * coef[5]]])
    rhs = -np.array([coef[1], coef[2]])
    try:
        step = np.linalg.solve(hess, rhs)
    except np.linalg.LinAlgError:
        step = np.zeros(2)
    if not np.all(np.isfinite(step)):
        step = np.zeros(2)
    step = np.clip(step, -2.0, 2.0)
    ok = scale <= 0 or residual <= 0.1 * scale
    return s_c + step[0] * span_s, t_c + step[1] * span_t, ok


def umbilic_scan(surface, metric, grid=(512, 384), tol=None, refine_iters=4,
                 degenerate_fraction=0.05):
    """Locate isolated umbilics as refined minima of the curvature gap.

    Returns records sorted by parameter location.  A surface whose gap
    vanishes on a large fraction of the grid (a round sphere) yields a
    single record flagged non-isolated.
    """
    ss, tt, ds, dt = _cells(surface, grid)
    disc_sq, kmax = _grid_eval(surface, metric, ss, tt)
    if tol is None:
        tol = 1e-6 * max(kmax, 1e-30)
    tol_sq = tol * tol

    if np.mean(disc_sq < tol_sq) > degenerate_fraction:
        i, j = np.unravel_index(np.argmin(disc_sq), disc_sq.shape)
        rep = fundamental_forms(surface, metric, ss[i], tt[j])
        return [UmbilicRecord(float(ss[i]), float(tt[j]),
                              tuple(np.asarray(rep.point, float)),
                              float(rep.disc), isolated=False)]

    candidates = []
    for i, j in _local_minima(disc_sq, surface.periodic):
        s_c, t_c = float(ss[i]), float(tt[j])
        span_s, span_t = ds, dt
        ok_fit = True
        for _ in range(refine_iters):
            s_c, t_c, ok_fit = _fit_quadratic_min(surface, metric, s_c, t_c, span_s, span_t)
            s_c, t_c = _clamp_params(surface, s_c, t_c)
            span_s *= 0.25
            span_t *= 0.25
        rep = fundamental_forms(surface, metric, s_c, t_c)
        if rep.disc < tol and ok_fit:
            candidates.append((s_c, t_c, float(rep.disc), float(ss[i]), float(tt[j])))

    records = _merge_candidates(surface, metric, candidates, ds, dt, tol)
    records.sort(key=lambda r: (r.s, r.t))
    return records


def _clamp_params(surface, s_c, t_c):
    (s0, s1), (t0, t1) = surface.domain
    if surface.periodic[0]:
        s_c = s0 + (s_c - s0) % (s1 - s0)
    else:
        s_c = min(max(s_c, s0 + 1e-9 * (s1 - s0)), s1 - 1e-9 * (s1 - s0))
    if surface.periodic[1]:
        t_c = t0 + (t_c - t0) % (t1 - t0)
    else:
        t_c = min(max(t_c, t0 + 1e-9 * (t1 - t0)), t1 - 1e-9 * (t1 - t0))
    return s_c, t_c


def _param_distance(surface, p, q):
    (s0, s1), (t0, t1) = surface.domain
    dsp = abs(p[0] - q[0])
    if surface.periodic[0]:
        dsp = min(dsp, (s1 - s0) - dsp)
    dtp = abs(p[1] - q[1])
    if surface.periodic[1]:
        dtp = min(dtp, (t1 - t0) - dtp)
    return dsp, dtp


def _merge_candidates(surface, metric, candidates, ds, dt, tol):
    merged = []
    for cand in sorted(candidates, key=lambda c: c[2]):
        s_c, t_c, disc, s_seed, t_seed = cand
        clash = None
        for rec in merged:
            dsp, dtp = _param_distance(surface, (s_c, t_c), (rec.s, rec.t))
            if dsp < 2 * ds and dtp < 2 * dt:
                clash = rec
                break
        if clash is None:
            rep = fundamental_forms(surface, metric, s_c, t_c)
            merged.append(UmbilicRecord(
                s_c, t_c, tuple(np.asarray(rep.point, float)), disc,
                isolated=_is_isolated(surface, metric, s_c, t_c, ds, dt, tol)))
        else:
            seed_gap = _param_distance(surface, (s_seed, t_seed), (clash.s, clash.t))
            if seed_gap[0] > 2 * ds or seed_gap[1] > 2 * dt:
                clash.ambiguous = True
                warnings.warn(
                    "scan resolution too coarse to separate umbilic candidates; "
                    "records merged", stacklevel=3)
    return merged


def _is_isolated(surface, metric, s_c, t_c, ds, dt, tol, n_ring=64):
    phi = np.linspace(0.0, TWO_PI, n_ring, endpoint=False)
    rep = fundamental_forms(surface, metric,
                            s_c + 2 * ds * np.cos(phi), t_c + 2 * dt * np.sin(phi))
    return bool(np.min(rep.disc) > tol)


def umbilic_index(surface, metric, record, loop_radius, n_loop=1024, _depth=0):
    """Half-integer index of an isolated umbilic from a circular loop.

    ``loop_radius`` is in parameter units; the loop must stay inside the
    isolating annulus.  The angular resolution is doubled until the rounded
    index is stable.
    """
    if not record.isolated:
        raise UnreliableLoopError("cannot assign an index to a non-isolated umbilic")
    phi = np.linspace(0.0, TWO_PI, n_loop, endpoint=False)
    ss = record.s + loop_radius * np.cos(phi)
    tt = record.t + loop_radius * np.sin(phi)
    rep = fundamental_forms(surface, metric, ss, tt)
    if np.min(rep.disc) <= 10.0 * max(record.disc_min, 1e-14):
        raise UnreliableLoopError(
            "loop touches a near-umbilic region; shrink or grow loop_radius")
    angles = principal_angles(surface, metric, ss, tt)
    index = line_field_winding(angles)
    index2 = line_field_winding(principal_angles(
        surface, metric,
        record.s + loop_radius * np.cos(phi2 := np.linspace(0, TWO_PI, 2 * n_loop, endpoint=False)),
        record.t + loop_radius * np.sin(phi2)))
    if round(2 * index) != round(2 * index2):
        if _depth >= 3:
            raise UnreliableLoopError("winding failed to stabilise under refinement")
        return umbilic_index(surface, metric, record, loop_radius,
                             n_loop=4 * n_loop, _depth=_depth + 1)
    return round(2 * index) / 2.0


def attach_indices(surface, metric, records, grid=(512, 384), loop_cells=4.0):
    """Compute indices for all isolated records in place."""
    (s0, s1), (t0, t1) = surface.domain
    ds = (s1 - s0) / grid[0]
    dt = (t1 - t0) / grid[1]
    radius = loop_cells * max(ds, dt)
    for rec in records:
        if rec.isolated:
            rec.index = umbilic_index(surface, metric, rec, radius)
            rec.index_num = int(round(2 * rec.index))
    return records


_EULER = {"sphere": 2, "torus": 0}


def conjecture_audit(surface, metric, grid=(512, 384), tol=None):
    """Scan, index, and check the classical umbilic statements.

    Reports umbilic count (>= 2 on convex spheres), the Hamburger bound
    (index <= 1), the local bound (index < 2), and the line-field
    Poincare-Hopf sum against the Euler characteristic.
    """
    records = umbilic_scan(surface, metric, grid=grid, tol=tol)
    non_isolated = any(not r.isolated for r in records)
    isolated = [r for r in records if r.isolated]
    attach_indices(surface, metric, isolated, grid=grid)
    euler = _EULER.get(surface.topology)
    report = {
        "surface": surface.name,
        "umbilic_count": len(isolated),
        "non_isolated_present": non_isolated,
        "caveat": "audit restricted to isolated umbilics" if non_isolated else "",
        "records": records,
    }
    if non_isolated and not isolated:
        report.update({"count_at_least_two": None, "max_index": None,
                       "hamburger_ok": None, "local_bound_ok": None,
                       "index_sum": None, "poincare_hopf_ok": None,
                       "euler_characteristic": euler})
        return report
    indices = [r.index for r in isolated]
    idx_sum = float(sum(indices)) if indices else 0.0
    max_idx = max(indices) if indices else None
    report.update({
        "count_at_least_two": len(isolated) >= 2,
        "max_index": max_idx,
        "hamburger_ok": (max_idx is None) or (max_idx <= 1.0),
        "local_bound_ok": (max_idx is None) or (max_idx < 2.0),
        "index_sum": idx_sum,
        "euler_characteristic": euler,
        "poincare_hopf_ok": None if euler is None else bool(abs(idx_sum - euler) < 1e-12),
    })
    return report
