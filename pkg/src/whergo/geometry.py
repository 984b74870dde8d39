"""Metric scalars from M(rho, v), ergosurface curves and D = 0 tracing."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .catalog import RationalMatrixOmega, compose_monodromy
from .engine import _d_with_scale, grid_D_2x2
from .errors import NoCurveFound, NonPhysicalM, NoRealSolution, OutOfChart
from .spectral import (
    SpectralPoint,
    build_partition,
    weyl_from_prolate_4d,
    weyl_from_prolate_5d,
)

REALITY_REL = 1e-9


def _realise(M, rel: float = REALITY_REL) -> np.ndarray:
    """Drop numerically-zero imaginary parts; reject genuinely complex input."""
    M = np.asarray(M, dtype=complex)
    scale = max(1.0, float(np.max(np.abs(M))))
    if np.max(np.abs(M.imag)) > rel * scale:
        raise NonPhysicalM(
            f"imaginary part {np.max(np.abs(M.imag)):.2e} exceeds {rel:.0e} * scale")
    return M.real.copy()


@dataclass(frozen=True)
class MetricScalars4D:
    """Norm factor Delta, twist potential Btilde and g_tt (= -lam Delta)."""

    Delta: float
    Btilde: float
    g_tt: float

    def rebuild_M(self) -> np.ndarray:
        d, b = self.Delta, self.Btilde
        return np.array([[d + b * b / d, b / d], [b / d, 1.0 / d]])


@dataclass(frozen=True)
class MetricScalars5D:
    Sigma1: float
    Sigma2: float
    Sigma3: float
    chi1: float
    chi2: float
    chi3: float
    g_tt: float

    def rebuild_M(self) -> np.ndarray:
        e1 = np.exp(2.0 * self.Sigma1)
        e2 = np.exp(2.0 * self.Sigma2)
        e3 = np.exp(2.0 * self.Sigma3)
        c1, c2, c3 = self.chi1, self.chi2, self.chi3
        return np.array([
            [e1, e1 * c2, e1 * c3],
            [-e1 * c2, -e1 * c2 * c2 + e2, -e1 * c2 * c3 + e2 * c1],
            [e1 * c3, e1 * c2 * c3 - e2 * c1, -e2 * c1 * c1 + e1 * c3 * c3 + e3],
        ])


def extract_4d(M, lam: int = 1) -> MetricScalars4D:
    """Invert the 2x2 coset form: Delta = 1/M22, Btilde = M12/M22."""
    M = _realise(M)
    if M.shape != (2, 2):
        raise ValueError("2x2 matrix required")
    if M[1, 1] <= 0.0:
        raise NonPhysicalM(f"M22 = {M[1, 1]} must be positive")
    delta = 1.0 / M[1, 1]
    btilde = M[0, 1] / M[1, 1]
    return MetricScalars4D(delta, btilde, -lam * delta)


def extract_5d(M) -> MetricScalars5D:
    """Invert the 3x3 coset form (eta = diag(1, -1, 1)) into Sigma_i, chi_i."""
    M = _realise(M)
    if M.shape != (3, 3):
        raise ValueError("3x3 matrix required")
    if M[0, 0] <= 0.0:
        raise NonPhysicalM(f"M11 = {M[0, 0]} must be positive")
    e1 = M[0, 0]
    chi2 = M[0, 1] / e1
    chi3 = M[0, 2] / e1
    e2 = M[1, 1] + e1 * chi2 * chi2
    if e2 <= 0.0:
        raise NonPhysicalM(f"exp(2 Sigma2) = {e2} must be positive")
    chi1 = (M[1, 2] + e1 * chi2 * chi3) / e2
    e3 = M[2, 2] + e2 * chi1 * chi1 - e1 * chi3 * chi3
    if e3 <= 0.0:
        raise NonPhysicalM(f"exp(2 Sigma3) = {e3} must be positive")
    g_tt = -e3 + e2 * chi1 * chi1
    return MetricScalars5D(0.5 * np.log(e1), 0.5 * np.log(e2), 0.5 * np.log(e3),
                           chi1, chi2, chi3, g_tt)


# ---------------------------------------------------------------------------
# closed-form failure curves / ergosurfaces (prolate chart)
# ---------------------------------------------------------------------------


def ergosurface_closed_form(model_id: str, params: dict, y: float) -> float:
    """u(y) of the factorisation-failure curve for the built-in models.

    "kerr" covers the standard contour and its full swap (the ergosurface);
    "kerr-alt" the two mixed contour choices; "mp5d" the Myers-Perry
    ergosurface line; "mvc5d" the failure curve that is not an ergosurface.
    """
    if not abs(y) < 1.0:
        raise NoRealSolution(f"|y| = {abs(y)} must be < 1")
    if model_id == "kerr":
        m, a = params["m"], params["a"]
        val = m * m - a * a * y * y
        if val <= 0.0:
            raise NoRealSolution("m^2 - a^2 y^2 <= 0")
        return float(np.sqrt(val))
    if model_id == "kerr-alt":
        m, a = params["m"], params["a"]
        if a == 0.0:
            raise NoRealSolution("alternate contour curve undefined at a = 0")
        c2 = m * m - a * a
        val = m * m - c2 * y * y
        if val <= 0.0:
            raise NoRealSolution("m^2 - c^2 y^2 <= 0")
        return float(np.sqrt(c2 * val) / a)
    if model_id == "mp5d":
        m, a = params["m"], params["a"]
        L = a * a / m
        if L >= 2.0:
            raise NoRealSolution("L = a^2/m must lie in [0, 2)")
        return float((2.0 - L * y) / (2.0 - L))
    if model_id == "mvc5d":
        m, a = params["m"], params["a"]
        al = (2.0 * m - a * a) / 4.0
        val = y * y + (m / (2.0 * al)) * (1.0 - y * y)
        if val <= 0.0:
            raise NoRealSolution("curve argument non-positive")
        return float(np.sqrt(val))
    raise NoRealSolution(f"no closed-form curve for model {model_id!r}")


def closed_form_curve_weyl(model_id: str, params: dict, ys) -> np.ndarray:
    """Sample the closed-form curve into Weyl coordinates (rho, v)."""
    pts = []
    for y in ys:
        u = ergosurface_closed_form(model_id, params, float(y))
        if model_id in ("kerr", "kerr-alt"):
            c = np.sqrt(params["m"] ** 2 - params["a"] ** 2)
            rho, v = weyl_from_prolate_4d(u, float(y), c)
        else:
            al = (2.0 * params["m"] - params["a"] ** 2) / 4.0
            rho, v = weyl_from_prolate_5d(u, float(y), al)
        pts.append((rho, v))
    return np.array(pts)


# ---------------------------------------------------------------------------
# Boyer-Lindquist / spherical maps and g_tt oracles
# ---------------------------------------------------------------------------


def bl_from_prolate_4d(u: float, y: float, m: float) -> tuple[float, float]:
    """u = r - m, y = cos(theta)."""
    if not (-1.0 <= y <= 1.0):
        raise OutOfChart(f"y = {y} outside [-1, 1]")
    return u + m, float(np.arccos(y))


def spherical_from_prolate_5d(u: float, y: float, alpha: float) -> tuple[float, float]:
    """r^2 = 2 alpha (u + 1), 2 cos^2(theta) = y + 1."""
    if u < -1.0 or not (-1.0 <= y <= 1.0):
        raise OutOfChart(f"(u, y) = ({u}, {y}) outside chart")
    return float(np.sqrt(2.0 * alpha * (u + 1.0))), float(np.arccos(np.sqrt((y + 1.0) / 2.0)))


def kerr_gtt_bl(r: float, theta: float, m: float, a: float) -> float:
    """Kerr g_tt in Boyer-Lindquist coordinates."""
    c2 = np.cos(theta) ** 2
    return -(r * r - 2.0 * m * r + a * a * c2) / (r * r + a * a * c2)


def mp_gtt_spherical(r: float, theta: float, m: float, a: float) -> float:
    """Myers-Perry g_tt in spherical coordinates (one angular momentum)."""
    return -(1.0 - 2.0 * m / (r * r + a * a * np.cos(theta) ** 2))


# ---------------------------------------------------------------------------
# D = 0 curve tracing
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CurvePolyline:
    """Ordered samples of a factorisation-failure curve with |D| residuals."""

    samples: np.ndarray          # (N, 2) of (rho, v)
    residuals: np.ndarray        # normalised |D| at each sample
    parameterisation: str = "arclength"
    tag: str = "factorisation-failure"

    def __len__(self) -> int:
        return len(self.samples)


def _d_hat_function(model: RationalMatrixOmega, branches):
    """Normalised-D callable (Hadamard-scaled determinant)."""
    if branches is None:
        branches = model.default_branches
    if model.n == 2:
        def f(rho, v):
            return complex(grid_D_2x2(model, np.asarray(rho, dtype=float),
                                      np.asarray(v, dtype=float), branches))

        def fgrid(R, V):
            return grid_D_2x2(model, R, V, branches)
        return f, fgrid

    def f(rho, v):
        pt = SpectralPoint(float(rho), float(v))
        part = build_partition(pt, model.omega_poles, branches)
        mono = compose_monodromy(model, pt, check=False)
        d, scale = _d_with_scale(mono, part)
        return d / scale

    def fgrid(R, V):
        out = np.empty(R.shape, dtype=complex)
        it = np.nditer(R, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            out[idx] = f(R[idx], V[idx])
        return out
    return f, fgrid


def _bisect_edge(f, p0, p1, f0, f1, tol: float, max_iter: int = 80):
    """Bisection along the segment p0-p1 for a sign change of Re f."""
    a, b = np.asarray(p0, dtype=float), np.asarray(p1, dtype=float)
    fa = f0
    for _ in range(max_iter):
        mid = 0.5 * (a + b)
        fm = f(mid[0], mid[1]).real
        if abs(fm) <= tol or np.linalg.norm(b - a) < 1e-13:
            return mid, abs(fm)
        if (fa < 0) != (fm < 0):
            b = mid
        else:
            a, fa = mid, fm
    mid = 0.5 * (a + b)
    return mid, abs(f(mid[0], mid[1]).real)


def _chain_points(pts: np.ndarray) -> np.ndarray:
    """Nearest-neighbour ordering starting from the point of minimal v."""
    pts = list(map(np.asarray, pts))
    start = min(range(len(pts)), key=lambda i: (pts[i][1], pts[i][0]))
    order = [start]
    used = {start}
    while len(order) < len(pts):
        last = pts[order[-1]]
        best, bd = None, np.inf
        for i, p in enumerate(pts):
            if i in used:
                continue
            d = np.hypot(*(p - last))
            if d < bd:
                best, bd = i, d
        order.append(best)
        used.add(best)
    return np.array([pts[i] for i in order])


def trace_curve(model: RationalMatrixOmega, branches=None,
                box=(0.05, 4.0, -4.0, 4.0), grid=(80, 80),
                step: float = 0.01, residual_tol: float = 1e-8,
                max_points: int = 20000) -> CurvePolyline:
    """Trace the D(rho, v) = 0 locus inside a box of the Weyl half-plane.

    Grid scan for sign changes of the phase-normalised D, edge bisection
    down to |D| <= residual_tol, nearest-neighbour chaining, then midpoint
    refinement along local normals until samples are at most `step` apart.
    """
    rmin, rmax, vmin, vmax = box
    if rmin <= 0:
        raise ValueError("box must lie in the rho > 0 half-plane")
    f_raw, fgrid = _d_hat_function(model, branches)
    rho_vals = np.linspace(rmin, rmax, grid[0])
    v_vals = np.linspace(vmin, vmax, grid[1])
    R, V = np.meshgrid(rho_vals, v_vals, indexing="ij")
    D = fgrid(R, V)
    # global phase normalisation from the largest-|D| grid point
    ref = D.flat[int(np.argmax(np.abs(D)))]
    if ref == 0:
        raise NoCurveFound("D vanishes identically on the scan grid")
    phase = ref / abs(ref)

    def f(rho, v):
        return f_raw(rho, v) * np.conj(phase)

    Dn = (D * np.conj(phase)).real
    pts = []
    sign = np.sign(Dn)
    for i in range(grid[0]):
        for j in range(grid[1]):
            if i + 1 < grid[0] and sign[i, j] * sign[i + 1, j] < 0:
                p, r = _bisect_edge(f, (R[i, j], V[i, j]), (R[i + 1, j], V[i + 1, j]),
                                    Dn[i, j], Dn[i + 1, j], residual_tol)
                pts.append((p, r))
            if j + 1 < grid[1] and sign[i, j] * sign[i, j + 1] < 0:
                p, r = _bisect_edge(f, (R[i, j], V[i, j]), (R[i, j + 1], V[i, j + 1]),
                                    Dn[i, j], Dn[i, j + 1], residual_tol)
                pts.append((p, r))
    if not pts:
        raise NoCurveFound(f"no D = 0 locus found in box {box}")
    ordered = _chain_points(np.array([p for p, _ in pts]))

    # refinement: insert corrected midpoints until spacing <= step
    def correct(pt_mid, direction, gap):
        nrm = np.linalg.norm(direction)
        if nrm == 0:
            return None
        n_hat = np.array([-direction[1], direction[0]]) / nrm
        h = 0.5 * gap
        for _ in range(24):
            a = pt_mid + h * n_hat
            b = pt_mid - h * n_hat
            if a[0] <= 0 or b[0] <= 0:
                h *= 0.5
                continue
            fa, fb = f(a[0], a[1]).real, f(b[0], b[1]).real
            if (fa < 0) != (fb < 0):
                p, r = _bisect_edge(f, a, b, fa, fb, residual_tol)
                return p, r
            h *= 0.6
        return None

    out = [ordered[0]]
    res_out = [abs(f(ordered[0][0], ordered[0][1]).real)]
    for nxt in ordered[1:]:
        while np.hypot(*(nxt - out[-1])) > step and len(out) < max_points:
            cur = out[-1]
            gap = np.hypot(*(nxt - cur))
            direction = (nxt - cur) / gap
            target = cur + min(step, 0.5 * gap) * direction
            got = correct(target, direction, min(step, 0.5 * gap))
            if got is None:
                break
            p, r = got
            if np.hypot(*(p - cur)) < 1e-12:
                break
            out.append(p)
            res_out.append(r)
        out.append(nxt)
        res_out.append(abs(f(nxt[0], nxt[1]).real))
    samples = np.array(out)
    return CurvePolyline(samples, np.array(res_out))


def _point_to_segments(x, q0, q1, seg, seg_len2):
    t = np.clip(np.sum((x - q0) * seg, axis=1) / np.maximum(seg_len2, 1e-300), 0.0, 1.0)
    proj = q0 + t[:, None] * seg
    d = np.hypot(*(x - proj).T)
    k = int(np.argmin(d))
    return float(d[k]), k, float(t[k])


def _directed_hausdorff(p, q, skip_overhang: bool = False):
    q = np.asarray(q, dtype=float)
    q0, q1 = q[:-1], q[1:]
    seg = q1 - q0
    seg_len2 = np.sum(seg * seg, axis=1)
    worst = 0.0
    for x in np.asarray(p, dtype=float):
        d, k, t = _point_to_segments(x, q0, q1, seg, seg_len2)
        if skip_overhang and ((k == 0 and t == 0.0) or (k == len(seg) - 1 and t == 1.0)):
            continue  # x projects beyond the target's parameter range
        worst = max(worst, d)
    return worst


def polyline_hausdorff(a: np.ndarray, b: np.ndarray) -> float:
    """Symmetric Hausdorff distance between two polylines (point-to-segment)."""
    return max(_directed_hausdorff(a, b), _directed_hausdorff(b, a))


def curve_match_distance(traced: np.ndarray, oracle: np.ndarray,
                         box=None, margin: float = 0.0) -> float:
    """Hausdorff-style distance that ignores parameter-range overhang.

    Traced points projecting beyond the oracle's endpoints are skipped (the
    tracer follows the full locus, the oracle is sampled on a finite y
    range); oracle points within `margin` of the search box boundary are
    skipped (the tracer cannot see them).
    """
    traced = np.asarray(traced, dtype=float)
    oracle = np.asarray(oracle, dtype=float)
    d1 = _directed_hausdorff(traced, oracle, skip_overhang=True)
    keep = np.ones(len(oracle), dtype=bool)
    if box is not None:
        rmin, rmax, vmin, vmax = box
        keep = ((oracle[:, 0] >= rmin + margin) & (oracle[:, 0] <= rmax - margin)
                & (oracle[:, 1] >= vmin + margin) & (oracle[:, 1] <= vmax - margin))
    d2 = _directed_hausdorff(oracle[keep], traced) if np.any(keep) else 0.0
    return max(d1, d2)


def classify_curve(model: RationalMatrixOmega, polyline: CurvePolyline,
                   branches=None, gtt_tol: float = 1e-6,
                   probe_count: int = 9) -> CurvePolyline:
    """Tag the failure curve "ergosurface" when g_tt vanishes along it.

    g_tt is sampled from factorisations at small normal offsets from curve
    points; the tag stays "factorisation-failure" when g_tt is bounded away
    from zero (the two notions agree for some models/contours only).
    """
    from .engine import Status, factorise

    samples = polyline.samples
    idxs = np.linspace(0, len(samples) - 1, min(probe_count, len(samples))).astype(int)
    values = []
    for i in idxs:
        p = samples[i]
        d = samples[min(i + 1, len(samples) - 1)] - samples[max(i - 1, 0)]
        nrm = np.linalg.norm(d)
        if nrm == 0:
            continue
        n_hat = np.array([-d[1], d[0]]) / nrm
        for sgn in (1.0, -1.0):
            q = p + sgn * 1e-4 * n_hat
            if q[0] <= 0:
                continue
            try:
                out = factorise(model, q[0], q[1], branches)
            except Exception:
                continue
            if out.status is not Status.CANONICAL:
                continue
            try:
                if model.n == 2:
                    values.append(extract_4d(out.M_limit).g_tt)
                else:
                    values.append(extract_5d(out.M_limit).g_tt)
                break
            except NonPhysicalM:
                continue
    if values and max(abs(g) for g in values) <= max(gtt_tol, 1e-3):
        tag = "ergosurface"
    else:
        tag = "factorisation-failure"
    return CurvePolyline(polyline.samples, polyline.residuals,
                         polyline.parameterisation, tag)
