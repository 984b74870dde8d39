"""Named invariant/oracle suites behind `whergo verify`."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .catalog import compose_monodromy, model_kerr, model_mp5d, model_mvc5d
from .engine import existence_system_2x2, factorise
from .geometry import extract_4d, extract_5d
from .poly import dense_det, poly_mul
from .spectral import (
    SpectralPoint,
    build_partition,
    compose_polynomial,
    spectral_map,
    zero_pair_for,
)


@dataclass(frozen=True)
class SuiteResult:
    name: str
    residual: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.residual <= self.tol


def _suite_vieta(rng) -> SuiteResult:
    worst = 0.0
    for _ in range(50):
        pt = SpectralPoint(rng.uniform(0.2, 3.0), rng.uniform(-3.0, 3.0))
        w0 = complex(rng.uniform(-2.0, 2.0), rng.uniform(-1.0, 1.0))
        zp = zero_pair_for(pt, w0, "minus" if rng.random() < 0.5 else "plus")
        prod = zp.tau_in * zp.tau_out
        worst = max(worst, abs(prod + 1.0) / abs(prod))
    return SuiteResult("vieta-pair-product", worst, 1e-12)


def _suite_involution(rng) -> SuiteResult:
    worst = 0.0
    for _ in range(100):
        pt = SpectralPoint(rng.uniform(0.2, 3.0), rng.uniform(-3.0, 3.0))
        tau = complex(rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0))
        if abs(tau) < 0.05:
            continue
        lhs = spectral_map(pt, tau)
        rhs = spectral_map(pt, -1.0 / tau)
        worst = max(worst, abs(lhs - rhs) / max(1.0, abs(lhs)))
    return SuiteResult("spectral-involution", worst, 1e-11)


def _suite_compose(rng) -> SuiteResult:
    worst = 0.0
    for _ in range(20):
        pt = SpectralPoint(rng.uniform(0.3, 2.5), rng.uniform(-2.0, 2.0))
        p = rng.normal(size=rng.integers(1, 4) + 1).astype(complex)
        q = rng.normal(size=rng.integers(1, 4) + 1).astype(complex)
        cp, kp = compose_polynomial(pt, p)
        cq, kq = compose_polynomial(pt, q)
        cpq, kpq = compose_polynomial(pt, poly_mul(p, q))
        prod = poly_mul(cp, cq)
        if kpq != kp + kq:
            return SuiteResult("compose-multiplicative", 1.0, 1e-10)
        scale = max(np.max(np.abs(prod)), 1e-30)
        diff = np.zeros(max(prod.size, cpq.size), dtype=complex)
        diff[: prod.size] += prod
        diff[: cpq.size] -= cpq
        worst = max(worst, float(np.max(np.abs(diff)) / scale))
    return SuiteResult("compose-multiplicative", worst, 1e-10)


def _suite_models(rng) -> SuiteResult:
    worst = 0.0
    for model in (model_kerr(2.0, 1.0), model_mp5d(2.0, 1.0), model_mvc5d(2.0, 1.0)):
        eta = np.diag(np.array(model.eta))
        for _ in range(50):
            w = complex(rng.uniform(-4.0, 4.0), rng.uniform(0.3, 3.0))
            val = model.eval(w)
            scale = max(1.0, float(np.max(np.abs(val))))
            worst = max(worst, abs(np.linalg.det(val) - 1.0) / scale ** model.n)
            worst = max(worst, float(np.max(np.abs(eta @ val.T @ eta - val))) / scale)
    return SuiteResult("model-det-eta", worst, 1e-10)


def _suite_residual(rng) -> SuiteResult:
    worst = 0.0
    for model in (model_kerr(2.0, 1.0), model_mp5d(2.0, 1.0), model_mvc5d(2.0, 1.0)):
        for _ in range(3):
            rho = rng.uniform(1.4, 3.0)
            v = rng.uniform(-1.0, 1.0)
            out = factorise(model, rho, v)
            if not out.canonical:
                continue
            r = out.residual_report
            worst = max(worst, r.factorisation, r.x_at_zero / 0.1)
    return SuiteResult("factorisation-residual", worst, 1e-9)


def _suite_sigma(rng) -> SuiteResult:
    worst = 0.0
    for model in (model_mp5d(2.0, 1.0), model_mvc5d(2.0, 1.0)):
        for _ in range(4):
            out = factorise(model, rng.uniform(1.2, 3.0), rng.uniform(-1.0, 1.0))
            if not out.canonical:
                continue
            s = extract_5d(out.M_limit)
            worst = max(worst, abs(s.Sigma1 + s.Sigma2 + s.Sigma3))
    return SuiteResult("sigma-sum", worst, 1e-9)


def _suite_roundtrip(rng) -> SuiteResult:
    worst = 0.0
    for _ in range(4):
        out = factorise(model_kerr(2.0, 1.0), rng.uniform(1.5, 3.0), rng.uniform(-1.0, 1.0))
        M = out.M_limit.real
        s = extract_4d(M)
        worst = max(worst, float(np.max(np.abs(s.rebuild_M() - M))) / max(1.0, np.max(np.abs(M))))
        out = factorise(model_mvc5d(2.0, 1.0), rng.uniform(1.2, 2.5), rng.uniform(-0.8, 0.8))
        M = out.M_limit.real
        s5 = extract_5d(M)
        worst = max(worst, float(np.max(np.abs(s5.rebuild_M() - M))) / max(1.0, np.max(np.abs(M))))
    return SuiteResult("extraction-roundtrip", worst, 1e-10)


def _suite_kerr_det(rng) -> SuiteResult:
    m, a = 2.0, 1.0
    c = np.sqrt(m * m - a * a)
    model = model_kerr(m, a)
    worst = 0.0
    for _ in range(25):
        rho = rng.uniform(0.3, 4.0)
        v = rng.uniform(-3.0, 3.0)
        pt = SpectralPoint(rho, v)
        mono = compose_monodromy(model, pt, check=False)
        part = build_partition(pt, model.omega_poles, model.default_branches)
        d_val = dense_det(existence_system_2x2(mono, part))
        t1 = ((v - c) - np.sqrt((v - c) ** 2 + rho ** 2)) / rho
        t2 = ((v + c) - np.sqrt((v + c) ** 2 + rho ** 2)) / rho
        f = (a * a * m * m / 4.0) * rho * rho * (t1 - t2) ** 4
        h = (-16 * (m - v) ** 2 * t1 ** 2 * t2 ** 2
             + rho ** 2 * (1 + 4 * t1 ** 3 * t2 + 6 * t1 ** 2 * t2 ** 2
                           + 4 * t1 * t2 ** 3 + t1 ** 4 * t2 ** 4)
             - 8 * rho * (m - v) * t1 * t2 * (-t1 - t2 + t1 ** 2 * t2 + t1 * t2 ** 2))
        worst = max(worst, abs(d_val - f * h) / abs(f * h))
    return SuiteResult("kerr-determinant-oracle", worst, 1e-8)


SUITES = {
    "vieta": _suite_vieta,
    "involution": _suite_involution,
    "compose": _suite_compose,
    "models": _suite_models,
    "residual": _suite_residual,
    "sigma": _suite_sigma,
    "roundtrip": _suite_roundtrip,
    "kerr-det": _suite_kerr_det,
}


def run_suites(names=None, seed: int = 20260808):
    selected = list(SUITES) if not names else [n for n in names if n in SUITES]
    if names and len(selected) != len(names):
        unknown = set(names) - set(SUITES)
        raise ValueError(f"unknown suites: {sorted(unknown)}; available {sorted(SUITES)}")
    results = []
    for name in selected:
        rng = np.random.default_rng(seed)
        results.append(SUITES[name](rng))
    return results
