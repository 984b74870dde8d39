"""Rational matrices in omega, their monodromy composition, built-in models.

A model is an n x n matrix of rational functions of omega with det = 1 and
eta-symmetry eta M^T eta = M.  Composition with the spectral relation turns
it into a monodromy matrix in tau whose pole pairs feed the factorisation
engine.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ExtremalOrOverRotating,
    InvariantViolation,
    ParameterViolation,
    SchemaError,
)
from .poly import (
    FactoredRational,
    as_poly,
    newton_polish,
    poly_degree,
    poly_eval,
    poly_is_zero,
    poly_mul,
    poly_shift,
    poly_trim,
)
from .spectral import (
    BRANCH_MINUS,
    BRANCH_PLUS,
    SpectralPoint,
    compose_polynomial,
    zero_pair_for,
)

_VALIDATION_SEED = 71209


@dataclass(frozen=True)
class RationalEntry:
    """num(omega)/den(omega), coefficients ascending."""

    num: np.ndarray
    den: np.ndarray

    def __call__(self, w):
        return poly_eval(self.num, w) / poly_eval(self.den, w)

    @staticmethod
    def of(num, den=(1.0,)) -> "RationalEntry":
        return RationalEntry(poly_trim(num), poly_trim(den))


@dataclass(frozen=True)
class RationalMatrixOmega:
    """Validated omega-plane matrix: det = 1, eta M^T eta = M, simple poles."""

    n: int
    entries: tuple            # n x n nested tuple of RationalEntry
    eta: tuple                # signature diagonal, e.g. (1, -1, 1)
    params: dict = field(default_factory=dict)
    model_id: str = "custom"
    omega_poles: tuple = ()   # distinct omega-plane denominator zeros
    default_branches: tuple = ()

    def entry(self, i: int, j: int) -> RationalEntry:
        return self.entries[i][j]

    def cache_key(self) -> tuple:
        """Content-based key for engine-level caches (id() is unsafe: a
        collected model's address can be recycled)."""
        parts = [self.model_id, self.n, self.eta]
        for row in self.entries:
            for e in row:
                parts.append(e.num.tobytes())
                parts.append(e.den.tobytes())
        return tuple(parts)

    def eval(self, w) -> np.ndarray:
        return np.array([[self.entries[i][j](w) for j in range(self.n)]
                         for i in range(self.n)])


def _validate_matrix(m: RationalMatrixOmega, det_tol=1e-10, sym_tol=1e-10):
    rng = np.random.default_rng(_VALIDATION_SEED)
    eta = np.diag(np.array(m.eta, dtype=float))
    for k in range(7):
        w = complex(rng.uniform(-4.0, 4.0), rng.uniform(0.5, 4.0))
        val = m.eval(w)
        scale = max(1.0, np.max(np.abs(val)))
        det = np.linalg.det(val)
        if abs(det - 1.0) > det_tol * scale ** m.n:
            raise InvariantViolation(
                f"det M({w}) = {det}, expected 1 (model {m.model_id})")
        if k < 5:
            sym = eta @ val.T @ eta - val
            if np.max(np.abs(sym)) > sym_tol * scale:
                raise InvariantViolation(
                    f"eta-symmetry residual {np.max(np.abs(sym)):.2e} at omega={w}")
    # simple poles: denominator roots of every entry pairwise distinct
    for row in m.entries:
        for e in row:
            if poly_degree(e.den) >= 2:
                roots = np.roots(e.den[::-1])
                for i in range(len(roots)):
                    for j in range(i + 1, len(roots)):
                        if abs(roots[i] - roots[j]) < 1e-8 * max(1.0, abs(roots[i])):
                            raise InvariantViolation("entry denominator has a repeated zero")
    return m


def make_model(entries, eta=None, params=None, model_id="custom",
               omega_poles=None, default_branches=None) -> RationalMatrixOmega:
    """Build and validate a RationalMatrixOmega from nested RationalEntry data."""
    n = len(entries)

    def reduced(e):
        if not isinstance(e, RationalEntry):
            e = RationalEntry.of(*e)
        num, den = _cancel_shared_roots(e.num, e.den)
        return RationalEntry(num, den)

    entries = tuple(tuple(reduced(e) for e in row) for row in entries)
    if eta is None:
        eta = (1.0,) * n
    if omega_poles is None:
        # collect distinct denominator zeros across entries
        found = []
        for row in entries:
            for e in row:
                if poly_degree(e.den) >= 1:
                    for r in np.roots(e.den[::-1]):
                        r = complex(newton_polish(e.den, r, steps=2))
                        if not any(abs(r - s) < 1e-8 * max(1.0, abs(r)) for s in found):
                            found.append(r)
        omega_poles = tuple(sorted(found, key=lambda z: (round(z.real, 12), round(z.imag, 12))))
    if default_branches is None:
        default_branches = (BRANCH_MINUS,) * len(omega_poles)
    m = RationalMatrixOmega(n, entries, tuple(eta), dict(params or {}),
                            model_id, tuple(omega_poles), tuple(default_branches))
    return _validate_matrix(m)


# ---------------------------------------------------------------------------
# built-in models
# ---------------------------------------------------------------------------


def model_kerr(m: float, a: float) -> RationalMatrixOmega:
    """Non-extremal Kerr 2x2 matrix; requires m > a >= 0, c = sqrt(m^2 - a^2)."""
    if not (m > a >= 0.0):
        raise ExtremalOrOverRotating(f"need m > a >= 0, got m={m}, a={a}")
    c2 = m * m - a * a
    den = [-c2, 0.0, 1.0]                       # omega^2 - c^2
    p11 = [m * m + a * a, -2.0 * m, 1.0]        # (omega - m)^2 + a^2
    p22 = [m * m + a * a, 2.0 * m, 1.0]         # (omega + m)^2 + a^2
    p12 = [2.0 * a * m]
    c = np.sqrt(c2)
    return make_model(
        [[(p11, den), (p12, den)], [(p12, den), (p22, den)]],
        eta=(1.0, 1.0),
        params={"m": m, "a": a, "c": c},
        model_id="kerr",
        omega_poles=(complex(c), complex(-c)),
        default_branches=(BRANCH_MINUS, BRANCH_MINUS),
    )


def model_identity(n: int = 2) -> RationalMatrixOmega:
    entries = [[([1.0] if i == j else [0.0], [1.0]) for j in range(n)] for i in range(n)]
    return make_model(entries, eta=(1.0,) * n, model_id="identity",
                      omega_poles=(), default_branches=())


def model_mp5d(m: float, a: float) -> RationalMatrixOmega:
    """Myers-Perry 3x3 matrix (single angular momentum), 4 alpha = 2m - a^2 > 0.

    The chosen contour puts the minus-branch points for omega0 in
    {-alpha, alpha, alpha - m} inside; the failure curve is the ergosurface.
    """
    if not 2.0 * m - a * a > 0.0:
        raise ParameterViolation(f"need 2m - a^2 > 0, got m={m}, a={a}")
    al = (2.0 * m - a * a) / 4.0
    # common denominators
    d2 = poly_trim([-al * al, 0.0, 1.0])                    # (omega+al)(omega-al)
    d3 = poly_mul(d2, [m - al, 1.0])                        # ... * (omega - al + m)
    e11 = ([ (m - al) / 2.0, 0.5], d2)                      # (omega - al + m)/(2 (omega^2-al^2))
    e13 = ([a * m / 2.0], d2)
    e22 = ([2.0 * al, 2.0], [1.0])                          # 2 (omega + alpha)
    # (8 (omega-al)^2 (omega+al) + 4 a^2 m^2) / (8 (omega+al)(omega-al)(omega-al+m))
    num33 = poly_mul(poly_mul([-al, 1.0], [-al, 1.0]), [al, 1.0])
    num33 = poly_trim(np.polynomial.polynomial.polyadd(num33, [a * a * m * m / 2.0]))
    e33 = (num33, d3)
    z = ([0.0], [1.0])
    return make_model(
        [[e11, z, e13], [z, e22, z], [e13, z, e33]],
        eta=(1.0, -1.0, 1.0),
        params={"m": m, "a": a, "alpha": al, "L": a * a / m},
        model_id="mp5d",
        omega_poles=(complex(-al), complex(al), complex(al - m)),
        default_branches=(BRANCH_MINUS, BRANCH_MINUS, BRANCH_MINUS),
    )


def model_mvc5d(m: float, a: float) -> RationalMatrixOmega:
    """Second 3x3 Myers-Perry matrix (one angular momentum, a = l1 case).

    Uses the plus-branch contour for omega0 in {-alpha, alpha}; the failure
    curve differs from the ergosurface.
    """
    if not 2.0 * m - a * a > 0.0:
        raise ParameterViolation(f"need 2m - a^2 > 0, got m={m}, a={a}")
    al = (2.0 * m - a * a) / 4.0
    dp = [al, 1.0]        # omega + alpha
    dm = [-al, 1.0]       # omega - alpha
    d2 = poly_mul(dp, dm)
    e11 = ([-2.0], dp)
    e12 = ([al - m / 2.0, 1.0], dp)            # 1 - m/(2(omega+alpha))
    e21 = ([-al + m / 2.0, -1.0], dp)
    # -a^2 m/(4(omega-alpha)) + m^2/(8(omega+alpha))
    num22 = poly_trim(np.polynomial.polynomial.polyadd(
        np.asarray(poly_mul([-a * a * m / 4.0], dp), dtype=complex),
        np.asarray(poly_mul([m * m / 8.0], dm), dtype=complex)))
    e22 = (num22, d2)
    e23 = ([a * m / 2.0], dm)
    e32 = ([-a * m / 2.0], dm)
    e33 = ([-al + m, 1.0], dm)                 # 1 + m/(omega-alpha)
    z = ([0.0], [1.0])
    return make_model(
        [[e11, e12, z], [e21, e22, e23], [z, e32, e33]],
        eta=(1.0, -1.0, 1.0),
        params={"m": m, "a": a, "alpha": al},
        model_id="mvc5d",
        omega_poles=(complex(-al), complex(al)),
        default_branches=(BRANCH_PLUS, BRANCH_PLUS),
    )


MODEL_BUILDERS = {
    "kerr": model_kerr,
    "mp5d": model_mp5d,
    "mvc5d": model_mvc5d,
}


# ---------------------------------------------------------------------------
# monodromy composition
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PoleRecord:
    """One tau-plane pole: location, multiplicity, pair partner, omega origin.

    Poles at tau = 0 (and the matching growth at infinity) are recorded with
    omega0 = None; they arise from entries that are improper in omega.
    """

    tau: complex
    multiplicity: int
    partner: complex | None
    omega0: complex | None


@dataclass(frozen=True)
class DegreeTable:
    k11: int
    k12: int
    k22: int
    n: int

    @property
    def N1(self) -> int:
        return max(self.k11, self.k12)

    @property
    def N2(self) -> int:
        return max(self.k12, self.k22)


@dataclass(frozen=True)
class MonodromyMatrixTau:
    """Composed monodromy matrix: rational entries in tau plus bookkeeping.

    For 2x2 models of the common-denominator form the normal-form data
    (scalar prefactor tau^n/q_2n and the numerator polynomials ptilde) is
    attached; 3x3 models carry only the flat pole ledger.
    """

    n: int
    pt: SpectralPoint
    entries: tuple                  # n x n of FactoredRational in tau
    model: RationalMatrixOmega
    ledger: tuple                   # PoleRecord, every tau-plane pole
    degree_table: DegreeTable | None = None
    q2n: np.ndarray | None = None   # composed denominator polynomial (2x2)
    ptilde: tuple | None = None     # ((p11~, p12~), (p12~, p22~)) numerators (2x2)
    pomega: tuple | None = None     # omega-side numerators of the normal form
    qomega: np.ndarray | None = None

    def eval(self, tau) -> np.ndarray:
        return np.array([[self.entries[i][j](tau) for j in range(self.n)]
                         for i in range(self.n)])

    def row_inside_poles(self, partition):
        """Per-row multiset of inside poles {tau: multiplicity}.

        Pair poles are mapped through the partition's branch choice; tau = 0
        poles are always inside (the contour encircles the origin).
        """
        inside_of = {}
        for rec in self.ledger:
            if rec.omega0 is None:
                continue
            pair = partition.pair_for(rec.omega0)
            inside_of[rec.omega0] = pair.tau_in
        rows = []
        for i in range(self.n):
            row: dict[complex, int] = {}
            for j in range(self.n):
                fr = self.entries[i][j]
                mult: dict[complex, int] = {}
                for r in fr.den_roots:
                    key = _find_key(mult, r)
                    mult[key] = mult.get(key, 0) + 1
                for r, k in mult.items():
                    if abs(r) < 1e-12:
                        tin = 0.0 + 0j
                    else:
                        rec = _ledger_lookup(self.ledger, r)
                        if rec.omega0 is None:
                            tin = 0.0 + 0j
                        else:
                            tin = inside_of[rec.omega0]
                            if not _close(tin, r):
                                continue  # this root is the outside member
                    key = _find_key(row, tin)
                    row[key] = max(row.get(key, 0), k)
            rows.append(row)
        return rows


def _close(a, b, rel=1e-8):
    return abs(a - b) <= rel * max(1.0, abs(a), abs(b))


def _find_key(d: dict, r):
    for k in d:
        if _close(k, r):
            return k
    return r


def _ledger_lookup(ledger, tau):
    for rec in ledger:
        if _close(rec.tau, tau):
            return rec
    raise KeyError(f"tau = {tau} not in pole ledger")


def _compose_entry(entry: RationalEntry, pt: SpectralPoint, root_hints):
    """Compose num/den with the spectral relation, attaching exact den roots.

    root_hints maps each omega-plane pole to its tau pair (both members), so
    the composed denominator is stored in factored form.
    """
    kn = poly_degree(entry.num)
    kd = poly_degree(entry.den)
    if kn < 0:  # zero numerator
        return FactoredRational.from_const(0.0)
    num_t, _ = compose_polynomial(pt, entry.num)
    den_t, _ = compose_polynomial(pt, entry.den)
    den_lc = den_t[-1]
    roots = []
    if kd >= 1:
        for r in np.roots(entry.den[::-1]):
            r = complex(newton_polish(entry.den, r, steps=2))
            t1, t2 = root_hints(r)
            roots.extend([t1, t2])
    shift = kd - kn
    if shift >= 0:
        num_t = poly_shift(num_t, shift)
    else:
        roots.extend([0.0 + 0j] * (-shift))
    return FactoredRational(poly_trim(num_t), den_lc, tuple(roots))


def compose_monodromy(model: RationalMatrixOmega, pt: SpectralPoint,
                      check: bool = True) -> MonodromyMatrixTau:
    """Compose M(omega) with the spectral relation at the given Weyl point.

    check=False skips the sample-point consistency validation (grid sweeps
    re-verify through their own oracles)."""
    if pt.lam != 1:
        raise ValueError("the factorisation engine is restricted to lambda = +1")
    pair_cache: dict[complex, tuple] = {}

    def hints(omega0):
        for key, val in pair_cache.items():
            if _close(key, omega0):
                return val
        zp = zero_pair_for(pt, omega0, BRANCH_MINUS)
        pair_cache[complex(omega0)] = (zp.tau_in, zp.tau_out)
        return pair_cache[complex(omega0)]

    entries = tuple(tuple(_compose_entry(model.entry(i, j), pt, hints)
                          for j in range(model.n)) for i in range(model.n))

    # ledger: pair poles ...
    ledger: list[PoleRecord] = []
    mult_at: dict[complex, int] = {}
    for row in entries:
        for fr in row:
            seen: dict[complex, int] = {}
            for r in fr.den_roots:
                key = _find_key(seen, r)
                seen[key] = seen.get(key, 0) + 1
            for r, k in seen.items():
                key = _find_key(mult_at, r)
                mult_at[key] = max(mult_at.get(key, 0), k)
    for r, k in mult_at.items():
        if abs(r) < 1e-12:
            ledger.append(PoleRecord(0.0 + 0j, k, None, None))
            continue
        omega0 = None
        partner = None
        for w, (t1, t2) in pair_cache.items():
            if _close(r, t1):
                omega0, partner = w, t2
            elif _close(r, t2):
                omega0, partner = w, t1
        ledger.append(PoleRecord(complex(r), k, partner, omega0))

    degree_table = None
    q2n = None
    ptilde = None
    pomega = None
    qomega = None
    # the 2x2 normal form presumes plain symmetry (p21 = p12); eta-symmetric
    # but asymmetric matrices go through the generic route
    plain_symmetric = model.n == 2 and all(e == 1.0 for e in model.eta)
    if plain_symmetric:
        q, p = _common_denominator_form(model)
        sym_ok = (poly_degree(p[0][1]) == poly_degree(p[1][0])
                  and (poly_is_zero(p[0][1]) or
                       np.max(np.abs(p[0][1] - p[1][0])) <= 1e-10 * np.max(np.abs(p[0][1]))))
        if q is not None and sym_ok:
            pomega = ((p[0][0], p[0][1]), (p[1][0], p[1][1]))
            qomega = q
            nq = poly_degree(q)
            q2n, _ = compose_polynomial(pt, q)
            pt11, _ = compose_polynomial(pt, p[0][0])
            pt12, _ = compose_polynomial(pt, p[0][1])
            pt22, _ = compose_polynomial(pt, p[1][1])
            degree_table = DegreeTable(
                k11=poly_degree(p[0][0]),
                k12=poly_degree(p[0][1]),
                k22=poly_degree(p[1][1]),
                n=nq,
            )
            ptilde = ((pt11, pt12), (pt12, pt22))
    mono = MonodromyMatrixTau(model.n, pt, entries, model, tuple(ledger),
                              degree_table, q2n, ptilde, pomega, qomega)
    if check:
        _check_monodromy(mono)
    return mono


def _common_denominator_form(model: RationalMatrixOmega):
    """2x2 normal form: monic common denominator q (root-multiset lcm of
    the reduced entry denominators) and numerators p_ij = num * (q/den)."""
    from .poly import _multiset_minus, poly_from_roots

    den_roots = []
    for i in range(2):
        for j in range(2):
            d = model.entry(i, j).den
            roots = []
            if poly_degree(d) >= 1:
                for r in np.roots(d[::-1]):
                    roots.append(complex(newton_polish(d, r, steps=2)))
            den_roots.append(roots)
    lcm: list = []
    for roots in den_roots:
        lcm = lcm + _multiset_minus(roots, lcm)
    q = poly_from_roots(lcm, 1.0)
    p = [[None, None], [None, None]]
    for i in range(2):
        for j in range(2):
            e = model.entry(i, j)
            if poly_is_zero(e.num):
                p[i][j] = np.zeros(1, dtype=complex)
                continue
            cof = _multiset_minus(lcm, den_roots[2 * i + j])
            p[i][j] = poly_trim(poly_mul(e.num, poly_from_roots(cof, 1.0 / e.den[-1])))
    return q, p


def _check_monodromy(mono: MonodromyMatrixTau, tol=1e-10, seed=40923):
    rng = np.random.default_rng(seed)
    for _ in range(7):
        tau = complex(rng.uniform(0.3, 1.8), rng.uniform(-1.2, 1.2))
        w = spectral_map_checked(mono.pt, tau)
        direct = mono.model.eval(w)
        composed = mono.eval(tau)
        scale = max(1.0, np.max(np.abs(direct)))
        if np.max(np.abs(direct - composed)) > tol * scale:
            raise InvariantViolation(
                f"composed monodromy mismatch {np.max(np.abs(direct - composed)):.2e} at tau={tau}")
        det = np.linalg.det(composed)
        if abs(det - 1.0) > 1e-8 * scale ** mono.n:
            raise InvariantViolation(f"det of composed monodromy is {det} at tau={tau}")


def spectral_map_checked(pt, tau):
    from .spectral import spectral_map
    return spectral_map(pt, tau)


# ---------------------------------------------------------------------------
# JSON model ingestion
# ---------------------------------------------------------------------------

_TOP_KEYS = {"n", "eta", "entries", "params"}
_ENTRY_KEYS = {"num", "den"}


def _coeffs_from_json(raw, where):
    if not isinstance(raw, list) or not raw:
        raise SchemaError(f"{where}: coefficient list required")
    out = []
    for item in raw:
        if not (isinstance(item, list) and len(item) == 2):
            raise SchemaError(f"{where}: coefficients are [re, im] pairs")
        out.append(complex(float(item[0]), float(item[1])))
    return np.array(out)


def model_from_dict(doc: dict, model_id="json") -> RationalMatrixOmega:
    if not isinstance(doc, dict):
        raise SchemaError("model document must be a JSON object")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise SchemaError(f"unknown keys in model document: {sorted(unknown)}")
    for key in ("n", "eta", "entries"):
        if key not in doc:
            raise SchemaError(f"missing required key {key!r}")
    n = doc["n"]
    if not (isinstance(n, int) and n >= 2):
        raise SchemaError("n must be an integer >= 2")
    eta = doc["eta"]
    if not (isinstance(eta, list) and len(eta) == n and all(e in (1, -1) for e in eta)):
        raise SchemaError("eta must be a list of +-1 of length n")
    rows = doc["entries"]
    if not (isinstance(rows, list) and len(rows) == n):
        raise SchemaError("entries must be an n x n array of {num, den} objects")
    entries = []
    for i, row in enumerate(rows):
        if not (isinstance(row, list) and len(row) == n):
            raise SchemaError(f"entries row {i} must have {n} columns")
        out_row = []
        for j, cell in enumerate(row):
            if not isinstance(cell, dict):
                raise SchemaError(f"entry ({i},{j}) must be an object")
            unknown = set(cell) - _ENTRY_KEYS
            if unknown:
                raise SchemaError(f"entry ({i},{j}): unknown keys {sorted(unknown)}")
            num = _coeffs_from_json(cell.get("num"), f"entry ({i},{j}).num")
            den = _coeffs_from_json(cell.get("den"), f"entry ({i},{j}).den")
            num, den = _cancel_shared_roots(num, den)
            out_row.append(RationalEntry(poly_trim(num), poly_trim(den)))
        entries.append(tuple(out_row))
    params = doc.get("params", {})
    if not isinstance(params, dict):
        raise SchemaError("params must be an object")
    return make_model(entries, eta=tuple(float(e) for e in eta),
                      params=params, model_id=model_id)


def _cancel_shared_roots(num, den, rel=1e-12):
    """Cancel exactly-shared linear factors between num and den."""
    from .poly import poly_deflate

    num, den = poly_trim(num), poly_trim(den)
    if poly_degree(den) < 1 or poly_is_zero(num):
        return num, den
    changed = True
    while changed and poly_degree(den) >= 1:
        changed = False
        for r in np.roots(den[::-1]):
            r = complex(newton_polish(den, r, steps=2))
            nscale = np.max(np.abs(num)) * max(1.0, abs(r)) ** max(poly_degree(num), 0)
            if abs(poly_eval(num, r)) <= rel * nscale:
                num, _ = poly_deflate(num, r)
                den, _ = poly_deflate(den, r)
                num, den = poly_trim(num), poly_trim(den)
                changed = True
                break
    return num, den


def model_to_dict(model: RationalMatrixOmega) -> dict:
    def enc(p):
        return [[float(c.real), float(c.imag)] for c in as_poly(p)]

    return {
        "n": model.n,
        "eta": [int(e) for e in model.eta],
        "entries": [[{"num": enc(model.entry(i, j).num), "den": enc(model.entry(i, j).den)}
                     for j in range(model.n)] for i in range(model.n)],
        "params": {k: float(v) for k, v in model.params.items()},
    }


def load_model_json(path) -> RationalMatrixOmega:
    """Load and validate a user model from a JSON file (strict schema)."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON in {path}: {exc}") from exc
    return model_from_dict(doc, model_id=str(path))
