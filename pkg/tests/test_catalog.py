import json

import numpy as np
import pytest

from whergo.catalog import (
    compose_monodromy,
    load_model_json,
    make_model,
    model_from_dict,
    model_identity,
    model_kerr,
    model_mp5d,
    model_mvc5d,
    model_to_dict,
)
from whergo.errors import (
    ExtremalOrOverRotating,
    InvariantViolation,
    ParameterViolation,
    SchemaError,
)
from whergo.spectral import SpectralPoint, build_partition, spectral_map


def test_kerr_entry_values(kerr):
    # (1,2) entry: 2 a m / (w^2 - c^2) = 4/(w^2 - 3) at m=2, a=1
    assert kerr.entry(0, 1)(2.0) == pytest.approx(4.0)
    assert abs(np.linalg.det(kerr.eval(5j)) - 1.0) <= 1e-12


def test_kerr_a_zero_reduces_to_ratio():
    m = 2.0
    model = model_kerr(m, 0.0)
    for w in (3.0, 5.0 + 1.0j):
        assert model.entry(0, 0)(w) == pytest.approx((w - m) / (w + m))
        assert model.entry(1, 1)(w) == pytest.approx((w + m) / (w - m))
        assert model.entry(0, 1)(w) == 0.0


def test_kerr_parameter_domain():
    with pytest.raises(ExtremalOrOverRotating):
        model_kerr(1.0, 1.0)
    with pytest.raises(ExtremalOrOverRotating):
        model_kerr(1.0, 2.0)


def test_mp5d_values(mp5d):
    assert abs(np.linalg.det(mp5d.eval(2.0 + 3.0j)) - 1.0) <= 1e-10
    eta = np.diag([1.0, -1.0, 1.0])
    for w in (1.7 + 0.4j, -2.2 + 1.0j):
        val = mp5d.eval(w)
        assert np.max(np.abs(eta @ val.T @ eta - val)) <= 1e-12 * max(1, np.max(np.abs(val)))


def test_mp5d_a_zero_is_diagonal():
    m = 2.0
    model = model_mp5d(m, 0.0)
    al = m / 2.0
    for w in (2.5, 1.1 + 0.3j):
        val = model.eval(w)
        off = val - np.diag(np.diag(val))
        assert np.max(np.abs(off)) <= 1e-12
        assert val[0, 0] == pytest.approx(1.0 / (2 * (w - al)))
        assert val[1, 1] == pytest.approx(2 * (w + al))
        assert val[2, 2] == pytest.approx((w - al) / (w + al))


def test_mp5d_parameter_domain():
    with pytest.raises(ParameterViolation):
        model_mp5d(1.0, 2.0)


def test_mvc5d_values(mvc5d):
    al = 0.75
    assert mvc5d.entry(0, 0)(2.0) == pytest.approx(-2.0 / (2.0 + al))
    assert abs(np.linalg.det(mvc5d.eval(1.0 + 1.0j)) - 1.0) <= 1e-10


def test_mvc5d_a_zero_reduces_to_schwarzschild_block():
    m = 2.0
    model = model_mvc5d(m, 0.0)
    al = m / 2.0
    for w in (2.0, 0.4 + 1.1j):
        val = model.eval(w)
        assert val[0, 0] == pytest.approx(-2.0 / (w + al))
        assert val[0, 1] == pytest.approx(w / (w + al))
        assert val[1, 0] == pytest.approx(-w / (w + al))
        assert val[1, 1] == pytest.approx(al * al / (2 * (w + al)))
        assert val[2, 2] == pytest.approx((w + al) / (w - al))
        assert val[0, 2] == 0.0 and val[1, 2] == 0.0


def test_catalog_invariants_50_samples(rng, kerr, mp5d, mvc5d):
    for model in (kerr, mp5d, mvc5d):
        eta = np.diag(np.array(model.eta))
        for _ in range(50):
            w = complex(rng.uniform(-4, 4), rng.uniform(0.3, 3.0))
            val = model.eval(w)
            scale = max(1.0, np.max(np.abs(val)))
            assert abs(np.linalg.det(val) - 1.0) <= 1e-10 * scale ** model.n
            assert np.max(np.abs(eta @ val.T @ eta - val)) <= 1e-10 * scale


def test_kerr_degree_table(kerr):
    mono = compose_monodromy(kerr, SpectralPoint(1.0, 0.5))
    dt = mono.degree_table
    assert (dt.k11, dt.k12, dt.k22, dt.n) == (2, 0, 2, 2)
    assert (dt.N1, dt.N2) == (2, 2)
    assert dt.N1 + dt.N2 == 2 * dt.n


def test_degree_dichotomy(kerr):
    # N1 + N2 = 2n holds precisely when no chain inequality holds
    mono = compose_monodromy(kerr, SpectralPoint(1.0, 0.5))
    dt = mono.degree_table
    chain = (dt.k11 > dt.k12 > dt.k22) or (dt.k22 > dt.k12 > dt.k11)
    assert not chain
    assert dt.N1 + dt.N2 == 2 * dt.n


def test_composed_matches_direct(rng, kerr, mvc5d):
    for model in (kerr, mvc5d):
        pt = SpectralPoint(1.1, 0.4)
        mono = compose_monodromy(model, pt)
        for _ in range(7):
            tau = complex(rng.uniform(0.3, 1.6), rng.uniform(-1.0, 1.0))
            direct = model.eval(spectral_map(pt, tau))
            composed = mono.eval(tau)
            scale = max(1.0, np.max(np.abs(direct)))
            assert np.max(np.abs(direct - composed)) <= 1e-10 * scale
            assert abs(np.linalg.det(composed) - 1.0) <= 1e-8 * scale ** model.n


def test_composed_involution_consistency(kerr):
    # evaluations at tau and -1/tau see the same omega
    pt = SpectralPoint(1.3, -0.2)
    mono = compose_monodromy(kerr, pt)
    for tau in (0.5 + 0.4j, 1.7, -0.8 + 0.1j):
        a = mono.eval(tau)
        b = mono.eval(-1.0 / tau)
        assert np.max(np.abs(a - b)) <= 1e-9 * max(1.0, np.max(np.abs(a)))


def test_kerr_composed_denominator_is_q4(kerr):
    pt = SpectralPoint(1.0, 0.0)
    mono = compose_monodromy(kerr, pt)
    assert np.allclose(mono.q2n, [0.25, 0.0, -3.5, 0.0, 0.25])


def test_identity_monodromy():
    model = model_identity(2)
    mono = compose_monodromy(model, SpectralPoint(2.0, 1.0))
    assert np.allclose(mono.eval(0.7 + 0.2j), np.eye(2))
    assert mono.ledger == ()


def test_mp5d_ledger_has_origin_pole(mp5d):
    mono = compose_monodromy(mp5d, SpectralPoint(1.3, 0.4))
    zero_recs = [rec for rec in mono.ledger if abs(rec.tau) < 1e-12]
    assert len(zero_recs) == 1
    assert zero_recs[0].omega0 is None
    pair_w0 = sorted({round(rec.omega0.real, 8) for rec in mono.ledger
                      if rec.omega0 is not None})
    # the omega = alpha - m denominator factor of the (3,3) entry cancels
    # exactly under 4 alpha = 2m - a^2, so only the +-alpha pairs are poles
    assert pair_w0 == pytest.approx([-0.75, 0.75])


def test_mp5d_alpha_minus_m_pole_is_removable(mp5d):
    al = mp5d.params["alpha"]
    m = mp5d.params["m"]
    e33 = mp5d.entry(2, 2)
    assert e33.den.size == 3          # reduced to (omega^2 - alpha^2)
    roots = sorted(np.roots(e33.den[::-1]).real)
    assert roots == pytest.approx([-al, al])
    # but the declared contour still lists the alpha - m pair, as in the
    # unreduced common-denominator presentation
    assert any(abs(w - (al - m)) < 1e-12 for w in mp5d.omega_poles)


def test_mvc5d_row_inside_poles(mvc5d):
    pt = SpectralPoint(1.3, 0.4)
    mono = compose_monodromy(mvc5d, pt)
    part = build_partition(pt, mvc5d.omega_poles, mvc5d.default_branches)
    rows = mono.row_inside_poles(part)
    assert [sum(r.values()) for r in rows] == [1, 2, 1]


def test_json_roundtrip(kerr, tmp_path):
    doc = model_to_dict(kerr)
    path = tmp_path / "kerr.json"
    path.write_text(json.dumps(doc))
    loaded = load_model_json(path)
    for i in range(2):
        for j in range(2):
            assert np.array_equal(loaded.entry(i, j).num, kerr.entry(i, j).num)
            assert np.array_equal(loaded.entry(i, j).den, kerr.entry(i, j).den)


def test_json_det_violation():
    doc = {"n": 2, "eta": [1, 1],
           "entries": [[{"num": [[1, 0]], "den": [[1, 0]]},
                        {"num": [[0, 0]], "den": [[1, 0]]}],
                       [{"num": [[0, 0]], "den": [[1, 0]]},
                        {"num": [[2, 0]], "den": [[1, 0]]}]]}
    with pytest.raises(InvariantViolation):
        model_from_dict(doc)


def test_json_asymmetric_violation():
    doc = {"n": 2, "eta": [1, 1],
           "entries": [[{"num": [[1, 0], [1, 0]], "den": [[1, 0]]},
                        {"num": [[1, 0]], "den": [[1, 0]]}],
                       [{"num": [[2, 0]], "den": [[1, 0]]},
                        {"num": [[0, 0], [0, 0], [1, 0]], "den": [[1, 0], [1, 0]]}]]}
    with pytest.raises(InvariantViolation):
        model_from_dict(doc)


@pytest.mark.parametrize("doc", [
    {"n": 2},
    {"n": 2, "eta": [1, 1], "entries": [], "extra_key": 1},
    {"n": 2, "eta": [1, 2], "entries": [[], []]},
    {"n": "two", "eta": [1, 1], "entries": [[], []]},
    {"n": 2, "eta": [1, 1], "entries": [[{"num": [[1, 0]], "den": [[1, 0]],
                                          "foo": 3}] * 2] * 2},
])
def test_json_schema_errors(doc):
    with pytest.raises(SchemaError):
        model_from_dict(doc)


def test_load_model_json_bad_file(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(SchemaError):
        load_model_json(path)


def test_make_model_cancels_shared_factors():
    m = 2.0
    model = model_kerr(m, 0.0)
    # (w - m)^2 + 0 over w^2 - m^2 reduces to (w - m)/(w + m)
    assert model.entry(0, 0).num.size == 2
    assert model.entry(0, 0).den.size == 2


def test_degree_bookkeeping_max_rule(kerr, rng):
    # 2n = max(k11 + k22, 2 k12) for the composed normal form
    mono = compose_monodromy(kerr, SpectralPoint(1.7, -0.3))
    dt = mono.degree_table
    assert 2 * dt.n == max(dt.k11 + dt.k22, 2 * dt.k12)
    assert np.allclose(mono.q2n[-1].real, (1.7 / 2.0) ** 2)  # lc(q) (-rho/2)^n
