import numpy as np
import pytest

from bowave import energy as en
from bowave import wavetank as wt
from bowave.params import PhysParams
from bowave.spectral import SpectralField, make_grid

from conftest import random_state

G = make_grid(128, 2 * np.pi)
P = PhysParams(g=1.3, c=0.9)


def single(j, a, b=0.0):
    W = np.zeros(G.n, complex)
    Q = np.zeros(G.n, complex)
    W[j] = a
    Q[j] = b
    return wt.WWState.from_spectra(G, W, Q)


def test_zero_state():
    z = wt.WWState.zeros(G)
    assert en.hamiltonian(z, P) == 0 and en.momentum(z, P) == 0 and en.mass(z) == 0
    d = wt.diff_aux(wt.to_diff_vars(z), P)
    assert en.cubic_components(d, z, P) == (0.0,) * 5


def test_single_mode_closed_forms():
    a, b = 0.1, 0.07
    s = single(-1, a, b)
    c, g = P.c, P.g
    assert en.hamiltonian(s, P) == pytest.approx(2 * np.pi * (g * a * a + b * b) + 0.5 * np.pi * c * c * a ** 4,
                                                 rel=1e-13)
    assert en.momentum(s, P) == pytest.approx(-4 * np.pi * a * b - 2 * np.pi * c * a * a, rel=1e-13)
    assert en.mass(s) == pytest.approx(np.pi * a * a, rel=1e-13)
    assert en.linear_energy(s.W, s.Q, P) == pytest.approx(2 * np.pi * (g * a * a + b * b), rel=1e-13)


def test_momentum_forms_agree_for_zero_mean(rng):
    s = random_state(G, rng, 0.05)
    assert en.momentum(s, P) == pytest.approx(en.momentum_zero_mean_form(s, P), rel=1e-12)
    small = s.scaled(1e-4)
    assert en.momentum(small, P) == pytest.approx(en.linear_momentum(small.W, small.Q, P), rel=1e-3)


def test_hamiltonian_quadratic_limit(rng):
    s = random_state(G, rng, 1.0)
    rel = []
    for a in (1e-3, 5e-4):
        st = s.scaled(a)
        e0 = en.linear_energy(st.W, st.Q, P)
        rel.append(abs(en.hamiltonian(st, P) - e0) / e0)
    assert rel[0] / rel[1] == pytest.approx(2.0, rel=0.05)


def test_dyadic_blocks_partition():
    blocks = en.dyadic_blocks(G)
    cover = np.sum(blocks, axis=0)
    assert np.all(cover == 1)


def test_besov_surrogate_dominates_sup(rng):
    f = SpectralField(G, np.where(G.dealias_mask, rng.normal(size=G.n) + 1j * rng.normal(size=G.n), 0))
    assert en.besov_linf(f) >= np.abs(f.samples).max()
    assert en.besov_linf(SpectralField(G, np.zeros(G.n))) == 0


def test_control_norms(rng):
    z = wt.WWState.zeros(G)
    cn = en.control_norms(wt.to_diff_vars(z), z, P)
    assert all(v == 0 for v in (cn.A, cn.B, cn.A_half, cn.A_one, cn.A_bar, cn.B_bar))
    s = random_state(G, rng, 0.02)
    cn = en.control_norms(wt.to_diff_vars(s), s, P)
    c = P.c
    assert cn.A_bar == pytest.approx(cn.A + c * cn.A_half + c * c * cn.A_one, rel=1e-14)
    assert cn.B_bar == pytest.approx(cn.B + c * cn.A + c * c * cn.A_half, rel=1e-14)
    # norms are homogeneous of degree one at small amplitude
    half = en.control_norms(wt.to_diff_vars(s.scaled(0.5)), s.scaled(0.5), P)
    assert half.A_one == pytest.approx(0.5 * cn.A_one, rel=1e-13)


def test_e_lin3_zero_background(rng):
    z = wt.WWState.zeros(G)
    l = random_state(G, rng, 0.1)
    lin = wt.LinState(l.W, l.Q)
    assert en.e_lin3(lin, z, None, P) == pytest.approx(en.linear_energy(l.W, l.Q, P), rel=1e-12)


def test_cubic_components_are_cubic(rng):
    s = random_state(G, rng, 1.0, kmax=6)
    vals = []
    for a in (1e-3, 5e-4):
        st = s.scaled(a)
        d = wt.diff_aux(wt.to_diff_vars(st), P)
        vals.append(np.array(en.cubic_components(d, st, P, n=1)))
    ratio = vals[0] / vals[1]
    big = np.abs(vals[0]) > 1e-12 * np.abs(vals[0]).max()
    assert np.allclose(ratio[big], 8.0, rtol=0.02)
    with pytest.raises(ValueError):
        en.cubic_components(d, st, P, n=-1)


def test_refined_audit_linear_regime(rng):
    s = random_state(G, rng, 1e-3)
    r = wt.ww_run(s, 1.0, P, checkpoints=[0.25, 0.5, 0.75], dt=0.05)
    audit = en.refined_estimate_audit(r.states, P, n=1)
    assert audit["norm_ratio"] == pytest.approx(1.0, abs=1e-2)
    assert np.isfinite(audit["constant"]) and audit["constant"] >= 0
    with pytest.raises(ValueError):
        en.refined_estimate_audit(r.states[:2], P)


def test_energy_report(rng):
    s = random_state(G, rng, 0.02)
    rep = en.energy_report(s, P)
    assert rep.energy == pytest.approx(en.hamiltonian(s, P))
    assert rep.momentum == pytest.approx(en.momentum(s, P))
    assert len(rep.row()) == len(en.REPORT_COLUMNS)
    assert rep.taylor_min > 0.9 * P.g and rep.jacobian_min == wt.jacobian_min(s)
