"""Acceptance suite: one test per criterion, summarized by ``conftest.py``.

Every test prints its measured quantities, so ``pytest -s`` shows the numbers
behind each verdict.
"""

from pathlib import Path

import numpy as np
import pytest

from onsager_flux.fitting import fit_power_law
from onsager_flux.flux import (
    density_mechanism,
    flux_cet,
    flux_dr,
    grid_scales,
    sweep,
    trilinear_cet,
    trilinear_dr,
    tube_mass,
)
from onsager_flux.grid import GridField, read_field, sample_function, write_field
from onsager_flux.kernels import kernel_for, mollify
from onsager_flux.norms import bmo_commutator_ratio
from onsager_flux.synth import (
    burgers_shock,
    random_fourier_field,
    shear_layer,
    taylor_green,
    weierstrass_field,
)
from onsager_flux.traces import Interface, bd_jump_formula_check, jump_residuals

N = 256
SHEET = Interface((0.0, 1.0), 0.5)
SHOCK = Interface((1.0, 0.0), 0.5)
README = Path(__file__).resolve().parents[1] / "README.md"


def test_criterion_1_smooth_conservation():
    u, p = taylor_green(N)
    res = sweep(u, p, "bump", grid_scales(u, [4, 8, 16, 32]))
    dr, cet = res.fits["dr"], res.fits["cet"]
    print(f"slope_dr={dr.slope:.3f} r2={dr.r2:.5f} slope_cet={cet.slope:.3f} r2={cet.r2:.5f}")
    assert dr.slope >= 1.9 and cet.slope >= 1.9
    assert dr.r2 >= 0.98 and cet.r2 >= 0.98


def test_criterion_2_critical_scaling():
    slopes = []
    for theta in (0.2, 1 / 3, 0.5):
        u = weierstrass_field(theta, 6, 7, N)
        s = sweep(u, None, "bump", grid_scales(u, [4, 8, 16, 32]), variants=("dr",)).fits["dr"].slope
        print(f"theta={theta:.4f} slope={s:.3f} target={3 * theta - 1:.3f}")
        assert abs(s - (3 * theta - 1)) <= 0.25
        slopes.append(s)
    assert slopes[0] < slopes[1] < slopes[2]


def test_criterion_3_persistent_dissipation_and_kernel_independence():
    u = burgers_shock(1.0, -1.0, 0.0, N)
    masses = {}
    for prof in ("bump", "quartic"):
        for k in (4, 8, 16):
            F = flux_dr(u, kernel_for(u, prof, k / N))
            masses[prof, k] = tube_mass(F, SHOCK, 0.25)
            print(f"{prof} ell={k}h mass={masses[prof, k]:.5f}")
            assert masses[prof, k] == pytest.approx(2.0, rel=0.04)
    for k in (4, 8, 16):
        assert masses["bump", k] == pytest.approx(masses["quartic", k], rel=0.05)


def test_criterion_4_sheet_conservation():
    u, _ = shear_layer(1.0, -1.0, 0.0, N)
    phi = sample_function(2, 1, N, 1.0, lambda x, y: np.cos(2 * np.pi * x) * np.sin(2 * np.pi * y) + 0.5)
    ells = [k / N for k in (4, 8, 16, 32)]
    pairing = []
    for ell in ells:
        K = kernel_for(u, "bump", ell)
        dr = flux_dr(u, K).max_abs()
        cet = flux_cet(u, K).values
        pairing.append(abs(float(np.sum(phi.data * cet.data) * cet.cell_volume)))
        print(f"ell={ell:.5f} max|D_DR|={dr:.3e} |<phi, D_CET>|={pairing[-1]:.3e}")
        assert dr <= 1e-13
    # a pairing that vanishes identically decays faster than any power of ell
    if max(pairing) > 1e-13:
        assert fit_power_law(ells, pairing).slope >= 0.9


def test_criterion_5_jump_condition_chain():
    u, p = shear_layer(1.0, -1.0, 0.0, N)
    sheet = jump_residuals(u, p, SHEET, [8 / N, 4 / N, 2 / N])
    agg = sheet.aggregates
    print(f"sheet R_inc={agg['R_inc']:.2e} R_p={agg['R_p']:.2e} |D_sigma|={agg['D_sigma_total']:.2e}")
    assert agg["R_inc"] <= 1e-10 and agg["R_p"] <= 1e-10 and agg["D_sigma_total"] <= 1e-10

    b = burgers_shock(1.0, -1.0, 0.0, N)
    shock = jump_residuals(b, None, SHOCK, [8 / N, 4 / N, 2 / N])
    d_sigma = shock.aggregates["D_sigma_total"] / shock.measure
    print(f"burgers R_inc={shock.aggregates['R_inc']:.4f} |D_sigma| per length={d_sigma:.4f}")
    assert shock.aggregates["R_inc"] >= 1
    assert d_sigma == pytest.approx(1.0, rel=0.02)

    res = sweep(b, None, "bump", grid_scales(b, [4, 8, 16]), variants=("dr",))
    assert res.nonsolution
    dr_mass = tube_mass(flux_dr(b, kernel_for(b, "bump", 8 / N)), SHOCK, 0.25)
    print(f"DR mass per interface={dr_mass:.4f} vs balance-form {d_sigma:.4f}")
    assert dr_mass == pytest.approx(2.0, rel=0.04)
    assert dr_mass / d_sigma == pytest.approx(2.0, abs=0.12)


def test_criterion_6_bd_jump_formula():
    u, _ = shear_layer(1.0, -1.0, 0.0, N)
    rep = bd_jump_formula_check(u, SHEET, [4 / N])
    print(f"tube={rep.tube_mass[0]:.5f} jump={rep.jump_mass:.5f} ratio={rep.ratio[0]:.5f}")
    assert rep.ratio[0] == pytest.approx(1.0, abs=0.1)


def test_criterion_7_density_mechanism():
    u = weierstrass_field(0.4, 6, 7, N)
    rep = density_mechanism(u, "bump", grid_scales(u, [2, 4, 8]), grid_scales(u, [4, 8, 16]))
    print(f"telescoping error={rep.telescoping_error:.2e}")
    assert rep.telescoping_error <= 1e-12
    deltas = sorted({r["delta"] for r in rep.rows})
    smallest = min(r["ell"] for r in rep.rows)
    remainders = []
    for delta in deltas:
        smooth = rep.column("t_smooth_leg", delta)  # ordered by decreasing ell
        print(f"delta={delta:.5f} smooth leg={np.round(smooth, 5)}")
        assert np.all(np.diff(smooth) < 0)
        remainders.append(next(r["t_remainder"] for r in rep.rows if r["delta"] == delta and r["ell"] == smallest))
    print(f"remainder at smallest ell by increasing delta={np.round(remainders, 5)}")
    assert np.all(np.diff(remainders) > 0)


def test_criterion_8_bmo_bd_bound():
    tg, _ = taylor_green(N)
    sheet, _ = shear_layer(1.0, -1.0, 0.0, N)
    smooth, _ = shear_layer(1.0, -1.0, 0.1, N)
    pairs = {
        "weierstrass/smooth-shear": (weierstrass_field(0.4, 6, 7, N), smooth),
        "sheet/taylor-green": (sheet, tg),
        "random/taylor-green": (random_fourier_field(1 / 3, 0, N), tg),
    }
    scales = [k / N for k in (2, 4, 8, 16, 32)]
    for name, (v, u) in pairs.items():
        rep = bmo_commutator_ratio(v, u, "bump", scales)
        print(f"{name} max/median={rep.details['max_over_median']:.3f}")
        assert len(rep.values) == 5 and np.all(np.isfinite(rep.values))
        assert rep.details["max_over_median"] <= 10


def test_criterion_9_oracle_equivalences(tmp_path):
    rng = np.random.default_rng(9)
    u = GridField(rng.standard_normal((32, 32, 2)), (1.0, 1.0))
    K = kernel_for(u, "bump", 4 / 32)
    direct, spectral = mollify(u, K, "direct").data, mollify(u, K, "fft").data
    rel = np.abs(direct - spectral).max() / np.abs(direct).max()

    clone = lambda f: f.with_data(f.data.copy())
    v = GridField(rng.standard_normal((64, 64, 2)), (1.0, 1.0))
    Kv = kernel_for(v, "bump", 6 / 64)
    gap_dr = np.abs(trilinear_dr(v, clone(v), clone(v), Kv).values.data - flux_dr(v, Kv).values.data).max()
    # the diagonal of the full-gradient form is the symmetric contraction R : E u_ell
    gap_cet = np.abs(trilinear_cet(v, clone(v), clone(v), Kv).values.data - flux_cet(v, Kv).values.data).max()

    path = tmp_path / "u.onsf"
    write_field(path, v)
    back = read_field(path)
    print(f"mollify rel={rel:.2e} dr collapse={gap_dr:.2e} cet collapse={gap_cet:.2e}")
    assert rel <= 1e-10
    assert gap_dr <= 1e-13 and gap_cet <= 1e-13
    assert back.data.tobytes() == v.data.tobytes() and back.lengths == v.lengths


def test_criterion_10_scope_statement():
    text = README.read_text()
    assert "not reproduced" in text
    assert "finite-resolution surrogates" in text
    for item in ("criterion 4", "criterion 5", "criterion 6"):
        assert item in text.lower()
