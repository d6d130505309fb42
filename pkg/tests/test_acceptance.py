"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -v`` and read the "acceptance criteria"
section of the terminal summary.
"""

import json
import math
import time
import warnings

import numpy as np

from eitvapor import AtomicSystem, FieldDrive, Spectrum, preset
from eitvapor.atomsys import DetuningGrid, SchemeKind
from eitvapor.cli import ScenarioConfig, fit_file, run_scan, run_spectrum
from eitvapor.lineshape import ModelKind, fit
from eitvapor.motion import doppler_chi, eit_width_doppler
from eitvapor.multilevel import CouplingNode, ProbeRoot, chi_nested, spectrum_nested
from eitvapor.optics import (MediumSpec, figures_of_merit, group_velocity, optical_depth,
                             transmission_spectrum)
from eitvapor.steady import (absorption_on_resonance, chi_numeric, chi_two_level,
                             chi_weak_probe, gamma_eit, raman_params)

MHZ = 2 * np.pi * 1e6
K_D1 = 2 * np.pi / 795e-9


def test_c1_numeric_solver_matches_weak_probe_formula(verdict):
    rng = np.random.default_rng(7)
    t0 = time.perf_counter()
    worst, count = 0.0, 0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for ladder in (False, True):
            for _ in range(500 if ladder else 1000):
                g13 = rng.uniform(0.5, 2.0)
                g12 = g13 * 10 ** rng.uniform(-4, -1)
                r = rng.uniform(0.1, 0.9)
                kw = dict(gamma13=g13, gamma3=rng.uniform(0.2, 2.0) * g13, gamma12=g12,
                          r31=r, r32=1 - r)
                if ladder:
                    kw.update(scheme_kind=SchemeKind.LADDER, gamma2=rng.uniform(0, 2) * g12)
                sys = AtomicSystem(**kw)
                oc = rng.uniform(0.1, 3.0) * g13 * np.exp(2j * np.pi * rng.uniform())
                d1 = rng.uniform(-5, 5) * g13
                d = rng.uniform(-1, 1) * g13
                scale = max(abs(oc), g13, abs(d1), abs(d))
                d2 = d - d1 if ladder else d1 - d
                probe = FieldDrive(1e-4 * scale, d1)
                control = FieldDrive(oc, d2, role="Control")
                num = chi_numeric(sys, probe, control, check_linearity=False).value
                ana = chi_weak_probe(sys, oc, d1, d).value
                worst = max(worst, abs(num - ana) / abs(ana))
                count += 1
    elapsed = time.perf_counter() - t0
    verdict(1, count >= 1000 and worst < 1e-3 and elapsed < 30,
            f"{count} random sets, worst relative error {worst:.2e} (< 1e-3), {elapsed:.1f} s")


def test_c2_perfect_transparency(verdict):
    rng = np.random.default_rng(2)
    sys = AtomicSystem(gamma12=0.0)
    worst = 0.0
    for oc in 10 ** rng.uniform(-4, 2, 200):
        d1 = rng.uniform(-20, 20)
        ratio = abs(chi_weak_probe(sys, oc, d1, 0.0).value) / abs(chi_two_level(sys, d1).value)
        worst = max(worst, ratio)
    verdict(2, worst < 1e-12, f"max |chi|/|chi_2level| = {worst:.1e} (< 1e-12)")


def test_c3_homogeneous_linewidth_law(verdict):
    t0 = time.perf_counter()
    sys = AtomicSystem(gamma12=1e-3)
    worst = 0.0
    for oc in np.linspace(0.05, 0.5, 10):
        g = gamma_eit(sys, oc)
        d = np.linspace(-10 * g, 10 * g, 801)
        res = fit(d, ModelKind.LORENTZIAN, y=absorption_on_resonance(sys, oc, d))
        worst = max(worst, abs(res.hwhm / g - 1))
    elapsed = time.perf_counter() - t0
    verdict("3a", worst < 0.01 and elapsed < 60,
            f"homogeneous HWHM vs gamma12 + Oc^2/gamma13 over 10 points, worst {worst:.1e} (< 1e-2)")


def test_c3_doppler_linewidth_law(verdict):
    # sigma_Dop / gamma13 = 100; the 20 MHz point reproduces the thermal-vapor example
    t0 = time.perf_counter()
    sys = AtomicSystem(gamma13=2.3 * MHZ, gamma3=4.6 * MHZ, gamma12=0.0, density=1e16)
    sigma = 230 * MHZ
    ratios = {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for oc_mhz in (10, 15, 20, 30, 40):
            oc = oc_mhz * MHZ
            w = eit_width_doppler(sys, oc, sigma)
            d = np.linspace(-8 * w, 8 * w, 801)
            chi, _ = doppler_chi(sys, oc, d, d, K_D1, 0.0, sigma / K_D1)
            ratios[oc_mhz] = fit(d, ModelKind.LORENTZIAN, y=chi.imag).hwhm / w
    elapsed = time.perf_counter() - t0
    worst = max(abs(r - 1) for r in ratios.values())
    table = ", ".join(f"{k} MHz: {v:.3f}" for k, v in ratios.items())
    verdict("3b", worst < 0.05 and elapsed < 60,
            f"Doppler-regime fitted HWHM / closed-form width ({table}); worst deviation "
            f"{worst:.1%} (< 5%)")


def test_c4_power_broadening_ratio(verdict):
    t0 = time.perf_counter()
    cfg = ScenarioConfig.from_dict({
        "schema_version": 1, "preset": "rb87_d1_zeeman", "frequency_unit": "MHz",
        "motion_mode": "CollisionalFormula", "grid": {"span": 0.3, "points": 3001},
        "fit": {"model": "Lorentzian"}})
    table = run_scan(cfg, "fields.control.rabi", [1.9, 1.9 * math.sqrt(5.5 / 1.3)])
    fwhm = table.column("fit_fwhm")
    ratio = fwhm[1] / fwhm[0]
    elapsed = time.perf_counter() - t0
    verdict(4, abs(ratio / 4.2 - 1) < 0.10 and elapsed < 10,
            f"FWHM {fwhm[0] / (2 * np.pi * 1e3):.1f} kHz -> {fwhm[1] / (2 * np.pi * 1e3):.1f} kHz, "
            f"ratio {ratio:.3f} (4.2 +/- 10%), {elapsed:.1f} s")


def test_c5_dicke_angle_law(verdict):
    t0 = time.perf_counter()
    sys, (probe, control), motion = preset("rb87_d1_zeeman")
    oc = 0.2
    cfg = ScenarioConfig.from_dict({
        "schema_version": 1, "preset": "rb87_d1_zeeman", "frequency_unit": "MHz",
        "fields": {"control": {"rabi": oc}}, "motion_mode": "DickeSubstitution",
        "grid": {"span": 0.2, "points": 2001}})
    table = run_scan(cfg, "fields.control.angle", list(np.linspace(0, 1.5e-3, 11)))
    law = table.width_law
    dk2 = motion.diffusion * probe.k * control.k
    offset = sys.gamma12 + (oc * MHZ) ** 2 / sys.gamma13
    e_curv = law["curvature"] / dk2 - 1
    e_off = law["offset"] / offset - 1
    elapsed = time.perf_counter() - t0
    verdict(5, abs(e_curv) < 0.05 and abs(e_off) < 0.05 and elapsed < 30,
            f"curvature / D k_p k_c - 1 = {e_curv:+.2%}, offset / (gamma12 + Oc^2/gamma13) - 1 "
            f"= {e_off:+.2%} (both < 5%), {elapsed:.1f} s")


def test_c6_voigt_quadrature(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(10):
        sys = AtomicSystem(gamma13=1.0, gamma12=10 ** rng.uniform(-3, -1.5))
        sigma, k_eff, oc = rng.uniform(0.2, 1.5), rng.uniform(0, 0.05), rng.uniform(0, 1)
        d1 = rng.uniform(-2, 2, 41)
        d = np.linspace(-0.5, 0.5, 41)
        gh, _ = doppler_chi(sys, oc, d1, d, 1.0, k_eff, sigma, method="gauss_hermite", tol=1e-8)
        tz, _ = doppler_chi(sys, oc, d1, d, 1.0, k_eff, sigma, method="trapezoid")
        worst = max(worst, float(np.max(np.abs(gh - tz) / np.abs(tz))))

    d = np.linspace(-3, 3, 61)
    sys = AtomicSystem(gamma13=1.0, gamma12=1e-3)
    narrow, _ = doppler_chi(sys, 0.0, d, d, 1.0, 0.0, 1e-6)
    ref = chi_weak_probe(sys, 0.0, d, d).value
    e_lor = float(np.max(np.abs(narrow - ref) / np.abs(ref)))

    g = 1e-5
    sysg = AtomicSystem(gamma13=g, gamma3=2 * g, gamma12=1e-7)
    broad, _ = doppler_chi(sysg, 0.0, d, d, 1.0, 0.0, 1.0)
    gauss = sysg.chi_scale * np.pi * np.exp(-d ** 2 / 2) / np.sqrt(2 * np.pi)
    e_gau = float(np.max(np.abs(broad.imag - gauss)) / gauss.max())
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-6 and e_lor < 1e-4 and e_gau < 1e-4 and elapsed < 30
    verdict(6, ok, f"GH vs trapezoid worst {worst:.1e} (< 1e-6); Lorentzian limit {e_lor:.1e}, "
                   f"Gaussian limit {e_gau:.1e} (< 1e-4); {elapsed:.1f} s")


def test_c7_raman_regime(verdict):
    t0 = time.perf_counter()
    sys = AtomicSystem(gamma12=1e-3)
    oc, d2 = 0.3, 30.0
    g_r, d_r = raman_params(sys, oc, d2)
    d = np.linspace(d_r - 10 * g_r, d_r + 10 * g_r, 2001)
    y = chi_weak_probe(sys, oc, d2 + d, d).value.imag
    res = fit(d, ModelKind.GENERALIZED_LORENTZIAN, y=y)
    e_pos = res.center / d_r - 1
    e_wid = res.hwhm / g_r - 1

    rms = {}
    for d2 in (0.0, -1.0, -3.0, -10.0):
        gw = sys.gamma12 + oc ** 2 / (1 + d2 ** 2)
        c0 = oc ** 2 * d2 / (1 + d2 ** 2)
        d = np.linspace(c0 - 2 * gw, c0 + 2 * gw, 1001)
        y = chi_weak_probe(sys, oc, d2 + d, d).value.imag
        r = fit(d, ModelKind.GENERALIZED_LORENTZIAN, y=y, fit_c=True)
        rms[d2] = r.rms_residual / np.abs(y).max()
    worst = max(rms.values())
    elapsed = time.perf_counter() - t0
    ok = abs(e_pos) < 0.02 and abs(e_wid) < 0.05 and worst < 0.01 and elapsed < 30
    verdict(7, ok, f"peak/delta_R - 1 = {e_pos:+.2%} (< 2%), HWHM/gamma_R - 1 = {e_wid:+.2%} "
                   f"(< 5%), generalized-Lorentzian rms/peak worst {worst:.1e} (< 1e-2)")


def test_c8_nested_reduction(verdict):
    sys = AtomicSystem(gamma12=2e-3)
    oc = 0.4 - 0.2j
    worst1 = 0.0
    for d1 in np.linspace(-3, 3, 13):
        for d in np.linspace(-0.5, 0.5, 11):
            root = ProbeRoot(1.0, sys.gamma13, d1,
                             (CouplingNode(oc, sys.gamma12, d),))
            nested = 1j * sys.chi_scale / sys.gamma13 * chi_nested(root)
            ref = chi_weak_probe(sys, oc, d1, d).value
            worst1 = max(worst1, abs(nested - ref) / abs(ref))

    a0, g, g1, g2, g21 = 0.7, 1.0, 1e-3, 0.05, 0.02
    o1, o2, o21 = 0.3, 0.5j, 0.8
    dc1, dc2, dc21 = 0.1, -0.2, 0.35
    root = ProbeRoot(a0, g, 0.0, (
        CouplingNode(o1, g1, field_detuning=dc1, emission=True),
        CouplingNode(o2, g2, field_detuning=dc2, emission=False, children=(
            CouplingNode(o21, g21, field_detuning=dc21, emission=False),)),
    ))
    grid = DetuningGrid(-2.0, 2.0, 201)
    spec = spectrum_nested(root, grid, {"root": 1.0})
    x = grid.values
    dl1, dl2 = x - dc1, x + dc2
    dl21 = dl2 + dc21
    hand = a0 * g / (g - 1j * x + abs(o1) ** 2 / (g1 - 1j * dl1)
                     + abs(o2) ** 2 / (g2 - 1j * dl2 + abs(o21) ** 2 / (g21 - 1j * dl21)))
    worst2 = float(np.max(np.abs(spec.chi - hand) / np.abs(hand)))
    verdict(8, worst1 < 1e-12 and worst2 < 1e-12,
            f"depth-1 tree vs three-level chi {worst1:.1e}; two-branch tree vs hand-coded "
            f"expression over 201 points {worst2:.1e} (both < 1e-12)")


def test_c9_slow_light_consistency(verdict):
    t0 = time.perf_counter()
    sys = AtomicSystem(gamma13=1.0, gamma12=1e-4, density=1e17)
    medium = MediumSpec(20.0 / optical_depth(sys, K_D1, 1.0), sys, K_D1)
    ratios = []
    for oc in np.linspace(0.05, 0.25, 20):
        g = gamma_eit(sys, oc)
        d = np.linspace(-12 * g, 12 * g, 2401)
        spec = Spectrum(d, chi_weak_probe(sys, oc, d, d).value)
        fom = figures_of_merit(transmission_spectrum(spec, medium))
        ratios.append(group_velocity(spec, medium).delay_numeric / fom.delay)
    lo, hi = min(ratios), max(ratios)

    oc = 0.15
    g = gamma_eit(sys, oc)
    length = 25.0 / optical_depth(sys, K_D1, 1.0) / (1 - sys.gamma12 / g)
    d = np.linspace(-12 * g, 12 * g, 2401)
    spec = Spectrum(d, chi_weak_probe(sys, oc, d, d).value)
    fom = figures_of_merit(spec, MediumSpec(length, sys, K_D1))
    e_tbp = fom.tbp / math.sqrt(fom.od_eit) - 1
    elapsed = time.perf_counter() - t0
    ok = lo > 0.5 and hi < 2.0 and abs(e_tbp) < 0.15 and abs(fom.od_eit / 25 - 1) < 0.05 \
        and elapsed < 60
    verdict(9, ok, f"numeric delay / (OD_EIT/gamma_EIT) in [{lo:.3f}, {hi:.3f}] over 20 points "
                   f"(within x2); at OD_EIT = {fom.od_eit:.1f}, B*tau/sqrt(OD_EIT) - 1 = "
                   f"{e_tbp:+.1%} (< 15%)")


def test_c10_determinism_and_round_trip(verdict, tmp_path):
    config = {"schema_version": 1, "preset": "generic_gamma13", "frequency_unit": "gamma13",
              "fields": {"control": {"rabi": 0.05}}, "grid": {"span": 0.05, "points": 801},
              "fit": {"model": "Lorentzian"}}
    for tag in "ab":
        run_spectrum(config, out_dir=tmp_path / tag, formats=["csv", "json"])
    same_csv = (tmp_path / "a/spectrum.csv").read_bytes() == (tmp_path / "b/spectrum.csv").read_bytes()
    ja, jb = (json.loads((tmp_path / t / "report.json").read_text()) for t in "ab")
    for doc in (ja, jb):
        doc["provenance"].pop("timestamp", None)
        doc.pop("artifacts", None)
    same_json = ja == jb

    sys = AtomicSystem(gamma12=1e-3)
    g = gamma_eit(sys, 0.05)
    res = fit_file(tmp_path / "a/spectrum.csv", "Lorentzian", channel="im_chi")
    e_fit = res.hwhm / g - 1
    verdict(10, same_csv and same_json and abs(e_fit) < 0.01,
            f"byte-identical CSV: {same_csv}; JSON equal apart from timestamp: {same_json}; "
            f"CSV fit recovers gamma_EIT to {e_fit:+.2%} (< 1%)")
