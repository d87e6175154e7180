"""
wavemap numerical self-check
Coverage: 8 subsystem checks (seconds) + acceptance-scale runs with --full (minutes to hours)

Usage:
    python selfcheck.py           # quick subsystem checks
    python selfcheck.py --full    # also the long evolutions and the desk-scale bisection
"""
import sys, math, json, time, argparse, tempfile, traceback
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent))

RESULTS = []
WARNINGS = []
ERRORS = []
START_TIME = time.time()

def ok(section, name, detail=""):
    RESULTS.append((section, name, "PASS", detail))
    print(f"  [PASS] {name}" + (f"  → {detail}" if detail else ""))

def warn(section, name, detail=""):
    RESULTS.append((section, name, "WARN", detail))
    WARNINGS.append((section, name, detail))
    print(f"  [WARN] {name}" + (f"  → {detail}" if detail else ""))

def fail(section, name, detail=""):
    RESULTS.append((section, name, "FAIL", detail))
    ERRORS.append((section, name, detail))
    print(f"  [FAIL] {name}" + (f"  → {detail}" if detail else ""))

def check(section_id, name, passed, detail=""):
    (ok if passed else fail)(section_id, name, detail)

def section(name):
    print(f"\n{'='*60}")
    print(f"  {name}")
    print(f"{'='*60}")

def rate(errors):
    """Observed order from errors at successive grid doublings."""
    return [math.log2(a / b) for a, b in zip(errors, errors[1:])]


parser = argparse.ArgumentParser(description="wavemap numerical self-check")
parser.add_argument("--full", action="store_true", help="run the acceptance-scale evolutions too")
ARGS = parser.parse_args()

from core.constants import NUMERICS, REFERENCE, Pole, ScalingMethod, SliceDirection, SearchOutcome
from core.grid import Grid, PARITY_U, PARITY_W, apply_laplacian, inner_product
from core.dynamics import (
    Field3, SimState, constrained_acceleration, energy, static_state, rescaled_static_w,
)
from core.rattle import RattleConfig, RattleIntegrator, grid_force
from core.initial_data import InitialDataParams, build_initial_state, initial_minimum
from core.diagnostics import SliceProfile, extract_slice, hessian_at_origin, profile_deviation, scaling_from_hessian
from core.scaling_fit import REFERENCE_FIT, fit_scaling, synthetic_series
from core.critical_search import SearchConfig, bisect, synthetic_classifier
from core.snapshot import decode_snapshot, encode_snapshot

# ================================================================
# SUBSYSTEM 1: GRID
# ================================================================
section("SUBSYSTEM 1 · GRID  (stencils, variational Laplacian)")
try:
    errors = []
    for n in (33, 65, 129):
        g = Grid(n)
        x, y = g.coordinates()
        f = np.sin(0.5 * np.pi * x) * np.cos(np.pi * y)
        exact = -(0.25 + 1.0) * np.pi ** 2 * f
        lap = apply_laplacian(f, PARITY_U, g)
        errors.append(float(np.max(np.abs(lap - exact))))
    rates = rate(errors)
    check("S1_grid", "Laplacian convergence (u parity)", all(3.5 <= r <= 4.5 for r in rates),
          f"errors={['%.2e' % e for e in errors]} rates={['%.2f' % r for r in rates]}")

    g = Grid(17)
    rng = np.random.default_rng(7)
    a, b = rng.standard_normal(g.shape), rng.standard_normal(g.shape)
    lhs, rhs = inner_product(a, apply_laplacian(b, PARITY_W, g), g), inner_product(apply_laplacian(a, PARITY_W, g), b, g)
    check("S1_grid", "Self-adjointness N=17", abs(lhs - rhs) <= 1e-12 * abs(lhs), f"{lhs:.15g} vs {rhs:.15g}")
except Exception as e:
    fail("S1_grid", "Exception", traceback.format_exc()[-300:])

# ================================================================
# SUBSYSTEM 2: DYNAMICS
# ================================================================
section("SUBSYSTEM 2 · DYNAMICS  (static solution, energies)")
try:
    residuals = []
    for n in (65, 129, 257):
        g = Grid(n)
        st = static_state(g)
        acc = constrained_acceleration(st.q, g)
        x, y = g.coordinates()
        interior = (x <= 0.5) & (y <= 0.5)
        residuals.append(float(np.max(np.sqrt(acc.norm2())[interior])))
    rates = rate(residuals)
    check("S2_dynamics", "Static stationarity order", all(3.5 <= r <= 4.5 for r in rates),
          f"residuals={['%.2e' % r for r in residuals]} rates={['%.2f' % r for r in rates]}")

    g = Grid(161)
    e = energy(static_state(g), g, rho=0.5)
    oracle = 4 * math.pi * 0.25 / 1.25
    check("S2_dynamics", "Local static energy rho=0.5", abs(e.local_potential - oracle) < 0.03 * oracle,
          f"{e.local_potential:.6f} vs {oracle:.6f}")
except Exception as e:
    fail("S2_dynamics", "Exception", traceback.format_exc()[-300:])

# ================================================================
# SUBSYSTEM 3: RATTLE
# ================================================================
section("SUBSYSTEM 3 · RATTLE  (free rotor, static persistence)")
try:
    one = np.ones((1, 1))
    omega, dt = 1.0, 0.01
    state = SimState(q=Field3(one.copy(), 0 * one, 0 * one), p=Field3(0 * one, omega * one, 0 * one))
    rotor = RattleIntegrator(RattleConfig(dt=dt), lambda q: Field3.zeros_like(q.u))
    for _ in range(10_000):
        state, _ = rotor.step(state)
    kinetic = float(state.p.norm2()[0, 0])
    angle = omega * state.t
    position_error = abs(state.q.u[0, 0] - math.cos(angle)) + abs(state.q.v[0, 0] - math.sin(angle))
    check("S3_rattle", "Rotor energy over 1e4 steps", abs(kinetic - omega ** 2) < 1e-10, f"|p|^2={kinetic:.15f}")
    check("S3_rattle", "Rotor stays on the great circle", abs(state.q.w[0, 0]) < 1e-12,
          f"w={state.q.w[0, 0]:.2e}, phase error {position_error:.2e}")

    g = Grid(65)
    st = static_state(g)
    integ = RattleIntegrator(RattleConfig.for_grid(g), grid_force(g))
    s = st
    for _ in range(100):
        s, report = integ.step(s)
    drift = float(np.max(np.abs(s.q.w - st.q.w)))
    resid = float(np.max(np.sqrt(constrained_acceleration(st.q, g).norm2())))
    check("S3_rattle", "Static data 100 steps", drift < 10 * resid * s.t ** 2 + 1e-12,
          f"drift={drift:.2e} residual={resid:.2e} t={s.t:.4f}")
    check("S3_rattle", "Constraint kept", integ.worst_constraint <= NUMERICS.PROJECTION_TOL,
          f"max|phi|={integ.worst_constraint:.2e}")
except Exception as e:
    fail("S3_rattle", "Exception", traceback.format_exc()[-300:])

# ================================================================
# SUBSYSTEM 4: INITIAL DATA
# ================================================================
section("SUBSYSTEM 4 · INITIAL DATA  (ring bump)")
try:
    params = InitialDataParams(A=REFERENCE.LAST_SUBCRITICAL_AMPLITUDE)
    g = Grid(129)
    st = build_initial_state(params, g)
    phi = float(np.max(np.abs(st.q.norm2() - 1.0)))
    tang = float(np.max(np.abs(st.q.dot(st.p))))
    check("S4_initial", "On the sphere", phi < 1e-14, f"max|phi|={phi:.2e}")
    check("S4_initial", "Tangent velocities", tang < 1e-13, f"max|q.p|={tang:.2e}")
    wx = initial_minimum(params, SliceDirection.X_AXIS)
    check("S4_initial", "Analytic w_min(0) on the x-axis", abs(wx - REFERENCE.W0_MIN_X) < 1e-8,
          f"{wx:.8f} vs {REFERENCE.W0_MIN_X}")
    wd = initial_minimum(params, SliceDirection.DIAGONAL)
    if abs(wd - REFERENCE.W0_MIN_DIAG) < 1e-8:
        ok("S4_initial", "Analytic w_min(0) on the diagonal", f"{wd:.8f}")
    else:
        warn("S4_initial", "Analytic w_min(0) on the diagonal",
             f"{wd:.8f} vs {REFERENCE.W0_MIN_DIAG} (grid-sampled reference, see calibrate)")
except Exception as e:
    fail("S4_initial", "Exception", traceback.format_exc()[-300:])

# ================================================================
# SUBSYSTEM 5: DIAGNOSTICS
# ================================================================
section("SUBSYSTEM 5 · DIAGNOSTICS  (Hessian scaling oracle)")
try:
    g = Grid(257)
    r = g.radius()
    for s in (1.0, 0.5, 0.25):
        H = hessian_at_origin(rescaled_static_w(r, s), g)
        sg = scaling_from_hessian(H, ScalingMethod.GAUSS_CURVATURE)
        sm = scaling_from_hessian(H, ScalingMethod.MEAN_CURVATURE)
        check("S5_diagnostics", f"s={s}", abs(sg - s) / s < 1e-4 and abs(sm - s) / s < 1e-4,
              f"gauss={sg:.10f} mean={sm:.10f}")
except Exception as e:
    fail("S5_diagnostics", "Exception", traceback.format_exc()[-300:])

# ================================================================
# SUBSYSTEM 6: SCALING FIT
# ================================================================
section("SUBSYSTEM 6 · SCALING FIT  (self-consistency)")
try:
    times = np.linspace(*REFERENCE_FIT.window, 64)
    series = synthetic_series(REFERENCE_FIT.T, REFERENCE_FIT.b, times)
    result = fit_scaling(series, REFERENCE_FIT.window, init=(0.94, -2.0))
    check("S6_fit", "Recovery of (T, b)",
          abs(result.T - REFERENCE_FIT.T) < 1e-8 and abs(result.b - REFERENCE_FIT.b) < 1e-6 and result.residual < 1e-14,
          f"T={result.T:.10f} b={result.b:.8f} residual={result.residual:.2e}")
except Exception as e:
    fail("S6_fit", "Exception", traceback.format_exc()[-300:])

# ================================================================
# SUBSYSTEM 7: CRITICAL SEARCH
# ================================================================
section("SUBSYSTEM 7 · CRITICAL SEARCH  (synthetic bisection)")
try:
    cfg = SearchConfig(A_lo=0.0, A_hi=1.0, tol_A=1e-6)
    a_star, trace = bisect(cfg, synthetic_classifier(0.5))
    check("S7_search", "Threshold located", abs(a_star - 0.5) <= 1e-6, f"A*={a_star:.9f}, {len(trace)} runs")
    check("S7_search", "Bracket monotone", trace.widths_non_increasing())
except Exception as e:
    fail("S7_search", "Exception", traceback.format_exc()[-300:])

# ================================================================
# SUBSYSTEM 8: SNAPSHOT
# ================================================================
section("SUBSYSTEM 8 · SNAPSHOT  (byte round trip)")
try:
    g = Grid(17)
    st = build_initial_state(InitialDataParams(A=0.5), g)
    blob = encode_snapshot(st, bytes(range(32)))
    _, back = decode_snapshot(blob)
    check("S8_snapshot", "write → read → write", encode_snapshot(back, bytes(range(32))) == blob,
          f"{len(blob)} bytes")
except Exception as e:
    fail("S8_snapshot", "Exception", traceback.format_exc()[-300:])

# ================================================================
# ACCEPTANCE (--full)
# ================================================================
if ARGS.full:
    from core.config import load_config, parse_config_text
    from core.evolution import Evolution
    from core.critical_search import CriticalSearch, resolution_trend
    from core.series import read_series

    work = Path(tempfile.mkdtemp(prefix="wavemap_selfcheck_"))

    section("ACCEPTANCE · CONSTRAINTS AND ENERGY  (N=129, A=0.6, t=1)")
    try:
        cfg = parse_config_text(
            "[grid]\nn = 129\n[time]\nt_end = 1.0\n[initial_data]\nA = 0.6\nB = 0.8\n"
        )
        summary = Evolution(cfg, work / "constraints").run()
        status = summary["integrator"]
        check("A1", "max|phi| <= 1e-12", status["worst_constraint_residual"] <= 1e-12,
              f"{status['worst_constraint_residual']:.2e}")
        check("A1", "max|q.p| <= 1e-11", status["worst_tangency_residual"] <= 1e-11,
              f"{status['worst_tangency_residual']:.2e}")
        _, _, en = read_series(work / "constraints" / "energy.csv")
        rel = (en["E_tot"] - en["E_tot"][0]) / en["E_tot"][0]
        slope = float(np.polyfit(en["t"], rel, 1)[0])
        check("A2", "No secular energy drift", abs(slope) < 1e-6, f"slope={slope:.2e}")
    except Exception as e:
        fail("A1", "Exception", traceback.format_exc()[-300:])

    section("ACCEPTANCE · STATIC PERSISTENCE  (1000 steps)")
    try:
        for n in (65, 129):
            g = Grid(n)
            st = static_state(g)
            integ = RattleIntegrator(RattleConfig.for_grid(g), grid_force(g))
            s = st
            for _ in range(1000):
                s, _ = integ.step(s)
            drift = float(np.max(np.abs(s.q.w - st.q.w)))
            resid = float(np.max(np.sqrt(constrained_acceleration(st.q, g).norm2())))
            check("A3", f"N={n} drift bound", drift < 10 * resid * s.t,
                  f"drift={drift:.2e} bound={10 * resid * s.t:.2e}")
    except Exception as e:
        fail("A3", "Exception", traceback.format_exc()[-300:])

    section("ACCEPTANCE · DESK-SCALE BLOW-UP DICHOTOMY  (N=161, B=0.8)")
    try:
        search_ini = (
            "[grid]\nn = {n}\n[time]\nt_end = 1.5\n[initial_data]\nA = 0.9\nB = 0.8\n"
            "[search]\nA_lo = 0.6\nA_hi = 1.6\ntol_A = {tol}\nmax_runs = 40\n"
        )
        cfg = parse_config_text(search_ini.format(n=161, tol=1e-6))
        search = CriticalSearch(cfg, work / "search")
        a_star, trace = search.run()
        ok("A6", "Critical amplitude located", f"A*(161)={a_star:.8f} ({len(trace)} runs)")
        runs = work / "search" / "runs"
        summaries = {p.parent: json.loads(p.read_text()) for p in runs.glob("*/summary.json")}
        sub_dir, sub = max(((d, s) for d, s in summaries.items() if s["outcome"] == "dispersed"),
                           key=lambda item: item[1]["A"])
        sup = min((s for s in summaries.values() if s["outcome"] in ("flipped", "projection-failure")),
                  key=lambda s: s["A"])
        check("A6", "Sub-critical decrease-hover-increase", bool(sub["scaling"].get("decrease_hover_increase")),
              f"A={sub['A']:.8f} s_min={sub['scaling'].get('s_min')}")
        check("A6", "Super-critical flip", sup["outcome"] == "flipped", f"A={sup['A']:.8f} {sup['outcome']}")

        coarse, _ = CriticalSearch(parse_config_text(search_ini.format(n=81, tol=1e-4)), work / "search_81").run()
        (ok if resolution_trend({81: coarse, 161: a_star}) else warn)(
            "A6", "A* non-decreasing with N", f"A*(81)={coarse:.6f} A*(161)={a_star:.8f}")

        iso = sub.get("isotropy")
        if iso:
            ratio = iso["w_min_initial"]["deviation"] / max(iso["t_min"]["deviation"], iso["w_min"]["deviation"], 1e-300)
            check("A7", "Isotropization", ratio >= 100.0, f"t=0 / t_min deviation ratio {ratio:.1f}")
        else:
            warn("A7", "Isotropization", "no isotropy report in the near-critical run")

        # hover plateau: the sample closest to the minimum of s(t)
        _, _, en = read_series(sub_dir / "energy.csv")
        at = int(np.argmin(np.abs(en["t"] - sub["scaling"]["t_s_min"])))
        kin_peak = float(np.max(en["E_kin_local"][:at + 1]))
        kin_floor = float(np.min(en["E_kin_local"][:at + 1]))
        kin = float(en["E_kin_local"][at])
        check("A8", "Local kinetic energy drains toward its minimum",
              kin_peak > 0.0 and kin - kin_floor <= 0.25 * (kin_peak - kin_floor),
              f"E_kin_local={kin:.4e} (peak {kin_peak:.4e}, floor {kin_floor:.4e}) at t={en['t'][at]:.6f}")
        pot = float(en["E_pot_local"][at])
        check("A8", "Local potential within 10% of 4 pi at the plateau",
              abs(pot - NUMERICS.STATIC_ENERGY) < 0.1 * NUMERICS.STATIC_ENERGY, f"E_pot_local={pot:.4f}")
    except Exception as e:
        fail("A6", "Exception", traceback.format_exc()[-300:])

    section("ACCEPTANCE · EQUIVARIANT REGRESSION  (configs/equivariant.ini, B=1)")
    try:
        g = Grid(257)
        st = build_initial_state(InitialDataParams(A=0.6, B=1.0), g)
        dev0 = profile_deviation(extract_slice(st.q.w, g, SliceDirection.X_AXIS),
                                 extract_slice(st.q.w, g, SliceDirection.DIAGONAL))
        check("A9", "N=257 t=0 slices agree to 1e-6", dev0 < 1e-6, f"deviation={dev0:.2e}")

        cfg = load_config(Path(__file__).parent / "configs" / "equivariant.ini")
        evo = Evolution(cfg, work / "equivariant")
        evo.run()
        g = evo.grid
        for t_slice in cfg.diagnostics.slice_times:
            tag = f"t={t_slice:.6f}"
            _, _, xs = read_series(work / "equivariant" / "slices" / f"{tag}_x_axis.csv")
            _, _, ds = read_series(work / "equivariant" / "slices" / f"{tag}_diagonal.csv")
            dev = profile_deviation(SliceProfile(SliceDirection.X_AXIS, xs["r"], xs["w"], t_slice),
                                    SliceProfile(SliceDirection.DIAGONAL, ds["r"], ds["w"], t_slice))
            check("A9", f"N={g.n} {tag} slices agree to 2e-3", dev < 2e-3, f"deviation={dev:.2e}")
    except Exception as e:
        fail("A9", "Exception", traceback.format_exc()[-300:])

# ================================================================
# SUMMARY
# ================================================================
section("SUMMARY")
print(f"  {len(RESULTS)} checks · {len(WARNINGS)} warnings · {len(ERRORS)} failures · "
      f"{time.time() - START_TIME:.1f}s")
for s, name, detail in ERRORS:
    print(f"  ✗ {s} · {name}: {detail}")
sys.exit(1 if ERRORS else 0)
