"""Time integration: CFL control, the coupled step, statuses, and the
conservation/monotonicity behavior of each flow."""

import math

import numpy as np
import pytest

from riccilab.flows import (BLOWUP, BUDGET, BUFFER_BREACH, COMPLETED,
                            FlowProblem, FlowState, IntegratorSpec, cfl_dt,
                            flow_step, form_heat_step, gauge_diffusion_step,
                            ricci_flow_step, run_flow, scalar_heat_step,
                            stage_curvature)
from riccilab.functionals import integrate
from riccilab.geometry import (Grid2D, OneFormField, ScalarField,
                               conformal_metric, flat_metric, warped_metric)
from riccilab.oracles import TrigMode, flat_spectral_oracle
from riccilab.scenario import FormSpec, ProbeSpec, RunSetup, build, make_scenario


def _state(grid, metric, **kw):
    return FlowState(t=0.0, grid=grid, metric=metric, **kw)


# ----------------------------------------------------------------- CFL
def test_cfl_flat_torus_exact(torus64, flat64):
    spec = IntegratorSpec(cfl=0.2)
    st = _state(torus64, flat64)
    h = torus64.hx
    assert cfl_dt(st, spec, sup_R=0.0) == pytest.approx(0.2 * h * h, rel=1e-12)


def test_cfl_smaller_on_cigar(cigar_grid, cigar_metric):
    # equal spacing comparison: curved metric with sup R = 4 must step slower
    flat_grid = Grid2D.torus(cigar_grid.nx, cigar_grid.ny,
                             cigar_grid.lx, cigar_grid.ly)
    spec = IntegratorSpec(cfl=0.2)
    dt_flat = cfl_dt(_state(flat_grid, flat_metric(flat_grid)), spec, sup_R=0.0)
    dt_cigar = cfl_dt(_state(cigar_grid, cigar_metric), spec, sup_R=4.0)
    assert dt_cigar < dt_flat


def test_cfl_monotone_on_neck_run():
    # at the neck scenario's native resolution the inverse-metric spacing term
    # dominates the rate, and the step size shrinks monotonically as the
    # axial metric contracts over the shoulders
    spec = make_scenario(name="neck-dt", family="warped-cylinder", nx=256, ny=16,
                         lx=20.0, t_final=0.2, cadence=2, monitor_energy=False)
    traj = run_flow(spec, collect_snapshots=False)
    dts = [r.dt for r in traj.records[1:-1]]   # final record repeats a clipped dt
    assert all(b <= a + 1e-15 for a, b in zip(dts, dts[1:]))
    assert dts[-1] < dts[0]


def test_integrator_spec_validation():
    assert IntegratorSpec(cfl=0.7).validate()
    assert IntegratorSpec(scheme="euler").validate()
    assert not IntegratorSpec().validate()


# ----------------------------------------------------------------- Ricci flow
def test_flat_torus_static():
    spec = make_scenario(name="flat", family="flat-torus", nx=32, ny=32,
                         t_final=0.2, cadence=5)
    traj = run_flow(spec)
    assert traj.status == COMPLETED
    final = traj.snapshots[-1].metric
    assert np.max(np.abs(final.gxx - 1.0)) == 0.0
    assert np.max(np.abs(final.gtt - 1.0)) == 0.0


def test_conformal_torus_gauss_bonnet():
    spec = make_scenario(name="gb", family="conformal-torus", nx=64, ny=64,
                         metric_amplitude=0.1, t_final=0.2, cadence=5)
    traj = run_flow(spec)
    for snap in traj.snapshots:
        cv = stage_curvature(snap.metric, snap.grid, "auto")
        total = integrate(cv.scalar, snap.metric, snap.grid)
        assert abs(total) < 1e-6


def test_cigar_curvature_peak_short_run():
    spec = make_scenario(name="cigar-short", family="conformal-plane",
                         nx=257, ny=257, lx=16.0, ly=16.0, cfl=0.5,
                         t_final=0.005, cadence=50, buffer_threshold=1.0,
                         monitor_energy=False)
    traj = run_flow(spec, collect_snapshots=False)
    assert traj.status == COMPLETED
    for rec in traj.records:
        assert 3.92 <= rec.sup_R <= 4.08


def test_general_path_volume_response():
    # d/dt int dv = -int R dv; on the torus the right side vanishes by
    # topology, so the volume must be conserved up to time-integration error,
    # vanishing at order >= 1.9 under refinement
    drifts = []
    for nx in (32, 64):
        spec = make_scenario(name=f"vol-{nx}", family="conformal-torus",
                             nx=nx, ny=nx, metric_amplitude=0.2,
                             metric_path="general", t_final=0.05, cadence=1,
                             monitor_energy=False)
        traj = run_flow(spec, collect_snapshots=False)
        vols = np.array([r.vol for r in traj.records])
        drifts.append(np.max(np.abs(vols - vols[0])) / vols[0])
    assert drifts[0] < 1e-7
    assert math.log2(drifts[0] / drifts[1]) >= 1.9


def test_reduced_and_general_paths_agree():
    final = {}
    for path in ("auto", "general"):
        spec = make_scenario(name=f"path-{path}", family="conformal-torus",
                             nx=64, ny=64, metric_amplitude=0.1,
                             metric_path=path, t_final=0.05, cadence=10,
                             monitor_energy=False)
        final[path] = run_flow(spec).snapshots[-1].metric
    gap = np.max(np.abs(final["auto"].gxx - final["general"].gxx))
    assert 0 < gap < 1e-4


# ----------------------------------------------------------------- form heat flow
def test_harmonic_form_fixed_on_flat():
    spec = make_scenario(name="dtheta-flat", family="flat-torus", nx=32, ny=32,
                         forms=[FormSpec("main", "dtheta")], t_final=0.3,
                         cadence=10, monitor_energy=False)
    traj = run_flow(spec)
    phi = traj.snapshots[-1].forms["main"]
    assert np.max(np.abs(phi.theta - 1.0)) == 0.0
    assert np.max(np.abs(phi.x)) == 0.0


def test_form_decay_matches_spectral_oracle():
    nx, t_final = 64, 0.5
    spec = make_scenario(name="decay", family="flat-torus", nx=nx, ny=nx,
                         forms=[FormSpec("main", "sinx_dx")], t_final=t_final,
                         cadence=20, monitor_energy=False)
    traj = run_flow(spec)
    phi = traj.snapshots[-1].forms["main"]
    grid = traj.grid
    oracle = flat_spectral_oracle([TrigMode("form_x", "sin", 1, 0)], t_final, grid)
    # continuum comparison is limited by the stencil eigenvalue gap ~h^2/3
    assert np.max(np.abs(phi.x - oracle.value.x)) < 2e-3
    # the discrete mode decays with the stencil eigenvalue, up to the rk2
    # time-integration error ~ T lam^3 dt^2 / 6
    h = grid.hx
    lam = (math.sin(h) / h) ** 2
    X, _ = grid.mesh()
    assert np.max(np.abs(phi.x - math.exp(-lam * t_final) * np.sin(X))) < 1e-6


def test_neck_form_sup_monotone_and_pairing_invariant():
    spec = make_scenario(name="neck-form", family="warped-cylinder", nx=128,
                         ny=16, lx=20.0, forms=[FormSpec("main", "dtheta")],
                         probes=[ProbeSpec("loop", "main")],
                         t_final=0.1, cadence=1, monitor_energy=False)
    traj = run_flow(spec, collect_snapshots=False)
    sups = [r.values["main_sup"] for r in traj.records]
    tol = 1e-8 * sups[0]
    assert all(b <= a + tol for a, b in zip(sups, sups[1:]))
    # the cohomology pairing is a flow invariant of the heat-flowed class
    pairings = [r.values["main_pairing"] for r in traj.records]
    assert max(abs(p - pairings[0]) for p in pairings) <= 1e-6 * abs(pairings[0])


def test_closedness_preserved():
    spec = make_scenario(name="closed", family="conformal-torus", nx=64, ny=64,
                         metric_amplitude=0.05,
                         forms=[FormSpec("main", "dtheta_dsinx", 0.3)],
                         t_final=0.2, cadence=5, monitor_energy=False)
    traj = run_flow(spec, collect_snapshots=False)
    res = [r.values["main_closedness"] for r in traj.records]
    assert res[0] == 0.0
    assert max(res) <= 1e-9


def test_operator_swap_vanishes_under_refinement():
    # swapping the factorized and Bochner paths changes monitors only by
    # discretization error, vanishing at order >= 1.9
    def final_form(nx, op):
        spec = make_scenario(name=f"swap-{op}-{nx}", family="warped-cylinder",
                             nx=nx, ny=max(8, (nx - 1) // 4), lx=20.0,
                             metric_width=2.5, forms=[FormSpec("main", "dtheta")],
                             form_operator=op, dt_cap=2e-4, t_final=0.02,
                             cadence=100, monitor_energy=False)
        return run_flow(spec).snapshots[-1].forms["main"]

    gaps = []
    for nx in (65, 129):
        a, b = final_form(nx, "dd"), final_form(nx, "bochner")
        gaps.append(max(np.max(np.abs(a.x - b.x)),
                        np.max(np.abs(a.theta - b.theta))))
    assert math.log2(gaps[0] / gaps[1]) >= 1.9


# ----------------------------------------------------------------- gauge flow
def test_gauge_zero_source_stays_zero():
    spec = make_scenario(name="gauge0", family="flat-torus", nx=32, ny=32,
                         forms=[FormSpec("main", "dtheta")], gauge_form="main",
                         t_final=0.2, cadence=10, monitor_energy=False)
    traj = run_flow(spec)
    assert np.max(np.abs(traj.snapshots[-1].gauge.values)) == 0.0


def test_gauge_representation_exact_static():
    spec = make_scenario(name="gauge-s", family="flat-torus", nx=64, ny=64,
                         forms=[FormSpec("main", "sinx_dx")], gauge_form="main",
                         t_final=0.3, cadence=10, monitor_energy=False)
    traj = run_flow(spec, collect_snapshots=False)
    assert max(r.values["gauge_gap"] for r in traj.records) < 1e-6


def test_gauge_representation_evolving():
    spec = make_scenario(name="gauge-e", family="conformal-torus", nx=64, ny=64,
                         metric_amplitude=0.05,
                         forms=[FormSpec("main", "dtheta_dsinx", 0.3)],
                         gauge_form="main", t_final=0.3, cadence=10,
                         monitor_energy=False)
    traj = run_flow(spec, collect_snapshots=False)
    assert max(r.values["gauge_gap"] for r in traj.records) < 1e-4


# ----------------------------------------------------------------- scalar flow
def test_scalar_constant_preserved():
    grid = Grid2D.torus(32, 32)
    st = _state(grid, flat_metric(grid),
                subsolution=ScalarField(2.5 * np.ones((32, 32)), "subsolution"))
    out = scalar_heat_step(st, 1e-3, evolve_metric=False)
    assert np.max(np.abs(out.subsolution.values - 2.5)) == 0.0


def test_scalar_decay_spectral():
    spec = make_scenario(name="sub", family="flat-torus", nx=64, ny=64,
                         subsolution="one-plus-cos", t_final=0.5, cadence=10,
                         monitor_energy=False)
    traj = run_flow(spec)
    u = traj.snapshots[-1].subsolution.values
    grid = traj.grid
    X, _ = grid.mesh()
    h = grid.hx
    lam = (math.sin(h) / h) ** 2
    assert np.max(np.abs(u - (1.0 + math.exp(-lam * 0.5) * np.cos(X)))) < 1e-6
    oracle = 1.0 + math.exp(-0.5) * np.cos(X)
    assert np.max(np.abs(u - oracle)) < 2e-3


def test_scalar_bump_stays_nonnegative():
    spec = make_scenario(name="bump", family="warped-cylinder", nx=128, ny=16,
                         lx=20.0, subsolution="bump", sub_width=2.0,
                         t_final=0.2, cadence=1, monitor_energy=False)
    traj = run_flow(spec, collect_snapshots=False)
    assert min(r.values["u_min"] for r in traj.records) >= -1e-10


def test_scalar_sink_strict_subsolution():
    spec = make_scenario(name="sink", family="flat-torus", nx=32, ny=32,
                         subsolution="one-plus-cos", sink=0.5, t_final=0.3,
                         cadence=1, monitor_energy=False)
    traj = run_flow(spec, collect_snapshots=False)
    masses = [r.values["u_mass"] for r in traj.records]
    assert all(b < a for a, b in zip(masses, masses[1:]))


# ----------------------------------------------------------------- statuses
def test_zero_step_budget():
    spec = make_scenario(name="budget", family="flat-torus", nx=32, ny=32,
                         max_steps=0, t_final=1.0)
    traj = run_flow(spec)
    assert traj.status == BUDGET
    assert traj.records == [] and traj.snapshots == []


def test_budget_exhausted_midway():
    spec = make_scenario(name="budget2", family="flat-torus", nx=32, ny=32,
                         forms=[FormSpec("main", "sinx_dx")],
                         max_steps=7, t_final=1.0, cadence=1)
    traj = run_flow(spec)
    assert traj.status == BUDGET
    assert traj.n_steps == 7


def test_dt_underflow_reports_blowup():
    # a thin cylinder on a fine grid: positive-definite everywhere, but the
    # parabolic rate pushes dt under 1e-12; the run must terminate with the
    # blow-up status and keep the last valid state
    grid = Grid2D.cylinder(1024, 8, 0.5)
    prof = 2e-3 * np.ones(1024)
    setup = RunSetup("thin", "x" * 16, grid,
                     _state(grid, warped_metric(grid, prof, prof)),
                     FlowProblem(grid), IntegratorSpec(t_final=1.0))
    traj = run_flow(setup)
    assert traj.status == BLOWUP
    assert len(traj.records) == 1   # the initial (last valid) state is recorded


def test_flow_step_detects_nonfinite():
    grid = Grid2D.torus(16, 16)
    X, _ = grid.mesh()
    st = _state(grid, flat_metric(grid),
                forms={"main": OneFormField(np.sin(X), np.zeros_like(X))})
    problem = FlowProblem(grid, evolve_metric=False)
    with np.errstate(over="ignore", invalid="ignore"):
        assert flow_step(st, 1e308, problem) is None


def test_buffer_breach_aborts():
    # curvature reaching far enough into the buffer changes it beyond the
    # threshold and must abort with the dedicated status
    spec = make_scenario(name="breach", family="warped-cylinder", nx=128, ny=16,
                         lx=20.0, metric_width=4.0, buffer_threshold=1e-6,
                         t_final=0.5, cadence=1, monitor_energy=False)
    traj = run_flow(spec, collect_snapshots=False)
    assert traj.status == BUFFER_BREACH
    assert traj.records[-1].values["buffer_flux"] > 1e-6


# ----------------------------------------------------------------- steppers
def test_single_system_steps_leave_others_alone():
    grid = Grid2D.torus(32, 32)
    X, _ = grid.mesh()
    st = _state(grid, flat_metric(grid),
                forms={"main": OneFormField(np.sin(X), np.zeros_like(X))},
                subsolution=ScalarField(1.0 + 0.3 * np.cos(X), "subsolution"))
    out = ricci_flow_step(st, 1e-3)
    assert out.forms["main"].x == pytest.approx(st.forms["main"].x)
    out2 = form_heat_step(st, 1e-3, evolve_metric=False)
    assert out2.subsolution.values == pytest.approx(st.subsolution.values)
    assert np.max(np.abs(out2.forms["main"].x - st.forms["main"].x)) > 0


def test_gauge_diffusion_step_runs():
    grid = Grid2D.torus(32, 32)
    X, _ = grid.mesh()
    base = OneFormField(np.sin(X), np.zeros_like(X), closed=True)
    st = _state(grid, flat_metric(grid), forms={"main": base.copy()},
                gauge=ScalarField(np.zeros((32, 32)), "gauge"))
    out = gauge_diffusion_step(st, 1e-3, base, evolve_metric=False)
    assert np.max(np.abs(out.gauge.values)) > 0.0


def test_rk4_sharper_than_rk2():
    errors = {}
    for scheme in ("rk2", "rk4"):
        spec = make_scenario(name=f"s-{scheme}", family="flat-torus", nx=32,
                             ny=32, forms=[FormSpec("main", "sinx_dx")],
                             scheme=scheme, t_final=0.2, cadence=10,
                             monitor_energy=False)
        traj = run_flow(spec)
        grid = traj.grid
        X, _ = grid.mesh()
        lam = (math.sin(grid.hx) / grid.hx) ** 2
        exact = math.exp(-lam * 0.2) * np.sin(X)
        errors[scheme] = np.max(np.abs(traj.snapshots[-1].forms["main"].x - exact))
    assert errors["rk2"] < 1e-5
    assert errors["rk4"] < 0.01 * errors["rk2"]


def test_run_records_are_deterministic():
    spec = make_scenario(name="det", family="conformal-torus", nx=32, ny=32,
                         forms=[FormSpec("main", "sinx_dx")], t_final=0.1,
                         cadence=1)
    a = run_flow(spec, collect_snapshots=False)
    b = run_flow(spec, collect_snapshots=False)
    for ra, rb in zip(a.records, b.records):
        assert ra.values == rb.values and ra.t == rb.t
