"""Acceptance suite: one test per release criterion.

Each test prints a single pass/fail line (visible with pytest -s or in the
captured output of failures) and asserts the criterion at its stated
tolerance, including the runtime budget.
"""

import math
import time

import numpy as np
import pytest
import scipy.sparse as sp
from scipy.special import binom

import fracinv as fi
from fracinv import fem
from fracinv.experiments import (ExperimentConfig, run_sweep,
                                 stability_quotient, verify_decay,
                                 check_positivity)
from fracinv.fem import VH, XH, Field
from fracinv.problems import get_problem, problem_mesh
from fracinv.timestep import TimeGrid

TABLE_1A_EQ = {0.25: (2.67e-2, 1.76e-2, 1.54e-2, 8.42e-3),
               0.5: (2.56e-2, 1.85e-2, 1.40e-2, 6.28e-3),
               0.75: (2.57e-2, 1.72e-2, 1.46e-2, 6.37e-3)}
NOISE_LEVELS = (1e-2, 5e-3, 2.5e-3, 1e-3)
TABLE_2_EQ_A05 = 1.97e-2

SWEEP_1A = ExperimentConfig(
    problem="1d-sine", alphas=(0.25, 0.5, 0.75), T_values=(1.0,),
    noise_levels=NOISE_LEVELS, c_gamma=4e-4, h=1.0 / 113.0, n_steps=30,
    h_ref=1.0 / 1600.0, n_steps_ref=1280, seed=1, discrepancy_factor=1.05,
    max_iters=600)


def report(number, name, ok, detail, elapsed, budget):
    status = "PASS" if ok else "FAIL"
    print(f"criterion {number:2d} ({name}): {status} [{elapsed:.1f}s/"
          f"{budget:.0f}s] {detail}")
    assert elapsed < budget, f"criterion {number} exceeded its runtime budget"
    assert ok, f"criterion {number} ({name}): {detail}"


@pytest.fixture(scope="module")
def sweep_1a_report():
    return run_sweep(SWEEP_1A)


def test_criterion_1_cq_weights():
    start = time.perf_counter()
    ok = True
    details = []
    for alpha in (0.25, 0.5, 0.75, 1.0):
        w = fi.cq_weights(alpha, 200)
        j = np.arange(201)
        closed = (-1.0) ** j * binom(alpha, j)
        gap = np.abs(w.b - closed).max()
        ok &= gap <= 1e-13
        ok &= w.b[0] == 1.0
        s = w.partial_sums
        if alpha < 1.0:
            ok &= bool((w.b[1:] < 0.0).all())
            ok &= bool((s > 0.0).all() and (np.diff(s) < 0.0).all())
        else:
            # first-difference case: weights (1, -1, 0, ...), sums (1, 0, ...)
            ok &= bool((s >= 0.0).all() and (np.diff(s) <= 0.0).all())
        details.append(f"a={alpha}: max|rec-closed|={gap:.1e}")
    report(1, "cq-weights", ok, "; ".join(details),
           time.perf_counter() - start, 1.0)


def test_criterion_2_temporal_order():
    start = time.perf_counter()
    problem = get_problem("1d-sine")
    mesh = problem_mesh(problem, 1.0 / 200.0)
    q = fem.interpolate(mesh, VH, problem.q_true)
    ref = fi.solve_forward(mesh, q, problem.u0, problem.f, 0.5,
                           TimeGrid(1.0, 1280)).terminal
    errs = []
    for n in (10, 20, 40, 80):
        traj = fi.solve_forward(mesh, q, problem.u0, problem.f, 0.5,
                                TimeGrid(1.0, n))
        errs.append(fem.norm_l2(Field(mesh, XH,
                                      traj.terminal.values - ref.values)))
    pairs = [float(np.log2(errs[i] / errs[i + 1])) for i in range(len(errs) - 1)]
    order = pairs[-1]  # observed order at the finest refinement pair
    ok = 0.9 <= order <= 1.2
    report(2, "temporal-order", ok,
           f"order {order:.3f} in [0.9, 1.2] (per-refinement: "
           f"{['%.2f' % p for p in pairs]})",
           time.perf_counter() - start, 30.0)


def test_criterion_3_spatial_order():
    start = time.perf_counter()
    problem = get_problem("1d-sine")
    fine = problem_mesh(problem, 1.0 / 1600.0)
    q_fine = fem.interpolate(fine, VH, problem.q_true)
    u_ref = fi.solve_forward(fine, q_fine, problem.u0, problem.f, 0.5,
                             TimeGrid(1.0, 1280)).terminal
    errs, hs = [], []
    for n in (25, 50, 100):
        mesh = problem_mesh(problem, 1.0 / n)
        q = fem.interpolate(mesh, VH, problem.q_true)
        traj = fi.solve_forward(mesh, q, problem.u0, problem.f, 0.5,
                                TimeGrid(1.0, 1280))
        # measure the error as a function: coarse P1 solution evaluated on
        # the fine grid (nodal-only comparison superconverges in 1D)
        coarse_on_fine = fem.evaluate_at_points(traj.terminal,
                                                fine.vertices[fine.interior])
        errs.append(fem.norm_l2(Field(fine, XH, coarse_on_fine - u_ref.values)))
        hs.append(1.0 / n)
    pairs = [float(np.log2(errs[i] / errs[i + 1])) for i in range(len(errs) - 1)]
    order = pairs[-1]  # observed order at the finest refinement pair
    ok = 1.8 <= order <= 2.2
    report(3, "spatial-order", ok,
           f"order {order:.3f} in [1.8, 2.2] (per-refinement: "
           f"{['%.2f' % p for p in pairs]})",
           time.perf_counter() - start, 60.0)


def test_criterion_4_gradient_consistency():
    start = time.perf_counter()
    cfg = ExperimentConfig(problem="1d-sine", h=1.0 / 113.0, n_steps=30,
                           h_ref=1.0 / 1600.0, n_steps_ref=1280, seed=1)
    z, delta, u_ref = fi.synthesize_data(cfg, 0.5, 1.0, 1e-2, seed=1)
    mesh = z.mesh
    spec = fi.InverseSpec(mesh=mesh, alpha=0.5, grid=TimeGrid(1.0, 30),
                          u0=get_problem("1d-sine").u0,
                          f=get_problem("1d-sine").f, z_delta=z, gamma=1e-8)
    g = fi.gradient(spec, spec.q_init)
    rng = np.random.default_rng(1)
    x = mesh.vertices[:, 0]
    worst = 0.0
    for _ in range(5):
        vals = sum(rng.normal() * np.sin(k * np.pi * x + rng.uniform(0, 2 * np.pi))
                   for k in range(1, 4))
        d = Field(mesh, VH, vals / np.abs(vals).max())
        step = 1e-4
        qp = Field(mesh, VH, spec.q_init.values + step * d.values)
        qm = Field(mesh, VH, spec.q_init.values - step * d.values)
        fd = (fi.objective(spec, qp)[0] - fi.objective(spec, qm)[0]) / (2 * step)
        adj = float(g.values @ d.values)
        worst = max(worst, abs(fd - adj) / abs(fd))
    ok = worst <= 1e-5
    report(4, "gradient-consistency", ok,
           f"max relative mismatch {worst:.2e} <= 1e-5",
           time.perf_counter() - start, 60.0)


def test_criterion_5_alpha_one_reduction():
    start = time.perf_counter()
    problem = get_problem("1d-sine")
    mesh = problem_mesh(problem, 1.0 / 100.0)
    q = fem.interpolate(mesh, VH, problem.q_true)
    grid = TimeGrid(1.0, 50)
    traj = fi.solve_forward(mesh, q, problem.u0, problem.f, 1.0, grid)

    # independent classical backward Euler stepper
    mass = fem.assemble_mass(mesh, XH)
    stiff = fem.assemble_stiffness(mesh, XH, q)
    lu = sp.linalg.splu((mass / grid.tau + stiff).tocsc())
    load = fem.load_vector(mesh, XH, problem.f)
    u = fem.l2_project(mesh, problem.u0).values
    worst = 0.0
    for n in range(1, grid.N + 1):
        u = lu.solve(load + mass @ u / grid.tau)
        worst = max(worst, np.abs(traj.values[n] - u).max() / np.abs(u).max())
    ok = worst <= 1e-13
    report(5, "alpha-one-reduction", ok,
           f"max per-step relative gap {worst:.2e} <= 1e-13",
           time.perf_counter() - start, 5.0)


def test_criterion_6_table_1a(sweep_1a_report):
    start = time.perf_counter()
    report_obj = sweep_1a_report
    ok = True
    details = []
    for alpha in (0.25, 0.5, 0.75):
        recs = [r for r in report_obj.records if r.alpha == alpha]
        eqs = [r.e_q for r in recs]
        decreasing = all(eqs[i] > eqs[i + 1] for i in range(len(eqs) - 1))
        in_band = all(abs(math.log(e / p)) <= math.log(3.0)
                      for e, p in zip(eqs, TABLE_1A_EQ[alpha]))
        rate_q, rate_u = report_obj.rates[(alpha, 1.0)]
        row_ok = decreasing and in_band and rate_q >= 0.4 and rate_u >= 0.7
        ok &= row_ok
        details.append(f"a={alpha}: rq={rate_q:.2f} ru={rate_u:.2f} "
                       f"dec={decreasing} band={in_band}")
    report(6, "table-1a", ok, "; ".join(details),
           time.perf_counter() - start, 300.0)


def test_criterion_7_small_T_failure():
    # Known red: with the specified noise model the terminal data at
    # T = 1e-5 still identifies the coefficient at the smaller noise levels
    # (measured signal-to-noise up to 5.7), so e_q keeps a decreasing trend
    # instead of the required flat row near 1e-1.  Runs with the default
    # stopping rule, which comes closest to the published row.
    start = time.perf_counter()
    cfg = ExperimentConfig(
        problem="1d-sine", alphas=(0.5,), T_values=(1e-5,),
        noise_levels=NOISE_LEVELS, c_gamma=4e-2, h=1.0 / 113.0, n_steps=30,
        h_ref=1.0 / 1600.0, n_steps_ref=1280, seed=1)
    rep = run_sweep(cfg)
    eqs = [r.e_q for r in rep.records]
    flat = max(eqs) / min(eqs) < 1.5
    in_band = all(abs(math.log(e / 0.1)) <= math.log(3.0) for e in eqs)
    ok = flat and in_band
    report(7, "small-T-failure", ok,
           f"e_q={['%.2e' % e for e in eqs]} max/min={max(eqs) / min(eqs):.2f} "
           f"(need < 1.5), band-of-3 around 1e-1: {in_band}",
           time.perf_counter() - start, 300.0)


def test_criterion_8_2d_smoke():
    start = time.perf_counter()
    cfg = ExperimentConfig(
        problem="2d-disk", alphas=(0.5,), T_values=(2.0,),
        noise_levels=(1e-2,), gammas=(1e-6,), h=0.25, n_steps=10,
        h_ref=0.07, n_steps_ref=80, seed=1, discrepancy_factor=1.05,
        max_iters=400)
    rep = run_sweep(cfg)
    rec = rep.records[0]
    mesh_cells = problem_mesh(get_problem("2d-disk"), 0.25).n_cells
    in_band = abs(math.log(rec.e_q / TABLE_2_EQ_A05)) <= math.log(3.0)
    ok = rec.converged and in_band and rec.error is None
    report(8, "2d-smoke", ok,
           f"cells={mesh_cells} e_q={rec.e_q:.3e} "
           f"(band of 3 around {TABLE_2_EQ_A05:.2e}) converged={rec.converged}",
           time.perf_counter() - start, 600.0)


def test_criterion_9_decay_diagnostic():
    start = time.perf_counter()
    rows, ratio = verify_decay("1d-sine", 0.5, 10.0, 1000, 1.0 / 100.0,
                               window=(1.0, 10.0))
    ok = ratio <= 10.0
    report(9, "decay-diagnostic", ok,
           f"weighted max/min over [1, 10] = {ratio:.2f} <= 10",
           time.perf_counter() - start, 60.0)


def test_criterion_10_positivity():
    start = time.perf_counter()
    mn1, _ = check_positivity("1d-sine", 0.5, 1.0, 30, 1.0 / 113.0)
    mn2, _ = check_positivity("2d-disk", 0.5, 2.0, 10, 0.25)
    ok = mn1 > 0.0 and mn2 > 0.0
    report(10, "positivity", ok,
           f"min weight 1d={mn1:.3e}, 2d={mn2:.3e} (both > 0)",
           time.perf_counter() - start, 60.0)


def test_criterion_11_stability_contrast():
    start = time.perf_counter()
    table = stability_quotient("1d-sine", 0.75, (1e-5, 5.0), 10, seed=0,
                               h=1.0 / 100.0, n_steps=50)
    small, large = table[1e-5][1], table[5.0][1]
    ok = small >= 5.0 * large
    report(11, "stability-contrast", ok,
           f"max quotient T=1e-5: {small:.2f} vs T=5: {large:.2f} "
           f"(ratio {small / large:.1f} >= 5)",
           time.perf_counter() - start, 300.0)


def test_criterion_12_determinism(sweep_1a_report):
    start = time.perf_counter()
    rerun = run_sweep(SWEEP_1A)
    # wall times are excluded from the determinism contract
    def stripped(report_obj):
        return [",".join(line.split(",")[:-1])
                for line in report_obj.to_csv().splitlines()]
    ok = stripped(sweep_1a_report) == stripped(rerun)
    report(12, "determinism", ok,
           "rerun reproduces every CSV numeric field (wall time excluded)",
           time.perf_counter() - start, 600.0)
