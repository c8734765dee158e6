"""The eight acceptance criteria, each at its stated tolerance.

Every test prints one ``PASS``/``FAIL criterion N`` line (visible without
``-s``). Criteria 4, 5, 7 and 8 share one ``verify --id all --seed 7`` run.
"""

import json
import time

import numpy as np
import pytest

from tentflow import PeriodicGrid, ScalarField, cli
from tentflow.ensembles import Ensemble, EnsembleKind, preset_density, preset_scalar, preset_velocity
from tentflow.harness import Verdict, scaling_default
from tentflow.norms import BallFamily, u_alpha_norm, v_alpha_norm
from tentflow.operators import gradient, heat_semigroup, leray_project, riesz_transform
from tentflow.reference import energy_check, reference_solve
from tentflow.solver import SolverConfig, SolverStatus, solve

from _oracles import dense_u_alpha_gaussian, sharp_ball_v_alpha
from conftest import random_scalar, random_vector

pytestmark = pytest.mark.acceptance
L = 2 * np.pi


def verdict_line(capsys, n, ok, detail):
    with capsys.disabled():
        print(f"\n{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
    assert ok, detail


@pytest.fixture(scope="module")
def verify_all(tmp_path_factory):
    out = tmp_path_factory.mktemp("verify_all_1")
    t0 = time.perf_counter()
    code = cli.main(["verify", "--id", "all", "--seed", "7", "--out", str(out)])
    return out, code, time.perf_counter() - t0


def _report(out, name):
    return json.loads((out / f"{name}.json").read_text())


def test_criterion_1_scaling(capsys):
    t0 = time.perf_counter()
    rep = scaling_default(alpha=0.5, n=128)
    elapsed = time.perf_counter() - t0
    devs = {lam: r["deviation"] for lam, r in rep["lambdas"].items()}
    ok = rep["max_deviation"] < 0.05 and elapsed < 60
    verdict_line(capsys, 1, ok, f"scaling deviations {devs} (< 5%), {elapsed:.1f} s")


def test_criterion_2_operator_exactness(capsys):
    g = PeriodicGrid(2, L, 128)
    rng = np.random.default_rng(2024)
    u = random_vector(g, rng)
    Pu = leray_project(u)
    idem = np.max(np.abs(leray_project(Pu).values - Pu.values)) / np.max(np.abs(Pu.values))
    q = random_scalar(g, rng, kmax=60)
    grad = gradient(q)
    kill = leray_project(grad).max_abs() / grad.max_abs()
    f = random_scalar(g, rng, kmax=60)
    rr = sum(riesz_transform(riesz_transform(f, j), j).values for j in range(2))
    riesz = np.max(np.abs(rr + f.values)) / f.max_abs()
    h = random_scalar(g, rng)
    semi = np.max(np.abs(heat_semigroup(heat_semigroup(h, 0.013), 0.2).values
                         - heat_semigroup(h, 0.213).values)) / h.max_abs()
    errs = {"P idempotent": idem, "P grad": kill, "sum R_j^2 + I": riesz, "semigroup": semi}
    ok = max(errs.values()) <= 1e-10
    verdict_line(capsys, 2, ok, ", ".join(f"{k} {v:.1e}" for k, v in errs.items()) + " (<= 1e-10)")


def test_criterion_3_oracle_equivalence(capsys):
    t0 = time.perf_counter()
    g = PeriodicGrid(2, L, 64)
    b = BallFamily.default(g)
    f = preset_scalar("bump", g)
    u = u_alpha_norm(f, 0.5, b).value
    u_ref = dense_u_alpha_gaussian(L, (L / 2, L / 2), 0.08 * L, 0.5, b.center_points, b.radii)
    v = v_alpha_norm(f, 0.5, b).value
    v_ref = sharp_ball_v_alpha(f.values, g.spacing, 0.5, b.centers, b.radii)
    eu, ev = abs(u / u_ref - 1), abs(v / v_ref - 1)
    elapsed = time.perf_counter() - t0
    ok = eu < 0.02 and ev < 0.02 and elapsed < 300
    verdict_line(capsys, 3, ok, f"U_alpha rel err {eu:.2e}, V_alpha rel err {ev:.2e} (< 2%), {elapsed:.1f} s")


CAMPAIGN_REPORTS = [
    "timederiv", "maxreg_beta0", "maxreg_beta0.5", "maxreg_beta0.9",
    "leray_beta0", "leray_beta1", "leray_beta1.9", "gradient", "product",
    "key1", "key2", "key3", "bilinear", "embedding_V", "embedding_B", "mollification",
]


def test_criterion_4_lemma_campaigns(verify_all, capsys):
    out, code, elapsed = verify_all
    reps = {name: _report(out, name) for name in CAMPAIGN_REPORTS}
    sizes = {r["params"]["size"] for r in reps.values()}
    bad = {k: round(r["drift"], 3) for k, r in reps.items() if r["verdict"] != Verdict.BOUNDED_STABLE}
    worst = max(reps, key=lambda k: reps[k]["drift"])
    ok = not bad and sizes == {50} and elapsed < 1800
    detail = (f"{len(reps)} reports BOUNDED_STABLE on 50-sample ensembles, worst drift "
              f"{reps[worst]['drift']:.3f} ({worst}), full verify run {elapsed / 60:.1f} min")
    if bad:
        detail = f"unstable: {bad}"
    verdict_line(capsys, 4, ok, detail)


def test_criterion_5_offdiagonal(verify_all, capsys):
    out, _, _ = verify_all
    rep = _report(out, "offdiagonal")
    per_j = {j: round(v["slope"], 2) for j, v in rep["per_j"].items()}
    ok = rep["n_exp"] == 2 and rep["slope"] <= -3.8
    verdict_line(capsys, 5, ok, f"worst slope {rep['slope']:.2f} <= -3.8; per j {per_j}")


def test_criterion_6_solver_vs_reference(capsys):
    t0 = time.perf_counter()
    g = PeriodicGrid(2, L, 128)
    cfg = SolverConfig(N=128, t_final=0.1, eps0=0.05)
    u_raw = Ensemble(7, EnsembleKind.BAND_LIMITED_RANDOM).vector(g, 0, solenoidal=True)
    state, _ = solve(u_raw, ScalarField(g, np.ones(g.shape)), cfg)
    u0 = state.prepared.u0
    ref = reference_solve(u0, cfg.time_grid())
    a, b = state.u_traj.values[-1], ref.values[-1]
    err = float(np.sqrt(np.sum((a - b) ** 2) / np.sum(b**2)))
    energy = energy_check(state.u_traj, u0)
    elapsed = time.perf_counter() - t0
    ok = state.status == SolverStatus.CONVERGED and err < 1e-3 and energy.passed and elapsed < 300
    verdict_line(capsys, 6, ok, f"{state.status.value}, rel L2 err at t_final {err:.2e} (< 1e-3), "
                 f"energy excess {energy.max_excess:.2e} (<= 1e-3), {elapsed:.1f} s")


@pytest.mark.parametrize("dev", [0.02, 0.05, 0.1])
def test_criterion_7_small_data_regime(verify_all, capsys, dev):
    out, _, _ = verify_all
    c_emp = _report(out, "e_alpha_linear")["C_emp"]
    t0 = time.perf_counter()
    g = PeriodicGrid(2, L, 128)
    cfg = SolverConfig(N=128, eps0=dev + 0.05)
    state, rep = solve(preset_velocity("bump", g), preset_density(g, dev), cfg)
    elapsed = time.perf_counter() - t0
    inc = state.increments()
    ratios = [b / a for a, b in zip(inc, inc[1:])]
    rho = state.rho_deviation()
    scale = float(np.max(np.abs(state.u_traj.values)))
    div = max(float(np.max(d["div_max"])) for d in state.diagnostics)
    u_norm = state.prepared.u_norm_mollified
    bound = 2 * c_emp * u_norm
    checks = {
        "converged": state.status == SolverStatus.CONVERGED,
        "geometric": bool(ratios) and max(ratios) < 1,
        "rho nonincreasing": bool(np.all(np.diff(rho) <= 1e-12)) and rho[0] <= dev + 1e-12,
        "divergence": div <= 1e-8 * scale,
        "E_alpha bound": rep.total <= bound,
        "runtime": elapsed < 600,
    }
    ok = all(checks.values())
    failed = [k for k, v in checks.items() if not v]
    verdict_line(capsys, 7, ok, f"dev {dev}: {state.status.value} in {state.iterate_index} iters, "
                 f"max ratio {max(ratios, default=float('nan')):.3f}, div {div:.1e}, "
                 f"E_alpha {rep.total:.4g} <= 2 C_emp |u0|_U = {bound:.4g}, {elapsed:.1f} s"
                 + (f"; failed {failed}" if failed else ""))


def test_criterion_8_determinism(verify_all, tmp_path, capsys):
    first, code1, _ = verify_all
    second = tmp_path / "verify_all_2"
    code2 = cli.main(["verify", "--id", "all", "--seed", "7", "--out", str(second)])
    names = sorted(p.name for p in first.iterdir())
    same_set = names == sorted(p.name for p in second.iterdir())
    differing = [n for n in names if (first / n).read_bytes() != (second / n).read_bytes()] if same_set else names
    ok = same_set and not differing and code1 == code2
    verdict_line(capsys, 8, ok, f"{len(names)} report files byte-identical across two runs"
                 if ok else f"differing files: {differing[:5]}")
