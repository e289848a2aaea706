"""Smoke test for the dpo_sim extension module.

Build and install first:
    pip install --no-build-isolation -e crates/py
"""

import math

import dpo_sim


def main():
    nm = dpo_sim.derive_normal_modes(
        g0=1.0, coupling=1e3, delta=0.0, omega_m1=2e4, omega_m2=1e4,
        kappa=100.0, gamma1=1e-4, gamma2=1e-4,
    )
    assert nm["r"] == 1.0
    assert abs(nm["c_minus"] - 0.5) < 1e-3

    model = dpo_sim.DpoModel.from_critical(1.0, 8.0, 10.0, nth_minus=0.01, omega_tilde=0.3)
    sol = dpo_sim.solve_self_consistency(model)
    assert sol.converged and 0.0 < abs(sol.b) < 1.0

    rows = dpo_sim.sweep(model, "drive", [0.1 * k for k in range(1, 21)], workers=2)
    b = [r["B_abs"] for r in rows]
    assert all(y > x for x, y in zip(b, b[1:]))

    state = dpo_sim.steady_state(model, (8, 8))
    obs = state.rho.observables()
    mean_c = complex(*obs["mean_c"])
    assert abs(mean_c - sol.alpha) / abs(sol.alpha) < 0.1, (mean_c, sol.alpha)

    cooling = dpo_sim.DpoModel.from_critical(1.0, 8.0, 5.0, nth_minus=0.0, nth_1=1.0)
    cooled = dpo_sim.steady_state(cooling, (6, 10))
    _, predicted = dpo_sim.dpo_cooling(cooling.gamma1, 5.0, 0.0, 1.0)
    assert abs(cooled.rho.observables()["n_b"] / predicted - 1.0) < 0.05

    vac = dpo_sim.DensityMatrix.fock(10, 0)
    grid = dpo_sim.wigner(vac, points=41, bounds=(-2.0, 2.0, -2.0, 2.0))
    assert abs(grid.values[20][20] - 2.0 / math.pi) < 1e-12
    assert abs(grid.mass - 1.0) < 1e-3
    assert not grid.summary()["bimodality_flag"]

    _, rb = state.rho.reduced()
    assert abs(rb.trace() - 1.0) < 1e-10

    try:
        dpo_sim.DpoModel.from_critical(1.0, -1.0, 10.0)
    except ValueError:
        pass
    else:
        raise AssertionError("negative beta_crit accepted")

    print("dpo_sim", dpo_sim.__version__, "smoke test passed")


if __name__ == "__main__":
    main()
