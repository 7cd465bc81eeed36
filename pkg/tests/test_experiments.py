import math

import numpy as np
import pytest

from degspde.experiments import (
    MonitorConfig,
    MonitorObserver,
    Functionals,
    Observable,
    bel_estimate,
    energy_monitor,
    ergodicity_run,
    fit_decay_rate,
    irreducibility_run,
    ks_null_band,
    lyapunov_check,
    map_chunks,
    separation_run,
    separation_stats,
    split_chunks,
    wilson_interval,
)
from degspde.experiments.irreducibility import parabola_target, smooth_target
from degspde.experiments.monitors import log_slope_per_doubling
from degspde.potentials import potential_table
from degspde.solver import ModelParams, SolverConfig, Stepper, simulate

PARAMS = ModelParams(alpha=4, beta=1, gamma=6, delta=0.45, sigma=0.15, epsilon=0.2)


def _sine(n, amp):
    x = np.zeros(n)
    x[0] = amp * math.sqrt(math.pi / 2)
    return x


# --- ensemble runner ------------------------------------------------------


def test_chunks_and_ordered_reduction():
    chunks = split_chunks(range(10), 4)
    assert [c.tolist() for c in chunks] == [[0, 1, 2, 3], [4, 5, 6, 7], [8, 9]]
    assert map_chunks(lambda c: int(c.sum()), range(10), 4, threads=3) == [6, 22, 17]
    with pytest.raises(ValueError):
        split_chunks(range(3), 0)


# --- monitors -------------------------------------------------------------


def test_zero_field_monitors():
    cfg = SolverConfig(n_modes=8)
    st = Stepper(PARAMS, cfg)
    vals = Functionals(st, MonitorConfig()).values(np.zeros((1, 8)))
    assert vals["h_norm"][0] == 0 and vals["barrier_gap"][0] == 1.0
    # Psi_{gamma,eps}(0) = 0 by the normalisation of the primitives
    assert vals["psi_l1_g6"][0] == 0.0
    assert potential_table(6, 0.2).psi(0.0) == 0.0


def test_monitor_names_follow_config():
    st = Stepper(PARAMS, SolverConfig(n_modes=8))
    names = Functionals(st, MonitorConfig(moments=(2, 3.5), gammas=(6, 7.5))).names()
    assert "h_norm_pow3.5" in names and "grad_weighted_g7.5" in names and "sobolev_0.45" in names
    with pytest.raises(ValueError):
        MonitorConfig(moments=(1,))


def test_energy_monitor_from_records_and_series_agree():
    cfg = SolverConfig(n_modes=8, dt=1e-3, horizon=0.2, store_stride=50)
    st = Stepper(PARAMS, cfg)
    x = _sine(8, 0.5)
    rec = simulate(x, PARAMS, cfg, range(6), stepper=st)
    mc = MonitorConfig(stride=50)
    obs = MonitorObserver(Functionals(st, mc), 50, cfg.dt, include_initial=np.broadcast_to(x, (6, 8)))
    simulate(x, PARAMS, cfg, range(6), stepper=st, observer=obs, store=False)
    a = energy_monitor(rec, mc, PARAMS, stepper=st)
    b = energy_monitor(obs.series(), mc, PARAMS, stepper=st, x0=x)
    assert np.allclose(a.times, b.times)
    for k in a.mean:
        assert np.allclose(a.mean[k], b.mean[k], rtol=1e-12, atol=1e-14)
    assert a.n_trajectories == 6 and math.isfinite(a.budget) and a.budget > 1
    assert a.integrated["grad_weighted_g6"][0] == 0.0


def test_lyapunov_check():
    st = Stepper(PARAMS, SolverConfig(n_modes=16, dt=1e-3, noise_mode="off"))
    ok, worst = lyapunov_check(st, _sine(16, 0.9), 500)
    assert ok and worst <= 0
    with pytest.raises(ValueError):
        lyapunov_check(Stepper(PARAMS, SolverConfig(n_modes=4)), np.zeros(4), 1)


def test_log_slope():
    assert log_slope_per_doubling([1, 2, 4, 8], [3, 3, 3, 3]) == pytest.approx(0.0, abs=1e-14)
    assert log_slope_per_doubling([1, 2, 4], [1, 2, 4]) == pytest.approx(math.log(2))


# --- BEL ------------------------------------------------------------------


def test_observables():
    assert Observable.parse("mode_projection(3)").k == 3
    with pytest.raises(ValueError):
        Observable("energy")
    phi = Observable("bounded_sigmoid_of_H_norm")
    assert phi(np.zeros((1, 4)), None)[0] == 0.5


def test_bel_zero_direction():
    rep, _ = bel_estimate(_sine(8, 0.3), np.zeros(8), "smoothed_mass", 0.05, PARAMS, 2000, n_modes=8, dt=5e-3, chunk_size=1000)
    assert rep.bel_estimate == 0.0 and rep.fd_estimate == 0.0


def test_bel_linear_gaussian_matches_analytic():
    h = np.zeros(8)
    h[0] = 1.0
    rep, samples = bel_estimate(
        np.zeros(8), h, "mode_projection(1)", 0.25, PARAMS, 20_000, n_modes=8, dt=5e-3,
        drift_mode="linear", noise_mode="additive", chunk_size=5000,
    )
    assert rep.analytic == pytest.approx(math.exp(-2 * 0.25))
    assert abs(rep.bel_estimate - rep.analytic) <= 3 * rep.bel_stderr
    assert abs(rep.fd_estimate - rep.analytic) <= max(3 * rep.fd_stderr, 1e-9)
    assert samples["bel"].shape == (20_000,)


def test_bel_requires_enough_samples():
    with pytest.raises(ValueError):
        bel_estimate(np.zeros(4), np.ones(4), "smoothed_mass", 0.05, PARAMS, 100, n_modes=4, dt=5e-3)


# --- irreducibility -------------------------------------------------------


def test_wilson_interval_brackets_estimate():
    lo, hi = wilson_interval(7, 50)
    assert lo < 7 / 50 < hi
    assert wilson_interval(0, 100)[0] == 0.0 and wilson_interval(100, 100)[1] == 1.0


def test_fit_recovers_synthetic_rate():
    s = np.linspace(0, 0.5, 200)
    E = 3.0 * np.exp(-2 * 12.0 * s) + 1e-4
    fit = fit_decay_rate(s, E, 12.0)
    assert fit.rel_error < 1e-8 and fit.plateau == pytest.approx(1e-4, rel=1e-6)


def test_irreducibility_drift_only_rate():
    basis = Stepper(PARAMS, SolverConfig(n_modes=16)).basis
    a = parabola_target(basis, 0.5)
    rep = irreducibility_run(
        _sine(16, 0.2), a, 1.0, 0.5, (5.0, 10.0), 0.5, PARAMS, 4, n_modes=16, test_mode="drift_only", chunk_size=4,
    )
    for M in (5.0, 10.0):
        assert rep.rates[M].rel_error < 0.01
    assert np.allclose(smooth_target(a)[8:], 0.0)


def test_irreducibility_rejects_rough_target():
    a = np.zeros(16)
    a[-1] = 5.0
    with pytest.raises(ValueError, match="r/2"):
        irreducibility_run(np.zeros(16), a, 1.0, 0.5, 5.0, 0.1, PARAMS, 4, n_modes=16)


# --- ergodicity -----------------------------------------------------------


def _erg_cfg(seed=0):
    return SolverConfig(n_modes=8, dt=2e-3, seed=seed)


def test_ergodicity_identical_chains():
    x = _sine(8, 0.4)
    rep = ergodicity_run(x, x, PARAMS, _erg_cfg(), burn_in=0.2, horizon=(0.4, 0.8), n_per_chain=20, monitor=MonitorConfig(stride=20))
    for name in rep.observables:
        assert np.all(rep.ks[name] == 0.0)


def test_ergodicity_same_law_within_null_band():
    x = _sine(8, 0.4)
    rep = ergodicity_run(
        x, x, PARAMS, _erg_cfg(), burn_in=0.2, horizon=(0.4, 0.8), n_per_chain=60,
        coupling="independent", seed2=11, monitor=MonitorConfig(stride=50),
    )
    for name in rep.observables:
        assert rep.ks[name][-1] < rep.null_band
        assert rep.ks[name][-1] > 0
    assert rep.null_band == pytest.approx(ks_null_band(60, 60))


def test_ergodicity_validation():
    with pytest.raises(ValueError):
        ergodicity_run(np.zeros(8), np.zeros(8), PARAMS, _erg_cfg(), burn_in=1.0, horizon=(0.5,))
    with pytest.raises(ValueError):
        ergodicity_run(np.zeros(8), np.zeros(8), PARAMS, _erg_cfg(), coupling="reflection")


# --- separation -----------------------------------------------------------


def test_separation_without_noise_stays_at_zero():
    cfg = SolverConfig(n_modes=8, dt=1e-3, horizon=0.1, noise_mode="off")
    rep = separation_run(np.zeros(8), PARAMS, cfg, 5)
    assert np.all(rep.layers == 1.0)
    assert all(v == 0.0 for v in rep.exceedance.values())


def test_separation_exceedance_monotone():
    sups = np.random.default_rng(0).uniform(0.3, 1.05, 500)
    rep = separation_stats(sups, PARAMS)
    ladder = sorted(rep.ladder, reverse=True)  # thresholds 1 - L increasing
    probs = [rep.exceedance[L] for L in ladder]
    assert all(a >= b for a, b in zip(probs, probs[1:]))
    assert rep.n_trajectories == 500 and rep.excursion_budget == pytest.approx(2.0)
    assert not rep.within_budget or rep.max_sup < 2.0
