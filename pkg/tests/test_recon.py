import numpy as np
import pytest
from numpy.testing import assert_allclose

from nusrec.encoders import integral_samples, point_samples
from nusrec.kernels import KernelFamily, KernelKind, gram_matrix
from nusrec.recon import (
    KaczmarzOrder, ReconRun, discrete_iterates, frame_algorithm_run, grochenig_run, interpolant_harmonics,
    kaczmarz_run, kaczmarz_sweep, linear_interpolant, pocs_discrete_run, pocs_run, pocs_step,
    staircase_initializer, synthesize
)
from nusrec.operators import SamplingOperator
from nusrec.signal import Signal, evaluate, project_bandlimited, random_bandlimited


PERIOD = 31.


def interval_family(n: int) -> KernelFamily:
    instants = np.linspace(0., PERIOD, n, endpoint=False) + 0.1 * np.sin(np.arange(n))
    return KernelFamily(KernelKind.INDICATOR, np.sort(instants), PERIOD)


def point_instants(seed: int, lo: float = 0.2, hi: float = 0.5) -> np.ndarray:
    rng = np.random.default_rng(seed)
    instants = np.cumsum(rng.uniform(lo, hi, size=int(2 * PERIOD / lo)))
    instants = instants - instants[0]
    return instants[instants < PERIOD - lo]


def test_relaxation_must_be_in_range():
    fam = interval_family(40)
    op = SamplingOperator.from_family(fam)
    s = op.sequence(np.zeros(len(fam)))
    with pytest.raises(ValueError):
        ReconRun(op, s, relaxation=2.)
    with pytest.raises(ValueError):
        ReconRun(op, s, relaxation=[1., 0.])
    with pytest.raises(ValueError):
        ReconRun(op, s, relaxation=0.05, eps=0.1)
    with pytest.raises(ValueError):
        ReconRun(op, s, max_iter=0)
    run = ReconRun(op, s, relaxation=[1.5, 1.], max_iter=4)
    assert_allclose(run.schedule, [1.5, 1., 1., 1.])


@pytest.mark.parametrize('n', [60, 7])
def test_pocs_converges_to_limit(n):
    fam = interval_family(n)
    op = SamplingOperator.from_family(fam)
    x = random_bandlimited(PERIOD, 1., seed=0)
    noise = np.random.default_rng(1).normal(scale=0.05, size=n)
    s = op.sequence(integral_samples(x, fam.instants).values + noise)
    u0 = random_bandlimited(PERIOD, 0.5, seed=2)
    result = pocs_run(ReconRun(op, s, u0=u0, relaxation=1., max_iter=2000))
    assert result.converged
    assert result.warning is None
    limit = op.limit(s, u0)
    assert (result.estimate - limit).norm_l2() < 1e-8 * limit.norm_l2()


def test_pocs_recovers_input_from_consistent_samples():
    fam = interval_family(60)
    op = SamplingOperator.from_family(fam)
    x = random_bandlimited(PERIOD, 1., seed=3)
    s = integral_samples(x, fam.instants)
    result = pocs_run(ReconRun(op, s, relaxation=1.5, max_iter=500, truth=x))
    assert result.history['err_l2_rel'].iloc[-1] < 1e-8
    assert list(result.history.columns) == ['iter', 'err_l2_rel', 'err_sobolev_rel', 'step_norm']
    assert result.history['iter'].iloc[0] == 0


def test_discrete_and_continuous_iterations_agree():
    fam = interval_family(50)
    op = SamplingOperator.from_family(fam)
    x = random_bandlimited(PERIOD, 1., seed=4)
    s = integral_samples(x, fam.instants)
    u0 = random_bandlimited(PERIOD, 0.3, seed=5)
    u = u0
    iterates = discrete_iterates(op, s, u0=u0, relaxation=1.2, n_iters=15)
    for n, c in enumerate(iterates):
        assert (synthesize(op, u0, c) - u).norm_l2() < 1e-8
        u = pocs_step(op, s, u, 1.2)
    continuous = pocs_run(ReconRun(op, s, u0=u0, relaxation=1.2, max_iter=15, tol=0.))
    discrete = pocs_discrete_run(op, s, u0=u0, relaxation=1.2, n_iters=15,
                                 gram=gram_matrix(fam, method='closed_form'))
    assert (continuous.estimate - discrete).norm_l2() < 1e-7


def test_discrete_iteration_rejects_foreign_gram():
    op = SamplingOperator.from_family(interval_family(30))
    s = op.sequence(np.ones(30))
    other = gram_matrix(interval_family(31))
    with pytest.raises(ValueError):
        next(discrete_iterates(op, s, gram=other))


def test_sobolev_iteration_keeps_initial_constant():
    fam = KernelFamily(KernelKind.RAMP, interval_family(40).instants, PERIOD)
    op = SamplingOperator.from_family(fam)
    x = random_bandlimited(PERIOD, 1., seed=6)
    s = op.apply_S(x)
    u0 = Signal.constant(PERIOD, 3., M=x.M)
    result = pocs_run(ReconRun(op, s, u0=u0, relaxation=1., max_iter=200))
    assert_allclose(result.estimate.mean, 3.)
    assert_allclose((result.estimate - x).coeffs[x.M + 1:], 0., atol=1e-8)


@pytest.mark.parametrize('order', [KaczmarzOrder.CYCLIC, KaczmarzOrder.RANDOM])
def test_kaczmarz_error_decreases(order):
    times = point_instants(seed=7)
    x = random_bandlimited(PERIOD, 1., seed=8)
    op = SamplingOperator.from_family(KernelFamily(KernelKind.SINC, times, PERIOD))
    s = op.sequence(point_samples(x, times))
    result = kaczmarz_run(ReconRun(op, s, relaxation=1., max_iter=20, tol=0., truth=x), order=order, seed=0)
    errors = result.history['err_l2_rel'].to_numpy()
    assert np.all(np.diff(errors) <= 1e-12)
    assert errors[-1] < errors[0]


def test_kaczmarz_sweep_satisfies_last_sample():
    times = point_instants(seed=9)
    x = random_bandlimited(PERIOD, 1., seed=10)
    op = SamplingOperator.from_family(KernelFamily(KernelKind.SINC, times, PERIOD))
    s = op.sequence(point_samples(x, times))
    u = kaczmarz_sweep(op, s, op.zero())
    assert_allclose(u(times[-1]), x(times[-1]), atol=1e-10)


def test_frame_algorithm_is_exact_on_uniform_samples():
    times = np.arange(31.)
    x = random_bandlimited(PERIOD, 1., seed=11)
    op = SamplingOperator.from_family(KernelFamily(KernelKind.SINC, times, PERIOD))
    s = op.sequence(point_samples(x, times))
    result = frame_algorithm_run(op, s, n_iters=5, truth=x)
    assert result.history['err_l2_rel'].iloc[1] < 1e-10
    assert result.converged
    assert result.warning is None


def test_frame_algorithm_flags_divergent_relaxation():
    times = np.arange(31.)
    x = random_bandlimited(PERIOD, 1., seed=12)
    op = SamplingOperator.from_family(KernelFamily(KernelKind.SINC, times, PERIOD))
    s = op.sequence(point_samples(x, times))
    result = frame_algorithm_run(op, s, relaxation=2.5, n_iters=3, truth=x)
    assert result.warning is not None
    assert not result.converged


def test_linear_interpolant():
    times = np.array([0., 1.25, 4.5, 10., 20.])
    values = np.array([1., -2., 0.5, 3., -1.])
    grid = linear_interpolant(times, values, PERIOD)
    knots = np.round(times * 16).astype(int)
    assert_allclose(grid.samples[knots], values)
    c_pos = interpolant_harmonics(times, values, PERIOD)
    projected = project_bandlimited(grid, 15)
    assert_allclose(c_pos, projected.positive, atol=1e-4)
    with pytest.raises(ValueError):
        linear_interpolant(np.array([0., 0.]), np.array([1., 1.]), PERIOD)


def test_grochenig_fixed_point_and_convergence():
    times = point_instants(seed=13)
    x = random_bandlimited(PERIOD, 1., seed=14)
    values = point_samples(x, times)
    fixed = grochenig_run(times, values, PERIOD, u0=x, n_iters=3)
    assert (fixed.estimate - x).norm_l2() < 1e-12
    assert fixed.converged

    result = grochenig_run(times, values, PERIOD, n_iters=30, truth=x, tol=0., snapshots=[1, 10])
    assert result.history['err_l2_rel'].iloc[-1] < 1e-6
    assert sorted(result.snapshots) == [1, 10]
    with pytest.raises(ValueError):
        grochenig_run(times[:1], values[:1], PERIOD)


def test_staircase_of_single_crossing_is_constant():
    u = staircase_initializer(np.array([4.2]), np.array([0.75]), PERIOD)
    assert_allclose(u.coeffs, Signal.constant(PERIOD, 0.75).coeffs, atol=1e-12)


def test_staircase_holds_levels():
    times = np.array([0., 10., 20.])
    levels = np.array([1., -1., 2.])
    u = staircase_initializer(times, levels, PERIOD)
    assert_allclose(u.mean, (10. - 10. + 2. * 11.) / PERIOD)
    assert_allclose(evaluate(u, 5.), 1., atol=0.15)


@pytest.mark.parametrize('lam', [0.5, 1., 1.5, 1.9])
def test_pocs_error_never_increases(lam):
    fam = interval_family(60)
    op = SamplingOperator.from_family(fam)
    x = random_bandlimited(PERIOD, 1., seed=15)
    s = integral_samples(x, fam.instants)
    result = pocs_run(ReconRun(op, s, relaxation=lam, max_iter=50, tol=0., truth=x))
    errors = result.history['err_l2_rel'].to_numpy()
    assert np.all(np.diff(errors) <= 1e-12)


@pytest.mark.parametrize('lam', [0.1, 1., 1.9])
def test_pocs_error_contracts_at_linear_rate(lam):
    fam = interval_family(60)
    op = SamplingOperator.from_family(fam)
    x = random_bandlimited(PERIOD, 1., seed=16)
    s = integral_samples(x, fam.instants)
    result = pocs_run(ReconRun(op, s, relaxation=lam, max_iter=40, tol=0., truth=x))
    errors = result.history['err_l2_rel'].to_numpy()
    errors = errors[errors > 1e-10]
    ratios = errors[1:] / errors[:-1]
    assert np.all(ratios <= op.contraction_factor(lam) + 1e-6)
    assert np.all(ratios <= op.rate(0.1) + 1e-6)


def test_grochenig_reaches_perfect_reconstruction():
    times = point_instants(seed=17, lo=0.3, hi=0.7)
    x = random_bandlimited(PERIOD, 1., seed=18)
    result = grochenig_run(times, point_samples(x, times), PERIOD, n_iters=500, truth=x, tol=0.)
    assert result.history['err_sobolev_rel'].min() < 1e-8


def test_grochenig_converges_across_a_wide_gap():
    # One gap exceeds the Nyquist period, the others are dense enough
    times = np.concatenate((np.arange(0., 28.8, 0.6), [30.3]))
    x = random_bandlimited(PERIOD, 1., seed=19)
    op = SamplingOperator.from_family(KernelFamily(KernelKind.RAMP, times, PERIOD))
    factor = op.contraction_factor(1.)
    assert factor < 0.999
    n_iters = int(min(np.ceil(np.log(1e-9) / np.log(factor)), 20000))
    result = grochenig_run(times, point_samples(x, times), PERIOD, n_iters=n_iters, truth=x, tol=0.)
    assert result.history['err_sobolev_rel'].iloc[-1] < 1e-6


def test_stop_rule_is_strict_and_relative_to_previous_iterate():
    fam = interval_family(40)
    op = SamplingOperator.from_family(fam)
    zero = op.sequence(np.zeros(len(fam)))
    assert pocs_run(ReconRun(op, zero, max_iter=5)).iterations == 1
    for result in (
            pocs_run(ReconRun(op, zero, max_iter=5, tol=0.)),
            kaczmarz_run(ReconRun(op, zero, max_iter=5, tol=0.)),
            grochenig_run(point_instants(0), np.zeros(len(point_instants(0))), PERIOD, n_iters=5, tol=0.)):
        assert result.iterations == 5
        assert not result.converged

    # The first step starts from zero, so it is measured against 1 and not against its own size
    x = random_bandlimited(PERIOD, 100., seed=6)
    result = pocs_run(ReconRun(op, integral_samples(x, fam.instants), max_iter=50, tol=1.))
    assert result.history['step_norm'].iloc[1] > 1.
    assert result.iterations > 1
