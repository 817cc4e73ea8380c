import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hetclose.dist import Distribution, Histogram, make_family, tv_distance
from hetclose.rng import Rng, trial_generator
from hetclose.shuffle import (
    MixtureParams,
    PoissonMechanismParams,
    ShuffleConfig,
    ShuffledHistogram,
    bin_numerators,
    compressed_domain_size,
    couple,
    mixture,
    mixture_params,
    poisson_mu,
    poisson_mu_bound,
    run_shuffle_private_coin,
    run_shuffle_public_coin,
    shuffle_statistic,
    simulate_shuffler,
    uneven_closeness_statistic,
)


def test_poisson_mu_formula_value():
    shrink = 1 - math.exp(-1)
    oracle = 16 * math.log(100) / shrink**2 + 2 / shrink
    assert poisson_mu_bound(1.0, 0.1, 1) == pytest.approx(oracle, rel=1e-14)
    assert 187 < oracle < 188
    assert poisson_mu(1.0, 0.1, 1) == 188


@pytest.mark.parametrize(
    "eps",
    [
        pytest.param(
            0.5,
            marks=pytest.mark.xfail(
                strict=True, reason="(1 - e^-eps)^2 curvature: mu(0.25)/mu(0.5) evaluates to 3.16, below 3.5"
            ),
        ),
        0.25,
    ],
)
def test_poisson_mu_halving_eps(eps):
    ratio = poisson_mu(eps / 2, 1e-6) / poisson_mu(eps, 1e-6)
    assert 3.5 <= ratio <= 4.5


def test_poisson_mu_ratio_tends_to_four():
    ratios = [poisson_mu_bound(e / 2, 1e-6) / poisson_mu_bound(e, 1e-6) for e in (0.5, 0.1, 0.01)]
    assert ratios[0] < ratios[1] < ratios[2] < 4
    assert ratios[2] == pytest.approx(4, rel=0.01)


def test_poisson_mu_monotone_and_errors():
    mus = [poisson_mu(e, 1e-6) for e in np.linspace(0.05, 1.0, 20)]
    assert all(a >= b for a, b in zip(mus, mus[1:]))
    with pytest.raises(ValueError):
        poisson_mu(1.0, 1.0)
    with pytest.raises(ValueError):
        poisson_mu(0.0, 0.1)
    with pytest.raises(ValueError):
        poisson_mu(1.0, 0.1, 0)


def test_mechanism_params_enforce_bound():
    PoissonMechanismParams(1.0, 0.1, 1, 188)
    with pytest.raises(ValueError):
        PoissonMechanismParams(1.0, 0.1, 1, 187)


def test_shuffler_pure_noise_moments():
    gen = Rng(0).generator()
    u = Distribution.uniform(4)
    draws = np.array([simulate_shuffler(u, 0, 5, gen).counts for _ in range(10_000)])
    assert np.all(np.abs(draws.mean(axis=0) - 5) < 0.2)


def test_shuffler_point_mass_no_noise():
    h = simulate_shuffler(Distribution.point_mass(5, 0), 30, 0, Rng(1))
    assert h.counts[1:].sum() == 0
    assert h.counts[0] > 0


def test_shuffler_moments_and_independence():
    p = Distribution([0.5, 0.3, 0.2])
    n, mu = 40, 7
    gen = Rng(2).generator()
    draws = np.array([simulate_shuffler(p, n, mu, gen).counts for _ in range(100_000)])
    lam = n * p.pmf + mu
    assert np.all(np.abs(draws.mean(axis=0) / lam - 1) < 0.1)
    assert np.all(np.abs(draws.var(axis=0) / lam - 1) < 0.1)
    cov = np.cov(draws.T)
    assert abs(cov[0, 1]) < 0.05 * math.sqrt(lam[0] * lam[1])


def test_per_user_path_has_same_law():
    p = Distribution([0.6, 0.3, 0.1])
    n, mu = 30, 4.0
    gen = Rng(3).generator()
    fast = np.array([simulate_shuffler(p, n, mu, gen, poissonize=False).counts for _ in range(20000)])
    slow = np.array([simulate_shuffler(p, n, mu, gen, poissonize=False, per_user=True).counts for _ in range(20000)])
    se = np.sqrt(fast.var(axis=0) / 20000 + slow.var(axis=0) / 20000)
    assert np.all(np.abs(fast.mean(axis=0) - slow.mean(axis=0)) < 4 * se)
    # variance: multinomial plus Poisson noise
    var_oracle = n * p.pmf * (1 - p.pmf) + mu
    assert np.all(np.abs(slow.var(axis=0) / var_oracle - 1) < 0.1)
    with pytest.raises(ValueError):
        simulate_shuffler(p, n, mu, gen, per_user=True)


def test_shuffled_histogram_json():
    h = ShuffledHistogram(np.array([3, 0, 2]), 2)
    back = ShuffledHistogram.from_json(h.to_json(), 2)
    assert back.counts.tolist() == [3, 0, 2]
    assert json.loads(h.to_json()) == [3, 0, 2]
    with pytest.raises(ValueError):
        ShuffledHistogram.from_json('{"a": 1}', 1)
    with pytest.raises(ValueError):
        ShuffledHistogram(np.array([1, -1]), 1)
    with pytest.raises(ValueError):
        ShuffledHistogram(np.array([1]), 3)


def test_mixture_params_arithmetic():
    mp = MixtureParams(10, 1000, 1000, 50, 50)
    assert mp.N1 == 1500
    assert mp.gamma1 == Fraction(1, 3)
    with pytest.raises(ValueError):
        MixtureParams(10, 1000, 1000, 50, 51)


def test_coupling_four_times_noise():
    n1, n2, mu2 = couple(100, 50, 200)
    assert (n1, n2, mu2) == (100, 400, 200)
    mp = MixtureParams(10, n1, n2, 50, mu2)
    assert mp.gamma1 == mp.gamma2


def test_mixture_params_symmetric():
    mp = mixture_params(20, 300, 0.7, 0.7, 1e-6)
    assert mp.mu1 == mp.mu2 and mp.n1 == mp.n2 == 300
    with pytest.raises(ValueError):
        mixture_params(20, 300, 0.5, 0.7, 1e-6)


@settings(max_examples=200)
@given(st.integers(1, 5000), st.integers(1, 3000), st.integers(1, 3000))
def test_coupling_exact(n1, mu1, mu2):
    a, b, m2 = couple(n1, mu1, mu2)
    assert a >= n1 and m2 >= mu2
    assert a * m2 == b * mu1


def test_mixture_identity_exact_on_rationals():
    gen = np.random.default_rng(7)
    for _ in range(100):
        k = int(gen.integers(2, 12))
        wp, wq = gen.integers(1, 20, size=k), gen.integers(1, 20, size=k)
        p = [Fraction(int(w), int(wp.sum())) for w in wp]
        q = [Fraction(int(w), int(wq.sum())) for w in wq]
        n1, mu1, mu2 = int(gen.integers(1, 500)), int(gen.integers(1, 100)), int(gen.integers(1, 100))
        a, b, m2 = couple(n1, mu1, mu2)
        mp = MixtureParams(k, a, b, mu1, m2)
        g = mp.gamma1
        assert g == mp.gamma2
        pp = [(1 - g) * x + g / k for x in p]
        qq = [(1 - g) * x + g / k for x in q]
        tv = sum(abs(x - y) for x, y in zip(p, q)) / 2
        tv2 = sum(abs(x - y) for x, y in zip(pp, qq)) / 2
        assert tv2 == (1 - g) * tv


def test_mixture_float_matches():
    p, q = make_family("two-spike", 10, 0.4)
    g = 0.3
    assert tv_distance(mixture(p, g), mixture(q, g)) == pytest.approx(0.7 * 0.4, abs=1e-12)


def test_uneven_statistic_hand_value():
    z = uneven_closeness_statistic(Histogram([2, 0]), Histogram([1, 1]), 2, 2)
    assert z == pytest.approx(-8 / 3)


def test_uneven_statistic_equal_inputs_nonpositive():
    x = Histogram([3, 0, 5, 1])
    assert uneven_closeness_statistic(x, x, 7, 7) <= 0
    assert np.all(bin_numerators(x.counts, x.counts, 7, 7) == -2 * 49 * x.counts)
    with pytest.raises(ValueError):
        uneven_closeness_statistic(x, x, 0, 7)
    with pytest.raises(ValueError):
        uneven_closeness_statistic(x, Histogram([1, 1]), 7, 7)


def test_uneven_numerator_null_centred():
    gen = Rng(8).generator()
    N1, N2 = 60, 150
    lam = np.array([0.2, 0.3, 0.5])
    x = gen.poisson(N1 * lam, size=(10_000, 3))
    y = gen.poisson(N2 * lam, size=(10_000, 3))
    num = bin_numerators(x, y, N1, N2)
    se = num.std(axis=0, ddof=1) / math.sqrt(num.shape[0])
    assert np.all(np.abs(num.mean(axis=0)) < 3 * se)


def test_uneven_numerator_mean_under_alternative():
    gen = Rng(9).generator()
    N1, N2 = 40, 90
    p, q = np.array([0.6, 0.4]), np.array([0.3, 0.7])
    x = gen.poisson(N1 * p, size=(200_000, 2))
    y = gen.poisson(N2 * q, size=(200_000, 2))
    num = bin_numerators(x, y, N1, N2)
    oracle = N1**2 * N2**2 * (p - q) ** 2
    se = num.std(axis=0, ddof=1) / math.sqrt(num.shape[0])
    assert np.all(np.abs(num.mean(axis=0) - oracle) < 4 * se)


def test_compressed_domain_size():
    raw = 1e4 ** (2 / 3) / (0.5 ** (4 / 3) * 188 ** (2 / 3))
    assert compressed_domain_size(10_000, 0.5, 188) == max(2, math.floor(raw))
    assert compressed_domain_size(20, 0.5, 649) == 2
    assert compressed_domain_size(5, 0.01, 1) == 5


def test_shuffle_config_validation():
    with pytest.raises(ValueError):
        ShuffleConfig(10, 0.5, 0.5, 1.0, 1e-6, 100)
    with pytest.raises(ValueError):
        ShuffleConfig(10, 0.5, 1.0, 0.5, 0.0, 100)
    with pytest.raises(ValueError):
        ShuffleConfig(10, 0.5, 1.0, 0.5, 1e-6, 100, repetitions=2)
    cfg = ShuffleConfig(10, 0.5, 1.0, 0.5, 1e-6, 100)
    with pytest.raises(ValueError):
        run_shuffle_private_coin(cfg, Distribution.uniform(10), Distribution.uniform(10), Rng(0))


def test_per_group_delta():
    cfg = ShuffleConfig(10, 0.5, 1.0, 0.5, 1e-6, 100, delta2=1e-3)
    assert cfg.mixture.mu2 >= poisson_mu(0.5, 1e-3)
    assert cfg.mixture.mu2 < poisson_mu(0.5, 1e-6)


def test_shuffle_private_power_small_run():
    k = 20
    cfg0 = ShuffleConfig(k, 0.5, 1.0, 0.5, 1e-6, 354)
    u = Distribution.uniform(k)
    p, q = make_family("two-spike", k, 0.5)
    null = [shuffle_statistic(u, u, cfg0.mixture, trial_generator(0, 2, i)) for i in range(600)]
    t = float(np.quantile(null, 2 / 3))
    cfg = ShuffleConfig(k, 0.5, 1.0, 0.5, 1e-6, 354, threshold=t)
    acc = np.mean([run_shuffle_private_coin(cfg, u, u, trial_generator(0, 0, i)).accept for i in range(300)])
    rej = np.mean([run_shuffle_private_coin(cfg, p, q, trial_generator(0, 1, i)).reject for i in range(300)])
    assert acc >= 2 / 3 - 2 * math.sqrt(2 / 9 / 300)
    assert rej >= 0.9


def test_shuffle_public_equal_pair():
    k = 32
    cfg = ShuffleConfig(k, 0.5, 1.0, 0.5, 1e-6, 200, threshold=0.0, public_coin=True, compressed_size=4, repetitions=3)
    assert cfg.domain == 4
    u = Distribution.uniform(k)
    v = run_shuffle_public_coin(cfg, u, u, Rng(1))
    assert v.threshold == 0.5
