import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from polyhom.energy import PairPotential
from polyhom.estimators import FreeEnergyDensity, ScalingRegressor, ZeroTemperatureDensity
from polyhom.finite_temp import QuadraticModel, gaussian_free_energy
from polyhom.fixtures import SMALL_BAND, SMALL_DOMAIN, quad20
from polyhom.graph import GraphParams

LAMS = np.array([np.eye(2), np.diag([1.3, 0.8])])


def lattice_kw():
    return dict(graph_params=GraphParams(jitter=0.0), domain=SMALL_DOMAIN, band=SMALL_BAND,
                pair=PairPotential(kind="quadratic"))


def test_get_params_and_clone():
    est = ZeroTemperatureDensity(window=40.0, seeds=(1, 2), n_restarts=2)
    p = est.get_params()
    assert p["window"] == 40.0 and p["seeds"] == (1, 2) and p["n_restarts"] == 2
    c = clone(est)
    assert c.get_params() == p and c is not est
    est.set_params(mode="soft")
    assert est.mode == "soft"
    assert set(FreeEnergyDensity().get_params()) >= {"beta", "method", "ti_params"}


def test_predict_before_fit_raises():
    with pytest.raises(NotFittedError):
        ZeroTemperatureDensity().predict(LAMS)


def test_zero_temperature_matches_linear_solve():
    est = ZeroTemperatureDensity(n_restarts=1, **lattice_kw()).fit()
    pred, std = est.predict(LAMS, return_std=True)
    q = quad20()
    for L, v in zip(LAMS, pred):
        m = QuadraticModel.build(*q.args, q.pair, Lambda=L, band=q.band)
        assert v == pytest.approx(m.min_energy / m.volume, rel=1e-10)
    assert np.all(std == 0)
    # flat rows are accepted too
    assert np.allclose(est.predict(LAMS.reshape(2, 4)), pred)


def test_free_energy_exact_matches_closed_form():
    est = FreeEnergyDensity(beta=5.0, **lattice_kw()).fit()
    q = quad20()
    ref = gaussian_free_energy(QuadraticModel.build(*q.args, q.pair, Lambda=LAMS[1], band=q.band), 5.0).value
    assert est.predict(LAMS)[1] == pytest.approx(ref, rel=1e-12)


def test_estimator_validation():
    with pytest.raises(ValueError):
        FreeEnergyDensity(method="guess", **lattice_kw()).fit()
    with pytest.raises(ValueError):
        FreeEnergyDensity(pair=None, domain=SMALL_DOMAIN).fit()
    with pytest.raises(ValueError):
        ZeroTemperatureDensity(seeds=(1, 1), **lattice_kw()).fit()
    with pytest.raises(ValueError):
        FreeEnergyDensity(beta=-1.0, **lattice_kw()).fit()
    with pytest.raises(ValueError):
        ZeroTemperatureDensity(**lattice_kw()).fit().predict(np.ones((2, 3)))


def test_scaling_regressor_round_trip():
    x = np.array([3.0, 10.0, 100.0, 1000.0])
    y = 0.4 * np.log(x) / x
    reg = ScalingRegressor().fit(x[:, None], y)
    assert reg.coef_[0] == pytest.approx(0.4)
    assert np.allclose(reg.predict(x[:, None]), y)
    assert reg.score(x[:, None], y) == pytest.approx(1.0)
    inv = ScalingRegressor(model="inverse-L").fit(x, 1.0 + 2.0 / x, sample_weight=np.full(4, 10.0))
    assert np.allclose(inv.coef_, [1.0, 2.0])
    assert clone(inv).get_params()["model"] == "inverse-L"
