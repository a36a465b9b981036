import numpy as np
import pytest

from litresponse.blockenc import ShotNoiseModel
from litresponse.chebyshev import compute_moments
from litresponse.moments import MomentProvider, problem_rescaling


@pytest.fixture(scope="module")
def resc(sd):
    _, H, _, _ = sd
    return problem_rescaling(H, 3)


def test_recursion_and_walk_agree(sd, resc):
    _, H, space, omega = sd
    a = MomentProvider(H, resc, "recursion")(space, omega, 150)
    b = MomentProvider(H, resc, "walk")(space, omega, 150)
    assert np.max(np.abs(a.moments - b.moments)) <= 1e-10
    ref = compute_moments(H, space, omega, 150, resc)
    assert np.array_equal(a.moments, ref.moments)


def test_noise_streams(sd, resc):
    _, H, space, omega = sd
    p = MomentProvider(H, resc, "walk+noise", ShotNoiseModel(1000, 7))
    a, b = p(space, omega, 20, tag=(1,)), p(space, omega, 20, tag=(1,))
    c = p(space, omega, 20, tag=(2,))
    assert np.array_equal(a.moments, b.moments)
    assert not np.array_equal(a.moments, c.moments)
    assert a.meta["shots"] == 1000 and a.meta["seed"] == 7
    other = MomentProvider(H, resc, "walk+noise", ShotNoiseModel(1000, 8))(space, omega, 20, tag=(1,))
    assert not np.array_equal(a.moments, other.moments)


def test_variance(sd, resc):
    _, H, space, omega = sd
    p = MomentProvider(H, resc, "walk+noise", ShotNoiseModel(400, 0))
    ms = p(space, omega, 10)
    var = p.moment_variance(ms)
    assert var[0] == 0 and np.all(var[1:] <= 1 / 400 + 1e-15)
    assert np.all(MomentProvider(H, resc)(space, omega, 3) is not None)
    assert np.all(MomentProvider(H, resc).moment_variance(ms) == 0)


def test_bad_method(sd, resc):
    _, H, _, _ = sd
    with pytest.raises(ValueError):
        MomentProvider(H, resc, "magic")
    with pytest.raises(ValueError):
        MomentProvider(H, resc, "walk+noise")
