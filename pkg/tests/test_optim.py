"""Adam updates against hand-computed reference values."""

import numpy as np

from xelink.optim import Adam


def test_first_step_matches_closed_form():
    # after one step m_hat = g, v_hat = g^2, so the update is lr * sign-ish
    theta = {"w": np.array([1.0, -2.0])}
    opt = Adam(theta, lr=0.1)
    g = np.array([0.5, -3.0])
    opt.step({"w": g})
    expected = np.array([1.0, -2.0]) - 0.1 * g / (np.abs(g) + 1e-8)
    np.testing.assert_allclose(theta["w"], expected, atol=1e-12)


def test_two_steps_match_scalar_recurrence():
    lr, b1, b2, eps = 1e-3, 0.9, 0.999, 1e-8
    theta = {"w": np.array([0.3])}
    opt = Adam(theta, lr=lr, beta1=b1, beta2=b2, eps=eps)
    grads = [np.array([0.7]), np.array([-0.2])]
    w, m, v = 0.3, 0.0, 0.0
    for t, g in enumerate(grads, start=1):
        m = b1 * m + (1 - b1) * g[0]
        v = b2 * v + (1 - b2) * g[0] ** 2
        w -= lr * (m / (1 - b1**t)) / (np.sqrt(v / (1 - b2**t)) + eps)
        opt.step({"w": g})
    np.testing.assert_allclose(theta["w"], [w], atol=1e-15)


def test_updates_in_place_and_deterministic():
    rng = np.random.default_rng(0)
    p1 = {"a": rng.normal(size=5), "b": rng.normal(size=(2, 3))}
    p2 = {k: v.copy() for k, v in p1.items()}
    o1, o2 = Adam(p1), Adam(p2)
    for _ in range(10):
        g = {"a": rng.normal(size=5), "b": rng.normal(size=(2, 3))}
        o1.step(g)
        o2.step({k: v.copy() for k, v in g.items()})
    for k in p1:
        np.testing.assert_array_equal(p1[k], p2[k])
