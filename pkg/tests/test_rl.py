import numpy as np
import pytest
from scipy import stats

from slicetrade.rl import (Adam, Agent, DivergenceError, Mlp, ReplayBuffer, actor_update,
                           critic_target, critic_update, explore, noise_scale, policy_gradient,
                           soft_update)
from slicetrade.rl import checkpoint


def rel_err(a, b):
    return abs(a - b) / max(abs(a) + abs(b), 1e-8)


def fd_param_check(net, x, upstream, n_coords, rng, h=1e-5):
    net.forward(x)
    grads, _ = net.backward(upstream)
    worst = 0.0
    for _ in range(n_coords):
        k = int(rng.integers(len(net.params)))
        p = net.params[k]
        idx = tuple(int(rng.integers(s)) for s in p.shape)
        old = p[idx]
        p[idx] = old + h
        up = float(np.sum(upstream * net.forward(x, cache=False)))
        p[idx] = old - h
        down = float(np.sum(upstream * net.forward(x, cache=False)))
        p[idx] = old
        num = (up - down) / (2 * h)
        if abs(num) + abs(grads[k][idx]) > 1e-7:
            worst = max(worst, rel_err(grads[k][idx], num))
    return worst


def test_forward_golden():
    # values from an independent pure-python evaluation of the same seeded weights
    net = Mlp([3, 4, 4, 2], rng=np.random.default_rng(42))
    out = net.forward(np.array([0.2, -0.7, 0.5]))
    np.testing.assert_allclose(out, [0.31592751929674473, 0.3203071587161316], rtol=0, atol=1e-15)


def test_forward_zero_weights_and_bounds():
    net = Mlp([5, 8, 8, 3], rng=np.random.default_rng(0))
    for p in net.params:
        p[...] = 0
    assert np.all(net.forward(np.ones(5)) == 0)
    net = Mlp([5, 8, 8, 3], rng=np.random.default_rng(1))
    out = net.forward(np.random.default_rng(2).normal(size=(100, 5)) * 10)
    assert np.all(np.abs(out) < 1)


def test_forward_rejects_bad_input():
    net = Mlp([2, 4, 1], rng=np.random.default_rng(0))
    with pytest.raises(FloatingPointError):
        net.forward(np.array([np.nan, 0.0]))
    with pytest.raises(ValueError):
        net.forward(np.zeros(3))
    with pytest.raises(RuntimeError):
        Mlp([2, 1]).backward(np.ones(1))


@pytest.mark.parametrize("out_act", ["tanh", "identity"])
def test_gradients_match_finite_differences(out_act):
    rng = np.random.default_rng(3)
    net = Mlp([8, 128, 128, 3], out_act=out_act, rng=rng)
    x = rng.normal(size=(4, 8))
    up = rng.normal(size=(4, 3))
    assert fd_param_check(net, x, up, 100, rng) <= 1e-4


def test_input_gradient_matches_finite_differences():
    rng = np.random.default_rng(4)
    net = Mlp([6, 16, 16, 1], out_act="identity", rng=rng)
    x = rng.normal(size=6)
    net.forward(x)
    _, gin = net.backward(np.ones(1))
    for i in range(6):
        e = np.zeros(6)
        e[i] = 1e-5
        num = (net.forward(x + e, cache=False)[0] - net.forward(x - e, cache=False)[0]) / 2e-5
        assert rel_err(gin[i], num) <= 1e-4 or abs(gin[i] - num) < 1e-9


def test_linear_layer_gradient_is_outer_product():
    net = Mlp([3, 2], out_act="identity", rng=np.random.default_rng(0))
    x = np.array([1.0, -2.0, 0.5])
    g = np.array([0.3, -1.0])
    net.forward(x)
    grads, gin = net.backward(g)
    np.testing.assert_allclose(grads[0], np.outer(x, g))
    np.testing.assert_allclose(grads[1], g)
    np.testing.assert_allclose(gin, net.W[0] @ g)


def test_zero_upstream_gives_zero_gradients():
    net = Mlp([4, 8, 2], rng=np.random.default_rng(0))
    net.forward(np.ones(4))
    grads, gin = net.backward(np.zeros(2))
    assert all(np.all(g == 0) for g in grads) and np.all(gin == 0)


def test_soft_update_values():
    a = Mlp([1, 1], out_act="identity", rng=np.random.default_rng(0))
    t = a.clone()
    for p in a.params:
        p[...] = 1.0
    for p in t.params:
        p[...] = 0.0
    soft_update(t, a, 0.001)
    assert abs(t.W[0][0, 0] - 0.001) <= 1e-12
    soft_update(t, a, 0.0)
    assert abs(t.W[0][0, 0] - 0.001) <= 1e-12
    soft_update(t, a, 1.0)
    assert t.W[0][0, 0] == 1.0
    with pytest.raises(ValueError):
        soft_update(Mlp([2, 1]), a, 0.5)


def test_soft_update_contracts():
    rng = np.random.default_rng(0)
    a, t = Mlp([3, 5, 2], rng=rng), Mlp([3, 5, 2], rng=rng)

    def dist():
        return np.sqrt(sum(np.sum((x - y) ** 2) for x, y in zip(t.params, a.params)))

    prev = dist()
    for _ in range(5):
        soft_update(t, a, 0.3)
        assert dist() < prev
        prev = dist()


def test_agent_targets_identical_after_construction():
    ag = Agent(3, 1, 5, hidden=(16, 16), rng=np.random.default_rng(0))
    for online, target in ((ag.actor, ag.target_actor), (ag.critic, ag.target_critic)):
        for p, q in zip(online.params, target.params):
            assert p is not q and np.array_equal(p, q)


def test_adam_zero_gradient_is_noop():
    net = Mlp([2, 3, 1], rng=np.random.default_rng(0))
    before = [p.copy() for p in net.params]
    opt = Adam(net.params)
    opt.step([np.zeros_like(p) for p in net.params])
    assert all(np.array_equal(p, q) for p, q in zip(net.params, before))
    assert opt.t == 1


def test_adam_first_step_size():
    p = [np.array([1.0])]
    Adam(p, lr=0.1).step([np.array([5.0])])
    assert p[0][0] == pytest.approx(0.9, abs=1e-6)


class _Grid3:
    """Target critic whose value depends only on the own-action column."""

    def __call__(self, x):
        table = {-1.0: 1.0, 0.0: 5.0, 1.0: 2.0}
        return np.array([[table[float(v)]] for v in x[:, 1]])


def test_critic_target_variants():
    r = np.array([1.0, -2.0])
    x = np.array([[0.5, 0.0], [0.1, 0.0]])
    net = Mlp([2, 4, 1], out_act="identity", rng=np.random.default_rng(0))
    np.testing.assert_allclose(critic_target(r, x, net, 0.0).ravel(), r)
    y = critic_target(np.array([1.0]), np.array([[0.3, -1.0]]), _Grid3(), 0.9,
                      own_grid=[-1.0, 0.0, 1.0], own_cols=[1])
    assert y[0, 0] == pytest.approx(5.5, abs=1e-12)
    zero = lambda x: np.zeros((len(x), 1))
    np.testing.assert_allclose(critic_target(r, x, zero, 0.9).ravel(), r)


def test_critic_update_hand_value_and_fixed_point():
    ag = Agent(1, 1, 2, hidden=(), rng=np.random.default_rng(0))
    ag.critic = Mlp([2, 1], out_act="identity", rng=np.random.default_rng(0))
    ag.critic.W[0][...] = [[2.0], [-1.0]]
    ag.critic.b[0][...] = [0.5]
    ag.critic_opt = Adam(ag.critic.params)
    x = np.array([[1.0, 3.0]])
    # Q = 2 - 3 + 0.5 = -0.5, y = 1 -> loss 2.25
    assert critic_update(ag, x, np.array([1.0])) == pytest.approx(2.25)
    ag.critic_opt = Adam(ag.critic.params)  # fresh moments
    before = [p.copy() for p in ag.critic.params]
    q = ag.critic.forward(x)
    assert critic_update(ag, x, q) == 0.0
    assert all(np.array_equal(p, b) for p, b in zip(ag.critic.params, before))


def test_critic_update_rejects_nonfinite():
    ag = Agent(1, 1, 2, hidden=(4,), rng=np.random.default_rng(0))
    with pytest.raises(DivergenceError):
        critic_update(ag, np.zeros((2, 2)), np.array([np.inf, 0.0]))


class _FixedCritic:
    """Critic stub Q(x) = f(x[:, col]) with analytic input gradient."""

    def __init__(self, f, df, width, col):
        self.f, self.df, self.width, self.col = f, df, width, col

    def forward(self, x, cache=True):
        self._x = np.asarray(x, dtype=float)
        return self.f(self._x[:, self.col])[:, None]

    def backward(self, g):
        gin = np.zeros_like(self._x)
        gin[:, self.col] = g[:, 0] * self.df(self._x[:, self.col])
        return None, gin


def test_actor_gradient_zero_for_constant_critic():
    ag = Agent(2, 1, 3, hidden=(8, 8), rng=np.random.default_rng(0))
    ag.critic = _FixedCritic(lambda a: np.full_like(a, 3.0), np.zeros_like, 3, 2)
    grads, q = policy_gradient(ag, np.ones((5, 2)), np.zeros((5, 3)), [2])
    assert q == 3.0 and all(np.all(g == 0) for g in grads)


def test_actor_climbs_quadratic_critic():
    ag = Agent(1, 1, 2, hidden=(16, 16), rng=np.random.default_rng(0))
    ag.critic = _FixedCritic(lambda a: -(a - 0.5) ** 2, lambda a: -2 * (a - 0.5), 2, 1)
    s = np.random.default_rng(1).uniform(0, 1, size=(32, 1))
    x = np.zeros((32, 2))
    start = abs(ag.act(s).mean() - 0.5)
    for _ in range(300):
        actor_update(ag, s, x, [1])
    assert abs(ag.act(s).mean() - 0.5) < min(0.02, start)


def test_policy_gradient_matches_finite_differences():
    rng = np.random.default_rng(5)
    ag = Agent(3, 2, 5, hidden=(8, 8), rng=rng)
    s = rng.uniform(0, 1, size=(6, 3))
    base = rng.normal(size=(6, 5))
    own = [3, 4]

    def objective():
        x = base.copy()
        x[:, own] = ag.actor.forward(s, cache=False)
        return float(ag.critic.forward(x, cache=False).mean())

    grads, _ = policy_gradient(ag, s, base, own)
    worst = 0.0
    for k, p in enumerate(ag.actor.params):
        for _ in range(5):
            idx = tuple(int(rng.integers(d)) for d in p.shape)
            old = p[idx]
            p[idx] = old + 1e-5
            up = objective()
            p[idx] = old - 1e-5
            down = objective()
            p[idx] = old
            num = -(up - down) / 2e-5
            if abs(num) + abs(grads[k][idx]) > 1e-8:
                worst = max(worst, rel_err(grads[k][idx], num))
    assert worst <= 1e-3


def test_explore_and_noise_schedule():
    a = np.array([0.2, -0.95, 0.99])
    assert np.array_equal(explore(a, 0.0, np.random.default_rng(0)), a)
    out = [explore(a, 2.0, np.random.default_rng(s)) for s in range(50)]
    assert all(np.all(np.abs(o) <= 1) for o in out)
    np.testing.assert_array_equal(explore(a, 0.3, np.random.default_rng(7)),
                                  explore(a, 0.3, np.random.default_rng(7)))
    assert noise_scale(0, 2500) == 0.3
    assert noise_scale(1500, 2500) == pytest.approx(0.01)
    assert noise_scale(2400, 2500) == pytest.approx(0.01)
    assert noise_scale(750, 2500) == pytest.approx(0.155)


def test_replay_fifo_and_length():
    buf = ReplayBuffer(3, 1, 1)
    for i in range(5):
        buf.push([i], [i], i, [i + 1])
        assert len(buf) == min(i + 1, 3)
    s, a, r, s2 = buf.contents()
    assert s.ravel().tolist() == [2, 3, 4]
    assert buf.sample(4, np.random.default_rng(0)) is None
    full = buf.sample(3, np.random.default_rng(0))
    assert sorted(full[0].ravel().tolist()) == [2, 3, 4]


def test_replay_sampling_uniform_chi_square():
    buf = ReplayBuffer(10, 1, 1)
    for i in range(10):
        buf.push([i], [0], 0, [0])
    rng = np.random.default_rng(123)
    counts = np.zeros(10)
    for _ in range(100_000):
        counts[int(buf.sample(1, rng)[0][0, 0])] += 1
    assert stats.chisquare(counts).pvalue > 0.01


def test_updates_deterministic():
    def run():
        ag = Agent(2, 1, 3, hidden=(16, 16), rng=np.random.default_rng(9))
        rng = np.random.default_rng(10)
        for _ in range(5):
            s = rng.uniform(size=(8, 2))
            x = np.hstack([s, rng.uniform(-1, 1, size=(8, 1))])
            critic_update(ag, x, rng.normal(size=8))
            actor_update(ag, s, x, [2])
            ag.soft_update()
        return checkpoint.dumps(ag.networks())

    assert run() == run()


def test_checkpoint_round_trip(tmp_path):
    ag = Agent(3, 2, 5, hidden=(7, 4), rng=np.random.default_rng(0))
    text = checkpoint.dumps(ag.networks())
    path = tmp_path / "ck.txt"
    checkpoint.save(path, ag.networks())
    nets = checkpoint.load(path)
    assert checkpoint.dumps(nets) == text
    x = np.random.default_rng(1).normal(size=(3, 3))
    np.testing.assert_array_equal(nets["actor"].forward(x), ag.actor.forward(x))
    with pytest.raises(ValueError):
        checkpoint.loads("not a checkpoint\n")
