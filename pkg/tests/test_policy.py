from __future__ import annotations

import math

import numpy as np
import pytest
import torch

from nearmiss.policy.checkpoint import (
    CheckpointError,
    load_arrays,
    module_arrays,
    restore_module,
    save_arrays,
)
from nearmiss.policy.networks import Actor
from nearmiss.policy.observation import OBS_DIM, build_observation
from nearmiss.policy.replay import ReplayBuffer
from nearmiss.policy.sac import SacAgent, SacConfig, smooth_action
from nearmiss.world.routing import plan_route
from nearmiss.world.state import WorldState
from nearmiss.world.vehicle import VehicleState


# ---------------------------------------------------------------------------
# observation


def _route(straight_map):
    return plan_route(straight_map, np.array([0.0, 0.0]), np.array([190.0, 0.0]))


def test_observation_at_rest_no_neighbors(straight_map):
    w = WorldState(graph=straight_map, ego=VehicleState(x=10.0, y=0.0, heading=0.0))
    w.localize_all()
    obs = build_observation(w, _route(straight_map))
    assert obs.shape == (OBS_DIM,)
    assert obs[0] == 0.0 and obs[1] == 0.0 and obs[2] == 0.0
    block = obs[3 + 30:].reshape(4, 4)
    assert np.allclose(block, np.tile([1.0, 1.0, 0.0, 0.0], (4, 1)))


def test_observation_neighbor_normalization(straight_map):
    ego = VehicleState(x=10.0, y=0.0, heading=0.0, speed=4.0)
    agent = VehicleState(x=20.0, y=0.0, heading=0.0, speed=2.0)
    w = WorldState(graph=straight_map, ego=ego, agents={"a": agent})
    w.localize_all()
    obs = build_observation(w, _route(straight_map))
    block = obs[3 + 30:].reshape(4, 4)
    assert block[0, 0] == pytest.approx(10.0 / 50.0)
    assert block[0, 1] == pytest.approx(0.0)
    # closing at 2 m/s: relative vx is -2 / (2 * max speed)
    assert block[0, 2] == pytest.approx(-2.0 / (2.0 * 16.7))


def test_observation_deterministic_and_bounded(straight_map):
    rng = np.random.default_rng(2)
    ego = VehicleState(x=50.0, y=0.5, heading=0.1, speed=9.0, steering=0.2,
                       accel_cmd=-0.4)
    agents = {f"a{i}": VehicleState(x=float(rng.uniform(0, 200)),
                                    y=float(rng.uniform(-4, 4)),
                                    speed=float(rng.uniform(0, 16)))
              for i in range(6)}
    w = WorldState(graph=straight_map, ego=ego, agents=agents)
    w.localize_all()
    o1 = build_observation(w, _route(straight_map))
    o2 = build_observation(w, _route(straight_map))
    assert np.array_equal(o1, o2)
    assert o1.min() >= -1.0 and o1.max() <= 1.0


# ---------------------------------------------------------------------------
# actor distribution


def test_actor_deterministic_mode_is_tanh_mean():
    actor = Actor(4, 2, (8, 8)).double()
    obs = torch.randn(3, 4, dtype=torch.float64)
    action, _ = actor.sample(obs, deterministic=True)
    mean, _ = actor(obs)
    assert torch.allclose(action, torch.tanh(mean))


def test_actor_actions_strictly_inside_unit_box():
    actor = Actor(4, 2, (8, 8))
    gen = torch.Generator().manual_seed(0)
    obs = torch.randn(64, 4, generator=gen)
    action, _ = actor.sample(obs, generator=gen)
    assert float(action.detach().abs().max()) < 1.0


def test_log_prob_density_integrates_to_one():
    # quadrature oracle on a 1-D action: integral of exp(log_prob) over (-1, 1)
    torch.manual_seed(3)
    actor = Actor(3, 1, (6,)).double()
    obs = torch.randn(1, 3, dtype=torch.float64)
    mean, log_std = actor(obs)
    mu, sigma = float(mean.detach()[0, 0]), float(log_std.detach().exp()[0, 0])
    z = torch.linspace(mu - 8 * sigma, mu + 8 * sigma, 20001, dtype=torch.float64)
    noise = ((z - mean[0, 0]) / log_std.exp()[0, 0]).reshape(-1, 1)
    obs_rep = obs.expand(len(z), 3)
    action, logp = actor.sample(obs_rep, noise=noise)
    a = action[:, 0].detach().numpy()
    density = np.exp(logp.detach().numpy())
    integral = np.trapezoid(density, a)
    assert integral == pytest.approx(1.0, abs=1e-3)


def test_log_prob_matches_change_of_variables():
    torch.manual_seed(5)
    actor = Actor(3, 2, (6,)).double()
    obs = torch.randn(4, 3, dtype=torch.float64)
    noise = torch.randn(4, 2, dtype=torch.float64)
    action, logp = actor.sample(obs, noise=noise)
    mean, log_std = actor(obs)
    pre = mean + log_std.exp() * noise
    gauss = torch.distributions.Normal(mean, log_std.exp()).log_prob(pre).sum(-1)
    jac = torch.log1p(-torch.tanh(pre) ** 2).sum(-1)
    assert torch.allclose(logp, gauss - jac, atol=1e-9)


# ---------------------------------------------------------------------------
# gradient checks


def _tiny_agent(seed=0) -> SacAgent:
    cfg = SacConfig(hidden=(3, 3), batch_size=8, buffer_capacity=64,
                    learning_starts=0, total_steps=100)
    return SacAgent(obs_dim=4, act_dim=2, config=cfg, seed=seed,
                    dtype=torch.float64)


def _tiny_batch(rng) -> dict[str, np.ndarray]:
    return {
        "obs": rng.normal(size=(8, 4)),
        "act": np.tanh(rng.normal(size=(8, 2))),
        "rew": rng.normal(size=8),
        "next_obs": rng.normal(size=(8, 4)),
        "done": (rng.random(8) < 0.2).astype(float),
    }


def _fd_check(params, loss_fn, tol=1e-4):
    loss = loss_fn()
    grads = torch.autograd.grad(loss, params, allow_unused=True)
    for p, g in zip(params, grads):
        if g is None:
            continue
        flat = p.data.view(-1)
        gflat = g.view(-1)
        for idx in range(flat.numel()):
            eps = 1e-6
            orig = float(flat[idx])
            flat[idx] = orig + eps
            hi = float(loss_fn().detach())
            flat[idx] = orig - eps
            lo = float(loss_fn().detach())
            flat[idx] = orig
            fd = (hi - lo) / (2 * eps)
            scale = max(abs(fd), abs(float(gflat[idx])), 1e-6)
            assert abs(fd - float(gflat[idx])) / scale < tol, \
                f"fd {fd} vs autograd {float(gflat[idx])}"


def test_critic_gradients_match_finite_differences():
    agent = _tiny_agent(1)
    rng = np.random.default_rng(1)
    batch = _tiny_batch(rng)
    noise = torch.randn(8, 2, dtype=torch.float64,
                        generator=torch.Generator().manual_seed(9))
    params = list(agent.critic.parameters())
    _fd_check(params, lambda: agent.critic_loss(batch, next_noise=noise))


def test_actor_gradients_match_finite_differences():
    agent = _tiny_agent(2)
    rng = np.random.default_rng(2)
    batch = _tiny_batch(rng)
    noise = torch.randn(8, 2, dtype=torch.float64,
                        generator=torch.Generator().manual_seed(11))
    params = list(agent.actor.parameters())
    _fd_check(params, lambda: agent.actor_loss(batch, noise=noise))


def test_temperature_gradient_matches_finite_differences():
    agent = _tiny_agent(3)
    logp = torch.tensor([-1.3, 0.4, -2.2], dtype=torch.float64)
    loss = agent.alpha_loss(logp)
    (g,) = torch.autograd.grad(loss, [agent.log_alpha])
    eps = 1e-6
    agent.log_alpha.data += eps
    hi = float(agent.alpha_loss(logp).detach())
    agent.log_alpha.data -= 2 * eps
    lo = float(agent.alpha_loss(logp).detach())
    agent.log_alpha.data += eps
    fd = (hi - lo) / (2 * eps)
    assert abs(fd - float(g)) < 1e-6


# ---------------------------------------------------------------------------
# update mechanics


def test_polyak_update_is_exact_convex_combination():
    agent = _tiny_agent(4)
    tau = agent.config.tau
    before = [p.detach().clone() for p in agent.critic_target.parameters()]
    agent.polyak_update()
    for old, p, tp in zip(before, agent.critic.parameters(),
                          agent.critic_target.parameters()):
        expected = old.mul(1.0 - tau).add(tau * p.detach())
        assert torch.equal(tp.detach(), expected)


def test_lr_schedule_endpoints_and_linearity():
    cfg = SacConfig(total_steps=100_000)
    assert cfg.lr_at(0) == pytest.approx(1e-4)
    assert cfg.lr_at(100_000) == pytest.approx(5e-7)
    assert cfg.lr_at(200_000) == pytest.approx(5e-7)
    mid = cfg.lr_at(50_000)
    assert mid == pytest.approx((1e-4 + 5e-7) / 2.0)


def test_update_moves_parameters_and_reports_finite_losses():
    agent = _tiny_agent(5)
    buf = ReplayBuffer(64, 4, 2, seed=0)
    rng = np.random.default_rng(5)
    for _ in range(32):
        buf.add(rng.normal(size=4), np.tanh(rng.normal(size=2)),
                float(rng.normal()), rng.normal(size=4), False)
    before = [p.detach().clone() for p in agent.actor.parameters()]
    out = agent.update(buf, env_step=10)
    assert all(math.isfinite(v) for v in out.values())
    moved = any(not torch.equal(a, b.detach())
                for a, b in zip(before, agent.actor.parameters()))
    assert moved


def test_critic_targets_converge_to_zero_with_zero_rewards():
    agent = _tiny_agent(6)
    buf = ReplayBuffer(256, 4, 2, seed=1)
    rng = np.random.default_rng(6)
    for _ in range(128):
        buf.add(rng.normal(size=4), np.tanh(rng.normal(size=2)), 0.0,
                rng.normal(size=4), False)
    losses = [agent.update(buf, env_step=i)["critic_loss"] for i in range(400)]
    assert np.mean(losses[-20:]) < np.mean(losses[:20])
    obs = torch.randn(16, 4, dtype=torch.float64)
    act = torch.rand(16, 2, dtype=torch.float64) * 2 - 1
    q1, q2 = agent.critic(obs, act)
    assert float(q1.abs().max()) < 1.5 and float(q2.abs().max()) < 1.5


# ---------------------------------------------------------------------------
# smoothing, replay, checkpoints


def test_smooth_action_cases():
    raw = np.array([1.0, -1.0])
    assert np.array_equal(smooth_action(None, raw), raw)
    assert np.array_equal(smooth_action(raw, raw), raw)
    out = smooth_action(np.zeros(2), np.array([1.0, 1.0]), c=0.75)
    assert np.allclose(out, [0.25, 0.25])


def test_smooth_action_alternating_bounded():
    prev = None
    for i in range(10):
        raw = np.array([1.0 if i % 2 == 0 else -1.0])
        prev = smooth_action(prev, raw, c=0.75)
    # EMA recurrence settles toward +-1/7
    assert abs(prev[0]) <= 0.6


def test_replay_seeded_sampling_reproducible():
    def fill(seed):
        buf = ReplayBuffer(128, 3, 2, seed=seed)
        rng = np.random.default_rng(0)
        for _ in range(100):
            buf.add(rng.normal(size=3), rng.normal(size=2), 0.5,
                    rng.normal(size=3), False)
        return buf

    a, b = fill(7), fill(7)
    sa = a.sample(32)
    sb = b.sample(32)
    for k in sa:
        assert np.array_equal(sa[k], sb[k])


def test_replay_batch_without_replacement():
    buf = ReplayBuffer(64, 1, 1, seed=3)
    for i in range(64):
        buf.add([float(i)], [0.0], 0.0, [0.0], False)
    batch = buf.sample(64)
    assert len(np.unique(batch["obs"][:, 0])) == 64


def test_replay_requires_enough_items():
    buf = ReplayBuffer(16, 1, 1)
    buf.add([0.0], [0.0], 0.0, [0.0], False)
    with pytest.raises(ValueError):
        buf.sample(2)


def test_checkpoint_arrays_roundtrip(tmp_path):
    path = tmp_path / "x.ckpt"
    rng = np.random.default_rng(0)
    arrays = {"a": rng.normal(size=(3, 4)), "b": np.arange(5, dtype=np.int64)}
    save_arrays(path, arrays, {"step": 12})
    back, meta = load_arrays(path)
    assert meta["step"] == 12
    for k in arrays:
        assert np.array_equal(back[k], arrays[k])
        assert back[k].dtype == arrays[k].dtype


def test_checkpoint_bytes_deterministic(tmp_path):
    arrays = {"w": np.linspace(0, 1, 7)}
    p1, p2 = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
    save_arrays(p1, arrays, {"n": 1})
    save_arrays(p2, arrays, {"n": 1})
    assert p1.read_bytes() == p2.read_bytes()


def test_checkpoint_bad_version_rejected(tmp_path):
    p = tmp_path / "bad.ckpt"
    p.write_bytes(b'{"version": "ckpt/v9", "meta": {}, "arrays": []}\n')
    with pytest.raises(CheckpointError):
        load_arrays(p)


def test_checkpoint_corrupt_rejected(tmp_path):
    p = tmp_path / "corrupt.ckpt"
    p.write_bytes(b"\x00\x01\x02 not a checkpoint")
    with pytest.raises(CheckpointError):
        load_arrays(p)


def test_module_state_roundtrip(tmp_path):
    a = Actor(4, 2, (5, 5))
    b = Actor(4, 2, (5, 5))
    arrays = module_arrays("actor", a)
    save_arrays(tmp_path / "m.ckpt", arrays, {})
    back, _ = load_arrays(tmp_path / "m.ckpt")
    restore_module("actor", b, back)
    obs = torch.randn(3, 4)
    assert torch.equal(a(obs)[0], b(obs)[0])


def test_temperature_stays_positive_through_updates():
    agent = _tiny_agent(7)
    buf = ReplayBuffer(64, 4, 2, seed=2)
    rng = np.random.default_rng(7)
    for _ in range(32):
        buf.add(rng.normal(size=4), np.tanh(rng.normal(size=2)),
                float(rng.normal()), rng.normal(size=4), False)
    for i in range(50):
        agent.update(buf, env_step=i)
        assert agent.alpha > 0.0
