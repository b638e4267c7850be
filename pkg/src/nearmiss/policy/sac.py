"""Soft actor-critic with twin critics, tuned entropy temperature and a
linearly decaying learning rate."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .networks import Actor, TwinCritic
from .replay import ReplayBuffer


@dataclass
class SacConfig:
    discount: float = 0.98
    tau: float = 0.02
    buffer_capacity: int = 100_000
    batch_size: int = 256
    train_frequency: int = 64       # env steps between update bursts
    gradient_steps: int = 64
    learning_starts: int = 10_000
    lr_start: float = 1e-4
    lr_end: float = 5e-7
    total_steps: int = 100_000
    action_smoothing: float = 0.75  # EMA weight on the previous action
    hidden: tuple[int, ...] = (500, 300)
    target_entropy: float | None = None   # defaults to -action_dim

    def __post_init__(self) -> None:
        if not 0.0 < self.discount < 1.0:
            raise ValueError("discount must be in (0, 1)")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError("tau must be in (0, 1]")
        if self.batch_size > self.buffer_capacity:
            raise ValueError("batch size exceeds buffer capacity")

    def lr_at(self, step: int) -> float:
        frac = min(max(step / max(self.total_steps, 1), 0.0), 1.0)
        # convex form keeps both endpoints exact in floating point
        return (1.0 - frac) * self.lr_start + frac * self.lr_end


def smooth_action(prev: np.ndarray | None, raw: np.ndarray, c: float = 0.75) -> np.ndarray:
    """EMA on actions: c * prev + (1 - c) * raw, clamped; first step passes raw."""
    if prev is None:
        return np.clip(raw, -1.0, 1.0)
    return np.clip(c * np.asarray(prev) + (1.0 - c) * np.asarray(raw), -1.0, 1.0)


class SacAgent:
    def __init__(self, obs_dim: int, act_dim: int, config: SacConfig,
                 seed: int = 0, dtype: torch.dtype = torch.float32):
        torch.set_num_threads(1)  # keeps runs bit-reproducible
        self.config = config
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self.dtype = dtype
        self.torch_gen = torch.Generator().manual_seed(seed)

        def build(module_cls):
            # deterministic init from the owned generator, independent of
            # global torch state
            with torch.random.fork_rng():
                torch.manual_seed(int(torch.randint(0, 2**31 - 1, (1,), generator=self.torch_gen)))
                net = module_cls(obs_dim, act_dim, config.hidden).to(dtype)
            return net

        self.actor = build(Actor)
        self.critic = build(TwinCritic)
        self.critic_target = build(TwinCritic)
        self.critic_target.load_state_dict(self.critic.state_dict())
        for p in self.critic_target.parameters():
            p.requires_grad_(False)

        self.log_alpha = torch.zeros(1, dtype=dtype, requires_grad=True)
        self.target_entropy = (config.target_entropy
                               if config.target_entropy is not None else -float(act_dim))

        lr = config.lr_start
        self.actor_opt = torch.optim.Adam(self.actor.parameters(), lr=lr)
        self.critic_opt = torch.optim.Adam(self.critic.parameters(), lr=lr)
        self.alpha_opt = torch.optim.Adam([self.log_alpha], lr=lr)
        self.updates_done = 0

    @property
    def alpha(self) -> float:
        return float(self.log_alpha.detach().exp())

    # -- acting ---------------------------------------------------------------

    def act(self, obs: np.ndarray, deterministic: bool = False) -> np.ndarray:
        with torch.no_grad():
            obs_t = torch.as_tensor(obs, dtype=self.dtype).unsqueeze(0)
            action, _ = self.actor.sample(obs_t, generator=self.torch_gen,
                                          deterministic=deterministic)
        return action.squeeze(0).numpy().astype(np.float64)

    # -- losses (exposed separately for gradient checks) ----------------------

    def _tensors(self, batch: dict[str, np.ndarray]) -> dict[str, torch.Tensor]:
        return {k: torch.as_tensor(v, dtype=self.dtype) for k, v in batch.items()}

    def critic_loss(self, batch: dict[str, np.ndarray],
                    next_noise: torch.Tensor | None = None) -> torch.Tensor:
        b = self._tensors(batch)
        with torch.no_grad():
            next_a, next_logp = self.actor.sample(b["next_obs"], noise=next_noise,
                                                  generator=self.torch_gen)
            tq1, tq2 = self.critic_target(b["next_obs"], next_a)
            target_q = torch.min(tq1, tq2) - self.log_alpha.exp() * next_logp
            y = b["rew"] + self.config.discount * (1.0 - b["done"]) * target_q
        q1, q2 = self.critic(b["obs"], b["act"])
        return 0.5 * (torch.mean((q1 - y) ** 2) + torch.mean((q2 - y) ** 2))

    def actor_loss(self, batch: dict[str, np.ndarray],
                   noise: torch.Tensor | None = None) -> torch.Tensor:
        b = self._tensors(batch)
        action, logp = self.actor.sample(b["obs"], noise=noise, generator=self.torch_gen)
        q = self.critic.min_q(b["obs"], action)
        return torch.mean(self.log_alpha.exp().detach() * logp - q)

    def alpha_loss(self, logp: torch.Tensor) -> torch.Tensor:
        return -(self.log_alpha * (logp + self.target_entropy).detach()).mean()

    # -- updates ---------------------------------------------------------------

    def _set_lr(self, lr: float) -> None:
        for opt in (self.actor_opt, self.critic_opt, self.alpha_opt):
            for group in opt.param_groups:
                group["lr"] = lr

    def update(self, buffer: ReplayBuffer, env_step: int) -> dict[str, float]:
        """One gradient step on critics, actor and temperature."""
        self._set_lr(self.config.lr_at(env_step))
        batch = buffer.sample(self.config.batch_size)

        def check(name: str, loss: torch.Tensor) -> None:
            if not torch.isfinite(loss):
                raise FloatingPointError(
                    f"non-finite {name} loss {float(loss.detach())}; batch reward stats "
                    f"mean={batch['rew'].mean():.3f} absmax={np.abs(batch['rew']).max():.3f}")

        c_loss = self.critic_loss(batch)
        check("critic", c_loss)
        self.critic_opt.zero_grad()
        c_loss.backward()
        self.critic_opt.step()

        b = self._tensors(batch)
        action, logp = self.actor.sample(b["obs"], generator=self.torch_gen)
        q = self.critic.min_q(b["obs"], action)
        a_loss = torch.mean(self.log_alpha.exp().detach() * logp - q)
        check("actor", a_loss)
        self.actor_opt.zero_grad()
        a_loss.backward()
        self.actor_opt.step()

        al_loss = self.alpha_loss(logp)
        check("temperature", al_loss)
        self.alpha_opt.zero_grad()
        al_loss.backward()
        self.alpha_opt.step()

        self.polyak_update()
        self.updates_done += 1
        return {
            "critic_loss": float(c_loss.detach()),
            "actor_loss": float(a_loss.detach()),
            "alpha_loss": float(al_loss.detach()),
            "alpha": self.alpha,
            "lr": self.config.lr_at(env_step),
        }

    def polyak_update(self) -> None:
        tau = self.config.tau
        with torch.no_grad():
            for p, tp in zip(self.critic.parameters(), self.critic_target.parameters()):
                tp.mul_(1.0 - tau).add_(tau * p)
