"""Actor and twin-critic networks (plain MLPs)."""

from __future__ import annotations

import math

import torch
import torch.nn as nn

LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0


def mlp(sizes: list[int], out_dim: int) -> nn.Sequential:
    layers: list[nn.Module] = []
    for a, b in zip(sizes[:-1], sizes[1:]):
        layers += [nn.Linear(a, b), nn.ReLU()]
    layers.append(nn.Linear(sizes[-1], out_dim))
    return nn.Sequential(*layers)


class Actor(nn.Module):
    """Tanh-squashed Gaussian policy with state-dependent mean and log-std."""

    def __init__(self, obs_dim: int, act_dim: int, hidden: tuple[int, ...]):
        super().__init__()
        self.trunk = mlp([obs_dim, *hidden], 2 * act_dim)
        self.act_dim = act_dim

    def forward(self, obs: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        mean, log_std = self.trunk(obs).chunk(2, dim=-1)
        return mean, log_std.clamp(LOG_STD_MIN, LOG_STD_MAX)

    def sample(self, obs: torch.Tensor, noise: torch.Tensor | None = None,
               generator: torch.Generator | None = None,
               deterministic: bool = False) -> tuple[torch.Tensor, torch.Tensor]:
        """(action, per-sample log probability). `noise` fixes the standard
        normal draw for gradient checks; `deterministic` returns tanh(mean)."""
        mean, log_std = self(obs)
        if deterministic:
            action = torch.tanh(mean)
            return action, torch.zeros(mean.shape[:-1], dtype=mean.dtype)
        std = log_std.exp()
        if noise is None:
            noise = torch.randn(mean.shape, generator=generator, dtype=mean.dtype)
        pre = mean + std * noise
        action = torch.tanh(pre)
        # Gaussian log density plus the tanh change-of-variables term,
        # log(1 - tanh(x)^2) = 2 (log 2 - x - softplus(-2x))
        log_prob = (-0.5 * ((pre - mean) / std) ** 2 - log_std
                    - 0.5 * math.log(2.0 * math.pi))
        log_prob = log_prob - 2.0 * (math.log(2.0) - pre - torch.nn.functional.softplus(-2.0 * pre))
        return action, log_prob.sum(-1)


class TwinCritic(nn.Module):
    def __init__(self, obs_dim: int, act_dim: int, hidden: tuple[int, ...]):
        super().__init__()
        self.q1 = mlp([obs_dim + act_dim, *hidden], 1)
        self.q2 = mlp([obs_dim + act_dim, *hidden], 1)

    def forward(self, obs: torch.Tensor, act: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        x = torch.cat([obs, act], dim=-1)
        return self.q1(x).squeeze(-1), self.q2(x).squeeze(-1)

    def min_q(self, obs: torch.Tensor, act: torch.Tensor) -> torch.Tensor:
        q1, q2 = self(obs, act)
        return torch.min(q1, q2)
