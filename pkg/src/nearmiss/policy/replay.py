"""Uniform ring-buffer replay with a seeded sampler."""

from __future__ import annotations

import numpy as np


class ReplayBuffer:
    def __init__(self, capacity: int, obs_dim: int, act_dim: int, seed: int = 0):
        self.capacity = capacity
        self.obs = np.zeros((capacity, obs_dim), dtype=np.float32)
        self.act = np.zeros((capacity, act_dim), dtype=np.float32)
        self.rew = np.zeros(capacity, dtype=np.float32)
        self.next_obs = np.zeros((capacity, obs_dim), dtype=np.float32)
        self.done = np.zeros(capacity, dtype=np.float32)
        self.cursor = 0
        self.size = 0
        self.rng = np.random.default_rng(seed)

    def add(self, obs, act, rew, next_obs, done) -> None:
        i = self.cursor
        self.obs[i] = obs
        self.act[i] = act
        self.rew[i] = rew
        self.next_obs[i] = next_obs
        self.done[i] = float(done)
        self.cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch: int) -> dict[str, np.ndarray]:
        if self.size < batch:
            raise ValueError(f"buffer has {self.size} items, need {batch}")
        idx = self.rng.choice(self.size, size=batch, replace=False)
        return {
            "obs": self.obs[idx],
            "act": self.act[idx],
            "rew": self.rew[idx],
            "next_obs": self.next_obs[idx],
            "done": self.done[idx],
        }

    # -- persistence ---------------------------------------------------------

    def state_arrays(self) -> dict[str, np.ndarray]:
        n = self.size
        return {
            "obs": self.obs[:n].copy(),
            "act": self.act[:n].copy(),
            "rew": self.rew[:n].copy(),
            "next_obs": self.next_obs[:n].copy(),
            "done": self.done[:n].copy(),
            "meta": np.array([self.cursor, self.size], dtype=np.int64),
        }

    def restore_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        cursor, size = (int(v) for v in arrays["meta"])
        if size > self.capacity:
            raise ValueError("buffer snapshot larger than capacity")
        for name in ("obs", "act", "rew", "next_obs", "done"):
            getattr(self, name)[:size] = arrays[name]
        self.cursor = cursor % self.capacity
        self.size = size
