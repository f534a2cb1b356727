"""Episode-structured transition storage.

An episode is kept as ``states`` of shape ``(n + 1, state_dim)`` and
``actions`` of shape ``(n, action_dim)``, so ``next_state[t] == state[t + 1]``
holds by construction and windows never straddle two episodes.

File layout (little-endian)::

    magic        4 bytes  b"RMPD"
    version      uint16
    config hash  64 ASCII hex characters
    state_dim    uint32
    action_dim   uint32
    n_angle      uint8, then uint32 * n_angle angle dimensions
    n_episodes   uint32, then uint32 * n_episodes transition counts
    states       pack_array, all episodes concatenated
    actions      pack_array, all episodes concatenated
"""

import logging
import re
import struct
from dataclasses import dataclass, field

import numpy as np

from rmppi.envs.base import wrap_angle
from rmppi.errors import ContractError, DatasetMismatchError, InsufficientDataError, WeightFileError
from rmppi.nn.io import Reader, header, pack_array, read_bytes, write_bytes

logger = logging.getLogger(__name__)

DATASET_MAGIC = b"RMPD"
DATASET_VERSION = 1
NO_HASH = "0" * 64
_HASH = re.compile(r"[0-9a-f]{64}")


@dataclass(eq=False)
class TransitionDataset:
    state_dim: int
    action_dim: int
    angle_dims: tuple[int, ...] = ()
    capacity: int | None = None
    config_hash: str = NO_HASH
    episodes: list[tuple[np.ndarray, np.ndarray]] = field(default_factory=list)

    def __post_init__(self):
        if not _HASH.fullmatch(self.config_hash):
            raise ContractError(f"Config hash must be 64 lowercase hex characters, got {self.config_hash!r}")
        self.angle_dims = tuple(int(d) for d in self.angle_dims)

    @property
    def n_transitions(self) -> int:
        return sum(len(a) for _, a in self.episodes)

    @property
    def n_episodes(self) -> int:
        return len(self.episodes)

    def add_episode(self, states, actions):
        states = np.array(states, dtype=np.float64)
        actions = np.array(actions, dtype=np.float64)
        if states.ndim != 2 or states.shape[1] != self.state_dim:
            raise ContractError(f"Episode states have shape {states.shape}")
        if actions.ndim != 2 or actions.shape[1] != self.action_dim:
            raise ContractError(f"Episode actions have shape {actions.shape}")
        if len(states) != len(actions) + 1:
            raise ContractError(
                f"An episode of {len(actions)} actions needs {len(actions) + 1} states, got {len(states)}"
            )
        if len(actions) == 0:
            return
        self.episodes.append((states, actions))
        if self.capacity is not None:
            # oldest episodes leave first
            while self.n_transitions > self.capacity and len(self.episodes) > 1:
                self.episodes.pop(0)

    def union(self, other: "TransitionDataset") -> "TransitionDataset":
        if (other.state_dim, other.action_dim) != (self.state_dim, self.action_dim):
            raise ContractError("Cannot merge datasets with different dimensions")
        if other.config_hash != self.config_hash:
            raise DatasetMismatchError(
                f"Cannot merge datasets from configs {self.config_hash[:12]} and {other.config_hash[:12]}"
            )
        merged = TransitionDataset(
            self.state_dim, self.action_dim, self.angle_dims, self.capacity, self.config_hash
        )
        for states, actions in self.episodes + other.episodes:
            merged.add_episode(states, actions)
        return merged

    def transitions(self):
        """All transitions as ``(x, u, x_next)`` arrays."""
        if not self.episodes:
            empty = np.zeros((0, self.state_dim))
            return empty, np.zeros((0, self.action_dim)), empty
        x = np.concatenate([s[:-1] for s, _ in self.episodes])
        u = np.concatenate([a for _, a in self.episodes])
        x_next = np.concatenate([s[1:] for s, _ in self.episodes])
        return x, u, x_next

    def state_deltas(self):
        """``x_next - x`` with angle dimensions wrapped."""
        x, u, x_next = self.transitions()
        delta = x_next - x
        for d in self.angle_dims:
            delta[:, d] = wrap_angle(delta[:, d])
        return x, u, delta

    def window_index(self, horizon: int, stride: int = 1) -> np.ndarray:
        """``(episode, start)`` pairs of every in-episode window of ``horizon`` steps."""
        if horizon < 1:
            raise ContractError(f"Window horizon must be at least 1, got {horizon}")
        rows = [
            (e, start)
            for e, (_, actions) in enumerate(self.episodes)
            for start in range(0, len(actions) - horizon + 1, stride)
        ]
        return np.array(rows, dtype=np.int64).reshape(-1, 2)

    def gather(self, index: np.ndarray, horizon: int):
        """Stack windows: states ``(n, horizon + 1, sd)``, actions ``(n, horizon, ad)``."""
        states = np.stack([self.episodes[e][0][s : s + horizon + 1] for e, s in index])
        actions = np.stack([self.episodes[e][1][s : s + horizon] for e, s in index])
        return states, actions

    def sample_windows(self, horizon: int, batch: int, rng: np.random.Generator, index=None):
        index = self.window_index(horizon) if index is None else index
        if len(index) < batch:
            raise InsufficientDataError(len(index), batch)
        return self.gather(index[rng.integers(0, len(index), size=batch)], horizon)

    def split(self, heldout_fraction: float):
        """Hold out the last episodes, at least one when there are two or more."""
        if not 0 <= heldout_fraction < 1:
            raise ContractError("heldout_fraction must lie in [0, 1)")
        n_held = int(round(heldout_fraction * self.n_episodes))
        if heldout_fraction > 0 and self.n_episodes > 1:
            n_held = min(max(n_held, 1), self.n_episodes - 1)
        cut = self.n_episodes - n_held
        parts = []
        for chunk in (self.episodes[:cut], self.episodes[cut:]):
            part = TransitionDataset(
                self.state_dim, self.action_dim, self.angle_dims, None, self.config_hash
            )
            part.episodes = list(chunk)
            parts.append(part)
        return tuple(parts)


def dataset_serialize(dataset: TransitionDataset) -> bytes:
    lengths = [len(a) for _, a in dataset.episodes]
    x = (
        np.concatenate([s for s, _ in dataset.episodes])
        if dataset.episodes
        else np.zeros((0, dataset.state_dim))
    )
    _, u, _ = dataset.transitions()
    return b"".join(
        [
            header(DATASET_MAGIC, DATASET_VERSION),
            dataset.config_hash.encode("ascii"),
            struct.pack("<II", dataset.state_dim, dataset.action_dim),
            struct.pack("<B", len(dataset.angle_dims)),
            struct.pack(f"<{len(dataset.angle_dims)}I", *dataset.angle_dims),
            struct.pack("<I", len(lengths)),
            struct.pack(f"<{len(lengths)}I", *lengths),
            pack_array(x),
            pack_array(u),
        ]
    )


def dataset_deserialize(data: bytes) -> TransitionDataset:
    reader = Reader(data)
    reader.expect_header(DATASET_MAGIC, DATASET_VERSION)
    config_hash = reader.take(64).decode("ascii", errors="replace")
    state_dim, action_dim = reader.unpack("<II")
    (n_angle,) = reader.unpack("<B")
    angle_dims = reader.unpack(f"<{n_angle}I")
    (n_episodes,) = reader.unpack("<I")
    lengths = reader.unpack(f"<{n_episodes}I")
    states = reader.array()
    actions = reader.array()
    if not reader.exhausted:
        raise WeightFileError("Trailing bytes after dataset payload")
    if len(actions) != sum(lengths) or len(states) != sum(lengths) + n_episodes:
        raise WeightFileError("Dataset episode table does not match its arrays")
    try:
        dataset = TransitionDataset(state_dim, action_dim, angle_dims, None, config_hash)
    except ContractError as e:
        raise WeightFileError(str(e)) from e
    s0 = a0 = 0
    for n in lengths:
        dataset.add_episode(states[s0 : s0 + n + 1].reshape(n + 1, state_dim), actions[a0 : a0 + n].reshape(n, action_dim))
        s0 += n + 1
        a0 += n
    return dataset


def save_dataset(dataset: TransitionDataset, path):
    write_bytes(path, dataset_serialize(dataset))
    logger.info(
        "Saved %d transitions in %d episodes to %s", dataset.n_transitions, dataset.n_episodes, path
    )


def load_dataset(path, expected_hash: str | None = None) -> TransitionDataset:
    dataset = dataset_deserialize(read_bytes(path))
    if expected_hash is not None and dataset.config_hash != expected_hash:
        raise DatasetMismatchError(
            f"{path} was collected under config {dataset.config_hash[:12]}, "
            f"expected {expected_hash[:12]}"
        )
    return dataset
