"""Per-task bidirectional recurrent encoders and the hierarchy wiring.

Each task owns a multi-layer biLSTM.  Encoders are stacked hierarchically
with shortcut connections: an encoder at level k consumes the shared token
embeddings concatenated with the output of the level k-1 encoder, so top
layers see both the raw embeddings and the intermediate representations.
Tasks at the top level (coreference and relation extraction by default)
share their level but not their parameters.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn

from hmtl.data import TASKS
from hmtl.errors import ConfigError


class SentenceEncoder(nn.Module):
    """Multi-layer biLSTM over one token sequence.

    Output row t is [forward hidden state at t ; backward hidden state at t]
    from the top layer, so the output width is 2 * hidden_dim.
    """

    def __init__(self, input_dim: int, hidden_dim: int, layers: int = 1, dropout_in: float = 0.0):
        super().__init__()
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        self.lstm = nn.LSTM(
            input_dim, hidden_dim, num_layers=layers, bidirectional=True, batch_first=False
        )
        self.dropout_in = nn.Dropout(dropout_in)

    @property
    def output_dim(self) -> int:
        return 2 * self.hidden_dim

    def forward(self, inputs: torch.Tensor) -> torch.Tensor:
        if inputs.dim() != 2 or inputs.shape[1] != self.input_dim:
            raise ValueError(
                f"encoder expects (n, {self.input_dim}) inputs, got {tuple(inputs.shape)}"
            )
        out, _ = self.lstm(self.dropout_in(inputs).unsqueeze(1))
        return out.squeeze(1)


def encode(encoder: SentenceEncoder, inputs: torch.Tensor) -> torch.Tensor:
    """Run one encoder over a (n, d_in) matrix, returning (n, 2h) states."""
    return encoder(inputs)


@dataclass(frozen=True)
class HierarchyWiring:
    """Ordered task levels; each encoder reads the shared embeddings plus the
    output of the single task one level below (the shortcut connection)."""

    levels: tuple[tuple[str, ...], ...]

    def __post_init__(self) -> None:
        seen: set[str] = set()
        if not self.levels:
            raise ConfigError("hierarchy must contain at least one level")
        for i, level in enumerate(self.levels):
            if not level:
                raise ConfigError("hierarchy contains an empty level")
            for task in level:
                if task not in TASKS:
                    raise ConfigError(f"unknown task {task!r} in hierarchy")
                if task in seen:
                    raise ConfigError(f"task {task!r} appears twice in hierarchy")
                seen.add(task)
            if len(level) > 1 and i != len(self.levels) - 1:
                raise ConfigError("only the top level may hold more than one task")

    @classmethod
    def from_lists(cls, levels) -> "HierarchyWiring":
        return cls(tuple(tuple(level) for level in levels))

    @property
    def tasks(self) -> tuple[str, ...]:
        return tuple(t for level in self.levels for t in level)

    def level_of(self, task: str) -> int:
        for i, level in enumerate(self.levels):
            if task in level:
                return i
        raise ConfigError(f"task {task!r} not in hierarchy")

    def input_source(self, task: str) -> str | None:
        """Task whose encoder output feeds this task's encoder (None = embeddings only)."""
        level = self.level_of(task)
        return self.levels[level - 1][0] if level > 0 else None

    def chain(self, task: str) -> list[str]:
        """Encoder tasks that must run, bottom-up, to produce this task's states."""
        out: list[str] = []
        current: str | None = task
        while current is not None:
            out.append(current)
            current = self.input_source(current)
        out.reverse()
        return out

    def scope(self, task: str) -> list[str]:
        """Parameter groups a training step for ``task`` may update:
        the embeddings, the task itself and every task on its input chain."""
        return ["embed"] + self.chain(task)


DEFAULT_HIERARCHY = HierarchyWiring((("ner",), ("emd",), ("cr", "re")))
