"""BILOU span codec and linear-chain CRF sequence tagging.

Instantiated twice in the full model: once over the NER encoder states and
once over the mention-detection encoder states.  All CRF computations are
in log space.  Decoding accepts arbitrary tag sequences; invalid BILOU
subsequences are repaired (orphan I/L open or close a span at the nearest
consistent boundary, label conflicts resolve to the span-initial label).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn as nn

from hmtl.data import TaggedSpan

NEG_INF = -1e6


@dataclass(frozen=True)
class BilouTagset:
    """Label set and the derived {B-,I-,L-,U-}xL + {O} tag inventory."""

    labels: tuple[str, ...]
    tags: tuple[str, ...] = field(init=False)

    def __post_init__(self) -> None:
        if len(set(self.labels)) != len(self.labels):
            raise ValueError(f"duplicate labels in {self.labels}")
        tags = ["O"]
        for label in self.labels:
            tags.extend(f"{p}-{label}" for p in "BILU")
        object.__setattr__(self, "tags", tuple(tags))

    def __len__(self) -> int:
        return len(self.tags)

    def index(self, tag: str) -> int:
        return self.tags.index(tag)

    def spans_to_tags(self, spans: list[TaggedSpan], n: int) -> list[int]:
        """Encode non-overlapping spans over an n-token sentence as tag indices."""
        tags = [0] * n
        covered = [False] * n
        for sp in spans:
            if not (0 <= sp.start <= sp.end < n):
                raise ValueError(f"span ({sp.start},{sp.end}) out of range for n={n}")
            if any(covered[sp.start : sp.end + 1]):
                raise ValueError(f"overlapping span at token {sp.start}")
            for t in range(sp.start, sp.end + 1):
                covered[t] = True
            if sp.width == 1:
                tags[sp.start] = self.index(f"U-{sp.label}")
            else:
                tags[sp.start] = self.index(f"B-{sp.label}")
                for t in range(sp.start + 1, sp.end):
                    tags[t] = self.index(f"I-{sp.label}")
                tags[sp.end] = self.index(f"L-{sp.label}")
        return tags

    def tags_to_spans(self, tag_indices: list[int] | np.ndarray) -> list[TaggedSpan]:
        """Decode tag indices to spans, repairing invalid subsequences."""
        spans: list[TaggedSpan] = []
        open_start: int | None = None
        open_label: str | None = None

        def close(last: int) -> None:
            nonlocal open_start, open_label
            if open_start is not None:
                spans.append(TaggedSpan(open_start, last, open_label))
            open_start, open_label = None, None

        for i, idx in enumerate(tag_indices):
            tag = self.tags[int(idx)]
            if tag == "O":
                close(i - 1)
                continue
            prefix, label = tag.split("-", 1)
            if prefix == "U":
                close(i - 1)
                spans.append(TaggedSpan(i, i, label))
            elif prefix == "B":
                close(i - 1)
                open_start, open_label = i, label
            elif prefix == "I":
                if open_start is None:
                    open_start, open_label = i, label  # orphan I opens here
                # label conflict: keep the span-initial label
            else:  # L
                if open_start is None:
                    spans.append(TaggedSpan(i, i, label))
                else:
                    close(i)  # span-initial label wins on conflict
        close(len(tag_indices) - 1)
        return spans

    def allowed_transitions(self) -> np.ndarray:
        """Boolean (K, K) matrix of BILOU-valid tag bigrams."""
        k = len(self)
        ok = np.zeros((k, k), dtype=bool)
        for i, prev in enumerate(self.tags):
            open_label = prev.split("-", 1)[1] if prev[0] in "BI" else None
            for j, nxt in enumerate(self.tags):
                if open_label is None:
                    ok[i, j] = nxt == "O" or nxt[0] in "BU"
                else:
                    ok[i, j] = nxt in (f"I-{open_label}", f"L-{open_label}")
        return ok

    def allowed_start(self) -> np.ndarray:
        return np.array([t == "O" or t[0] in "BU" for t in self.tags])

    def allowed_end(self) -> np.ndarray:
        return np.array([t == "O" or t[0] in "LU" for t in self.tags])


class CrfHead(nn.Module):
    """Emission projection plus transition scores for one tagging task."""

    def __init__(self, input_dim: int, tagset: BilouTagset):
        super().__init__()
        self.tagset = tagset
        k = len(tagset)
        self.emission = nn.Linear(input_dim, k)
        self.transitions = nn.Parameter(torch.zeros(k, k))
        self.start_transitions = nn.Parameter(torch.zeros(k))
        self.stop_transitions = nn.Parameter(torch.zeros(k))
        nn.init.uniform_(self.transitions, -0.1, 0.1)
        nn.init.uniform_(self.start_transitions, -0.1, 0.1)
        nn.init.uniform_(self.stop_transitions, -0.1, 0.1)

    def emissions(self, states: torch.Tensor) -> torch.Tensor:
        return self.emission(states)

    def log_partition(self, emissions: torch.Tensor) -> torch.Tensor:
        """log sum over all tag sequences of exp(path score), forward algorithm."""
        n = emissions.shape[0]
        alpha = self.start_transitions + emissions[0]
        for t in range(1, n):
            # alpha[j] = logsumexp_i(alpha[i] + trans[i, j]) + emit[t, j]
            alpha = torch.logsumexp(alpha.unsqueeze(1) + self.transitions, dim=0) + emissions[t]
        return torch.logsumexp(alpha + self.stop_transitions, dim=0)

    def gold_score(self, emissions: torch.Tensor, tags: list[int]) -> torch.Tensor:
        n = emissions.shape[0]
        idx = torch.as_tensor(tags, dtype=torch.long)
        score = self.start_transitions[idx[0]] + emissions[torch.arange(n), idx].sum()
        if n > 1:
            score = score + self.transitions[idx[:-1], idx[1:]].sum()
        return score + self.stop_transitions[idx[-1]]

    def nll(self, emissions: torch.Tensor, tags: list[int]) -> torch.Tensor:
        """Negative log likelihood of the gold tag sequence."""
        return self.log_partition(emissions) - self.gold_score(emissions, tags)

    def viterbi(self, emissions: torch.Tensor, constrain: bool = False) -> list[int]:
        """Maximum-score tag sequence; ties break toward the lowest tag index.

        With ``constrain`` the BILOU-invalid transitions are masked to a large
        negative score at decode time only.
        """
        emit = emissions.detach().cpu().double().numpy()
        trans = self.transitions.detach().cpu().double().numpy().copy()
        start = self.start_transitions.detach().cpu().double().numpy().copy()
        stop = self.stop_transitions.detach().cpu().double().numpy().copy()
        if constrain:
            trans[~self.tagset.allowed_transitions()] = NEG_INF
            start[~self.tagset.allowed_start()] = NEG_INF
            stop[~self.tagset.allowed_end()] = NEG_INF
        n, k = emit.shape
        delta = start + emit[0]
        back = np.zeros((n, k), dtype=np.int64)
        for t in range(1, n):
            cand = delta[:, None] + trans  # [prev, next]
            back[t] = np.argmax(cand, axis=0)  # first max = lowest prev index
            delta = cand[back[t], np.arange(k)] + emit[t]
        delta = delta + stop
        best = int(np.argmax(delta))
        path = [best]
        for t in range(n - 1, 0, -1):
            best = int(back[t, best])
            path.append(best)
        path.reverse()
        return path

    def decode_spans(self, states: torch.Tensor, constrain: bool = False) -> list[TaggedSpan]:
        tags = self.viterbi(self.emissions(states), constrain=constrain)
        return self.tagset.tags_to_spans(tags)


def spans_to_tags(spans: list[TaggedSpan], n: int, tagset: BilouTagset) -> list[int]:
    return tagset.spans_to_tags(spans, n)


def tags_to_spans(tag_indices: list[int], tagset: BilouTagset) -> list[TaggedSpan]:
    return tagset.tags_to_spans(tag_indices)
