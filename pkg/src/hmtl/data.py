"""Document model, file formats and dataset registry.

JSONL document format (one record per line):

    {"doc_id": str,
     "sentences": [[str, ...], ...],
     "ner": [[start, end, label], ...],
     "mentions": [[start, end, label], ...],
     "relations": [{"type": str, "arg1": [s, e], "arg2": [s, e]}, ...],
     "clusters": [[[s, e], ...], ...]}

All span indices are inclusive, document-level token offsets.  Annotation
layers absent from a record load as empty lists.  The two-column CoNLL
format (token tag, blank line between sentences) is accepted for NER.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from hmtl.errors import ConfigError, DataError

logger = logging.getLogger(__name__)

TASKS = ("ner", "emd", "re", "cr")


@dataclass(frozen=True, order=True)
class TaggedSpan:
    """Labeled token span, inclusive document-level indices."""

    start: int
    end: int
    label: str

    @property
    def width(self) -> int:
        return self.end - self.start + 1

    def as_tuple(self) -> tuple[int, int, str]:
        return (self.start, self.end, self.label)


@dataclass(frozen=True)
class RelationInstance:
    """Directed typed relation between two mention head spans (ARG1 -> ARG2)."""

    rel_type: str
    arg1: TaggedSpan
    arg2: TaggedSpan

    def key(self) -> tuple[int, int, str]:
        """Scoring key: last tokens of the two argument heads plus the type."""
        return (self.arg1.end, self.arg2.end, self.rel_type)


@dataclass
class Document:
    """Tokenized document with gold annotations for all four tasks.

    ``ner_spans`` and ``emd_spans`` must each be overlap-free; relation
    arguments must appear in ``emd_spans``; clusters have >= 2 members.
    """

    doc_id: str
    sentences: list[list[str]]
    ner_spans: list[TaggedSpan] = field(default_factory=list)
    emd_spans: list[TaggedSpan] = field(default_factory=list)
    relations: list[RelationInstance] = field(default_factory=list)
    clusters: list[list[TaggedSpan]] = field(default_factory=list)

    @property
    def n_tokens(self) -> int:
        return sum(len(s) for s in self.sentences)

    @property
    def tokens(self) -> list[str]:
        return [t for s in self.sentences for t in s]

    def sentence_offsets(self) -> list[int]:
        """Document-level offset of the first token of each sentence."""
        offs, acc = [], 0
        for s in self.sentences:
            offs.append(acc)
            acc += len(s)
        return offs

    def spans_in_sentence(self, layer: list[TaggedSpan], sent_idx: int) -> list[TaggedSpan]:
        """Spans of one annotation layer that fall inside a sentence, re-based
        to sentence-local indices."""
        off = self.sentence_offsets()[sent_idx]
        n = len(self.sentences[sent_idx])
        out = []
        for sp in layer:
            if off <= sp.start and sp.end < off + n:
                out.append(TaggedSpan(sp.start - off, sp.end - off, sp.label))
        return out

    def validate(self) -> None:
        n = self.n_tokens
        if not self.sentences or n == 0:
            raise DataError(f"{self.doc_id}: document has no tokens")
        for layer_name, layer in (("ner", self.ner_spans), ("mentions", self.emd_spans)):
            for sp in layer:
                if not (0 <= sp.start <= sp.end < n):
                    raise DataError(
                        f"{self.doc_id}: {layer_name} span ({sp.start},{sp.end}) "
                        f"out of range for a {n}-token document"
                    )
            _check_no_overlap(self.doc_id, layer_name, layer)
        head_keys = {(sp.start, sp.end) for sp in self.emd_spans}
        for rel in self.relations:
            if rel.arg1.as_tuple()[:2] == rel.arg2.as_tuple()[:2]:
                raise DataError(f"{self.doc_id}: relation {rel.rel_type} has identical arguments")
            for arg in (rel.arg1, rel.arg2):
                if (arg.start, arg.end) not in head_keys:
                    raise DataError(
                        f"{self.doc_id}: relation argument ({arg.start},{arg.end}) "
                        f"is not a mention head span"
                    )
        for cluster in self.clusters:
            if len(cluster) < 2:
                raise DataError(f"{self.doc_id}: cluster of size {len(cluster)} survived load")
            for sp in cluster:
                if not (0 <= sp.start <= sp.end < n):
                    raise DataError(
                        f"{self.doc_id}: cluster span ({sp.start},{sp.end}) out of range"
                    )


def _check_no_overlap(doc_id: str, layer: str, spans: list[TaggedSpan]) -> None:
    prev_end = -1
    for sp in sorted(spans, key=lambda s: (s.start, s.end)):
        if sp.start <= prev_end:
            raise DataError(f"{doc_id}: overlapping {layer} spans at token {sp.start}")
        prev_end = sp.end


# ---------------------------------------------------------------------------
# JSONL round trip
# ---------------------------------------------------------------------------

def _span_from_json(raw, doc_id: str) -> TaggedSpan:
    try:
        start, end, label = raw
        return TaggedSpan(int(start), int(end), str(label))
    except (TypeError, ValueError) as exc:
        raise DataError(f"{doc_id}: bad span record {raw!r}") from exc


def document_from_record(record: dict, default_id: str = "doc") -> Document:
    doc_id = str(record.get("doc_id", default_id))
    sentences = record.get("sentences")
    if not isinstance(sentences, list) or not all(isinstance(s, list) for s in sentences):
        raise DataError(f"{doc_id}: 'sentences' must be a list of token lists")
    doc = Document(
        doc_id=doc_id,
        sentences=[[str(t) for t in s] for s in sentences],
        ner_spans=[_span_from_json(r, doc_id) for r in record.get("ner", [])],
        emd_spans=[_span_from_json(r, doc_id) for r in record.get("mentions", [])],
    )
    for raw in record.get("relations", []):
        try:
            a1, a2 = raw["arg1"], raw["arg2"]
            rel = RelationInstance(
                rel_type=str(raw["type"]),
                arg1=TaggedSpan(int(a1[0]), int(a1[1]), "ARG"),
                arg2=TaggedSpan(int(a2[0]), int(a2[1]), "ARG"),
            )
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise DataError(f"{doc_id}: bad relation record {raw!r}") from exc
        doc.relations.append(rel)
    dropped = 0
    for raw_cluster in record.get("clusters", []):
        members = [TaggedSpan(int(m[0]), int(m[1]), "MENTION") for m in raw_cluster]
        if len(members) < 2:
            dropped += 1
            continue
        doc.clusters.append(members)
    if dropped:
        logger.debug("%s: dropped %d singleton clusters at load", doc_id, dropped)
    doc.validate()
    return doc


def document_to_record(doc: Document) -> dict:
    return {
        "doc_id": doc.doc_id,
        "sentences": doc.sentences,
        "ner": [[sp.start, sp.end, sp.label] for sp in doc.ner_spans],
        "mentions": [[sp.start, sp.end, sp.label] for sp in doc.emd_spans],
        "relations": [
            {"type": r.rel_type, "arg1": [r.arg1.start, r.arg1.end], "arg2": [r.arg2.start, r.arg2.end]}
            for r in doc.relations
        ],
        "clusters": [[[m.start, m.end] for m in c] for c in doc.clusters],
    }


def load_jsonl(path: str | Path) -> list[Document]:
    """Load documents from a JSONL file, validating all invariants."""
    path = Path(path)
    docs = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from exc
            docs.append(document_from_record(record, default_id=f"{path.stem}-{lineno}"))
    return docs


def save_jsonl(docs: list[Document], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(json.dumps(document_to_record(doc), ensure_ascii=False) + "\n")


# ---------------------------------------------------------------------------
# CoNLL two-column NER format
# ---------------------------------------------------------------------------

_BILOU_PREFIXES = {"B", "I", "L", "O", "U"}


def tags_to_spans_repaired(tags: list[str], doc_id: str = "?") -> tuple[list[TaggedSpan], int]:
    """Convert BIO/BILOU string tags to spans (conventional BIO-repair).

    A dangling I/L opens a fresh span; a label change inside a span closes
    the open span and opens a new one.  BIO-valid events (closing at O,
    B after B, closing at end of sequence) are not counted as repairs.
    Returns (spans, repair count).
    """
    spans: list[TaggedSpan] = []
    repairs = 0
    open_start: int | None = None
    open_label: str | None = None

    def close(last: int) -> None:
        nonlocal open_start, open_label
        if open_start is not None:
            spans.append(TaggedSpan(open_start, last, open_label))
        open_start, open_label = None, None

    for i, tag in enumerate(tags):
        if tag == "O":
            close(i - 1)
            continue
        if "-" not in tag:
            raise DataError(f"{doc_id}: tag {tag!r} at token {i} has no prefix")
        prefix, label = tag.split("-", 1)
        if prefix not in _BILOU_PREFIXES:
            raise DataError(f"{doc_id}: unknown tag prefix {tag!r} at token {i}")
        if prefix == "U":
            if open_start is not None:
                repairs += 1
            close(i - 1)
            spans.append(TaggedSpan(i, i, label))
        elif prefix == "B":
            close(i - 1)
            open_start, open_label = i, label
        elif prefix == "I":
            if open_start is None:
                repairs += 1  # dangling I opens a fresh span
                open_start, open_label = i, label
            elif open_label != label:
                repairs += 1
                close(i - 1)
                open_start, open_label = i, label
        elif prefix == "L":
            if open_start is None:
                repairs += 1  # dangling L becomes a unit span
                spans.append(TaggedSpan(i, i, label))
            else:
                if open_label != label:
                    repairs += 1
                    close(i - 1)
                    spans.append(TaggedSpan(i, i, label))
                else:
                    close(i)
    close(len(tags) - 1)
    return spans, repairs


def load_conll_ner(path: str | Path) -> list[Document]:
    """Load a two-column CoNLL file (token tag) as one document per sentence.

    Accepts BIO or BILOU tags; inconsistent tags are repaired and counted.
    Lines may have extra middle columns (token first, tag last).
    """
    path = Path(path)
    docs: list[Document] = []
    tokens: list[str] = []
    tags: list[str] = []
    total_repairs = 0

    def flush() -> None:
        nonlocal tokens, tags, total_repairs
        if tokens:
            doc_id = f"{path.stem}-s{len(docs)}"
            spans, repairs = tags_to_spans_repaired(tags, doc_id)
            total_repairs += repairs
            doc = Document(doc_id=doc_id, sentences=[tokens], ner_spans=spans)
            doc.validate()
            docs.append(doc)
        tokens, tags = [], []

    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip():
                flush()
                continue
            parts = line.split()
            if len(parts) < 2:
                raise DataError(f"{path}:{lineno}: expected 'token tag', got {line!r}")
            if parts[0] == "-DOCSTART-":
                flush()
                continue
            tokens.append(parts[0])
            tags.append(parts[-1])
    flush()
    if total_repairs:
        logger.info("%s: repaired %d inconsistent BIO/BILOU tags", path, total_repairs)
    return docs


# ---------------------------------------------------------------------------
# Splitting and registry
# ---------------------------------------------------------------------------

def split_documents(
    docs: list[Document], ratios: tuple[float, float, float], seed: int
) -> tuple[list[Document], list[Document], list[Document]]:
    """Deterministically partition documents into train/dev/test."""
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError(f"split ratios must sum to 1, got {ratios}")
    order = np.random.default_rng(seed).permutation(len(docs))
    n = len(docs)
    cut1 = int(round(ratios[0] * n))
    cut2 = int(round((ratios[0] + ratios[1]) * n))
    shuffled = [docs[i] for i in order]
    return shuffled[:cut1], shuffled[cut1:cut2], shuffled[cut2:]


@dataclass
class DatasetHandle:
    """Train/dev/test documents for one task."""

    train: list[Document]
    dev: list[Document]
    test: list[Document]

    @property
    def train_sentences(self) -> int:
        return sum(len(d.sentences) for d in self.train)


@dataclass
class DatasetRegistry:
    """Maps each configured task to exactly one training dataset."""

    handles: dict[str, DatasetHandle]

    def __post_init__(self) -> None:
        for task, handle in self.handles.items():
            if task not in TASKS:
                raise ConfigError(f"unknown task {task!r}")
            if handle.train_sentences <= 0:
                raise ConfigError(f"task {task!r} has an empty training dataset")

    @property
    def tasks(self) -> list[str]:
        return list(self.handles)

    def sizes(self) -> dict[str, int]:
        """Training sizes in sentences (documents expand to sentence counts)."""
        return {task: h.train_sentences for task, h in self.handles.items()}
