"""Synthetic corpus generation for desk-scale experiments.

Documents come from a small templated grammar in which entity types, head
spans, relations and coreference chains are jointly consistent: every
relation argument is a mention head, pronouns and nominals corefer with a
prior named mention, and all clusters have at least two members.
Generation is a pure function of (seed, n_docs, config).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from hmtl.data import Document, RelationInstance, TaggedSpan
from hmtl.errors import ConfigError

REL_EMPLOYED_BY = "employed_by"
REL_LIVES_IN = "lives_in"
REL_EMPLOYS = "employs"
REL_BASED_IN = "based_in"

RELATION_LABELS = (REL_EMPLOYED_BY, REL_LIVES_IN, REL_EMPLOYS, REL_BASED_IN)
ENTITY_LABELS = ("LOC", "ORG", "PER")


@dataclass(frozen=True)
class SyntheticConfig:
    """Inventories and shape of the templated grammar."""

    people: tuple[tuple[str, str, str], ...] = (
        ("Alice", "Stone", "She"),
        ("Bob", "Mills", "He"),
        ("Carol", "Reyes", "She"),
        ("David", "Novak", "He"),
        ("Emma", "Walsh", "She"),
        ("Frank", "Otto", "He"),
        ("Grace", "Ito", "She"),
        ("Henry", "Lund", "He"),
    )
    orgs: tuple[tuple[str, str], ...] = (
        ("Acme", "Corp"),
        ("Globex", "Inc"),
        ("Initech", "Ltd"),
        ("Umbrella", "Group"),
        ("Vertex", "Labs"),
        ("Zenith", "Bank"),
    )
    locs: tuple[tuple[str, ...], ...] = (
        ("Paris",),
        ("Berlin",),
        ("Tokyo",),
        ("Oslo",),
        ("Cairo",),
        ("New", "York"),
        ("Hong", "Kong"),
        ("San", "Diego"),
    )
    min_extra_sentences: int = 1
    max_extra_sentences: int = 3


class _DocBuilder:
    def __init__(self, doc_id: str) -> None:
        self.doc = Document(doc_id=doc_id, sentences=[])
        self.offset = 0

    def add_sentence(self, tokens: list[str]) -> int:
        off = self.offset
        self.doc.sentences.append(tokens)
        self.offset += len(tokens)
        return off

    def ner(self, off: int, start: int, end: int, label: str) -> TaggedSpan:
        sp = TaggedSpan(off + start, off + end, label)
        self.doc.ner_spans.append(sp)
        return sp

    def head(self, off: int, start: int, end: int, label: str) -> TaggedSpan:
        sp = TaggedSpan(off + start, off + end, label)
        self.doc.emd_spans.append(sp)
        return sp

    def relation(self, rel_type: str, arg1: TaggedSpan, arg2: TaggedSpan) -> None:
        self.doc.relations.append(RelationInstance(rel_type, arg1, arg2))

    def mention(self, off: int, start: int, end: int) -> TaggedSpan:
        return TaggedSpan(off + start, off + end, "MENTION")


_FILLERS = (
    ["the", "quarterly", "report", "was", "published", "."],
    ["markets", "closed", "higher", "on", "friday", "."],
    ["no", "further", "details", "were", "available", "."],
)

# extra-sentence template ids, emitted in this order when selected
_T_PRONOUN, _T_HIRE, _T_ORG_LOC, _T_FILLER = 0, 1, 2, 3


def _generate_doc(rng: np.random.Generator, idx: int, cfg: SyntheticConfig) -> Document:
    b = _DocBuilder(f"synth-{idx:04d}")
    p_main, p_other = (cfg.people[i] for i in rng.choice(len(cfg.people), size=2, replace=False))
    org = cfg.orgs[rng.integers(len(cfg.orgs))]
    loc_a, loc_b = (cfg.locs[i] for i in rng.choice(len(cfg.locs), size=2, replace=False))

    # opening sentence: "<First> <Last> works for <Org> ."
    first, last, pronoun = p_main
    off = b.add_sentence([first, last, "works", "for", org[0], org[1], "."])
    b.ner(off, 0, 1, "PER")
    b.ner(off, 4, 5, "ORG")
    per_head = b.head(off, 1, 1, "PER")
    org_head = b.head(off, 5, 5, "ORG")
    b.relation(REL_EMPLOYED_BY, per_head, org_head)
    person_cluster = [b.mention(off, 0, 1)]
    org_cluster = [b.mention(off, 4, 5)]

    n_extra = int(rng.integers(cfg.min_extra_sentences, cfg.max_extra_sentences + 1))
    chosen = sorted(rng.choice(4, size=n_extra, replace=False).tolist())
    for template in chosen:
        if template == _T_PRONOUN:
            # "<Pronoun> lives in <Loc> ."
            off = b.add_sentence([pronoun, "lives", "in", *loc_a, "."])
            loc_end = 2 + len(loc_a)
            pron_head = b.head(off, 0, 0, "PER")
            b.ner(off, 3, loc_end, "LOC")
            loc_head = b.head(off, 3, loc_end, "LOC")
            b.relation(REL_LIVES_IN, pron_head, loc_head)
            person_cluster.append(b.mention(off, 0, 0))
        elif template == _T_HIRE:
            # "The company hired <First2> <Last2> ."
            off = b.add_sentence(["The", "company", "hired", p_other[0], p_other[1], "."])
            company_head = b.head(off, 1, 1, "ORG")
            b.ner(off, 3, 4, "PER")
            hired_head = b.head(off, 4, 4, "PER")
            b.relation(REL_EMPLOYS, company_head, hired_head)
            org_cluster.append(b.mention(off, 0, 1))
        elif template == _T_ORG_LOC:
            # "<Org> is based in <Loc> ."
            off = b.add_sentence([org[0], org[1], "is", "based", "in", *loc_b, "."])
            loc_end = 4 + len(loc_b)
            b.ner(off, 0, 1, "ORG")
            org_head2 = b.head(off, 1, 1, "ORG")
            b.ner(off, 5, loc_end, "LOC")
            loc_head2 = b.head(off, 5, loc_end, "LOC")
            b.relation(REL_BASED_IN, org_head2, loc_head2)
            org_cluster.append(b.mention(off, 0, 1))
        else:
            b.add_sentence(list(_FILLERS[rng.integers(len(_FILLERS))]))

    for cluster in (person_cluster, org_cluster):
        if len(cluster) >= 2:
            b.doc.clusters.append(cluster)
    b.doc.validate()
    return b.doc


def generate_synthetic_corpus(
    seed: int, n_docs: int, config: SyntheticConfig | None = None
) -> list[Document]:
    """Generate a deterministic synthetic corpus annotated for all four tasks."""
    if n_docs <= 0:
        raise ConfigError(f"n_docs must be positive, got {n_docs}")
    cfg = config or SyntheticConfig()
    rng = np.random.default_rng(seed)
    return [_generate_doc(rng, i, cfg) for i in range(n_docs)]
