"""Union vocabulary across tasks: stable global ids, old/overlap/new
partition, per-token task-presence counts and the update-scaling
coefficients derived from them."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .bpe import MergeRule, TaskVocab, _byte_tokens, encode
from .errors import InvalidInputError


@dataclass
class VocabState:
    """Evolving union vocabulary. Ids are append-only and never reused."""

    tokens: list[bytes]
    id_of: dict[bytes, int]
    per_task_rules: list[list[MergeRule]]
    task_vocabs: list[TaskVocab]
    current_task: int = -1

    @property
    def size(self) -> int:
        return len(self.tokens)

    def global_ids(self, text, task_index: int) -> list[int]:
        """Encode text with one task's merge rules, mapped to global ids."""
        tv = self.task_vocabs[task_index]
        local = encode(text, tv)
        return [self.id_of[tv.tokens[i]] for i in local]


@dataclass(frozen=True)
class Partition:
    old: frozenset[int]
    overlap: frozenset[int]
    new: frozenset[int]


def new_state() -> VocabState:
    tokens = _byte_tokens()
    return VocabState(tokens=tokens,
                      id_of={t: i for i, t in enumerate(tokens)},
                      per_task_rules=[], task_vocabs=[])


def merge_vocab(state: VocabState, task_vocab: TaskVocab):
    """Union-merge a task vocabulary into the state.

    New tokens get fresh consecutive ids in task-vocab order; existing
    tokens keep their ids. Returns (updated state, partition of the
    post-merge id set into old / overlap / new).
    """
    tokens = list(state.tokens)
    id_of = dict(state.id_of)
    prev_ids = frozenset(id_of.values())
    task_ids = set()
    for tok in task_vocab.tokens:
        gid = id_of.get(tok)
        if gid is None:
            gid = len(tokens)
            tokens.append(tok)
            id_of[tok] = gid
        task_ids.add(gid)
    new_state_ = VocabState(
        tokens=tokens, id_of=id_of,
        per_task_rules=state.per_task_rules + [list(task_vocab.rules)],
        task_vocabs=state.task_vocabs + [task_vocab],
        current_task=state.current_task + 1)
    part = Partition(old=frozenset(prev_ids - task_ids),
                     overlap=frozenset(prev_ids & task_ids),
                     new=frozenset(task_ids - prev_ids))
    return new_state_, part


def update_counts(counts: np.ndarray, task_vocab: TaskVocab,
                  state: VocabState) -> np.ndarray:
    """Bump the task-presence count of every token in the task vocab.

    Called once after finishing training on a task; ids not yet covered
    by the counts vector enter at zero and are bumped to one.
    """
    out = np.zeros(state.size, dtype=np.int64)
    out[: len(counts)] = counts
    for tok in task_vocab.tokens:
        out[state.id_of[tok]] += 1
    return out


def lambda_for(partition: Partition, counts: np.ndarray) -> np.ndarray:
    """Per-token update scale: 0 for old, 1/(c+1) for overlap, 1 for new."""
    all_ids = partition.old | partition.overlap | partition.new
    if all_ids and max(all_ids) >= len(counts):
        raise InvalidInputError(
            "lambda_for: counts vector does not cover all partition ids")
    lam = np.zeros(len(counts), dtype=np.float64)
    overlap = np.fromiter(partition.overlap, dtype=np.int64,
                          count=len(partition.overlap))
    new = np.fromiter(partition.new, dtype=np.int64, count=len(partition.new))
    if overlap.size:
        lam[overlap] = 1.0 / (counts[overlap] + 1.0)
    if new.size:
        lam[new] = 1.0
    return lam


@dataclass
class RegistryRecord:
    task_index: int
    vocab_before: int
    vocab_after: int
    n_old: int
    n_overlap: int
    n_new: int
    counts: list[int]


@dataclass
class RegistryManifest:
    records: list[RegistryRecord] = field(default_factory=list)

    def add(self, task_index, vocab_before, vocab_after, part: Partition,
            counts: np.ndarray) -> None:
        self.records.append(RegistryRecord(
            task_index, vocab_before, vocab_after,
            len(part.old), len(part.overlap), len(part.new),
            [int(c) for c in counts]))

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump([vars(r) for r in self.records], f, indent=1)

    @classmethod
    def load(cls, path) -> "RegistryManifest":
        with open(path) as f:
            raw = json.load(f)
        return cls([RegistryRecord(**r) for r in raw])
