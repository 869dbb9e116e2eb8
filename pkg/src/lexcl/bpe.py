"""Byte-level byte-pair-encoding tokenizer.

Training is greedy: repeatedly merge the most frequent adjacent token
pair inside whitespace-separated words, ties broken by lexicographically
smaller (left-bytes, right-bytes). The 256 single bytes are always the
base alphabet, so any byte string encodes losslessly.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from .errors import InvalidIdError, InvalidInputError

N_BYTES = 256


@dataclass(frozen=True)
class MergeRule:
    left: int
    right: int
    result: int
    task_index: int
    rank: int


@dataclass
class TaskVocab:
    """One task's BPE vocabulary: 256 byte tokens plus learned merges."""

    task_index: int
    tokens: list[bytes]
    rules: list[MergeRule]
    id_of: dict[bytes, int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.id_of:
            self.id_of = {tok: i for i, tok in enumerate(self.tokens)}

    @property
    def size(self) -> int:
        return len(self.tokens)

    def merge_ranks(self) -> dict[tuple[bytes, bytes], tuple[tuple[int, int], bytes]]:
        """Map (left bytes, right bytes) -> ((task, rank) priority, merged bytes)."""
        out = {}
        for r in self.rules:
            key = (self.tokens[r.left], self.tokens[r.right])
            out[key] = ((r.task_index, r.rank), self.tokens[r.result])
        return out


def _byte_tokens() -> list[bytes]:
    return [bytes([i]) for i in range(N_BYTES)]


def _merge_word(parts: list[bytes], left: bytes, right: bytes, merged: bytes) -> list[bytes]:
    """Replace leftmost-first occurrences of (left, right) with merged."""
    out = []
    i = 0
    n = len(parts)
    while i < n:
        if i + 1 < n and parts[i] == left and parts[i + 1] == right:
            out.append(merged)
            i += 2
        else:
            out.append(parts[i])
            i += 1
    return out


def train_bpe(corpus, target_size: int, task_index: int = 0) -> TaskVocab:
    """Learn merge rules from a corpus of text strings.

    Merges are chosen by descending pair frequency (overlapping
    occurrences counted), stopping early once no pair occurs twice.
    """
    corpus = list(corpus)
    if not corpus:
        raise InvalidInputError("train_bpe: corpus is empty")
    if target_size < N_BYTES + 1:
        raise InvalidInputError(
            f"train_bpe: target_size {target_size} < {N_BYTES + 1}")

    word_counts: Counter[bytes] = Counter()
    for line in corpus:
        for word in line.split():
            word_counts[word.encode("utf-8")] += 1

    words = [[bytes([b]) for b in w] for w in word_counts]
    freqs = list(word_counts.values())

    tokens = _byte_tokens()
    id_of = {tok: i for i, tok in enumerate(tokens)}
    rules: list[MergeRule] = []

    while len(tokens) < target_size:
        pair_counts: Counter[tuple[bytes, bytes]] = Counter()
        for parts, f in zip(words, freqs):
            for a, b in zip(parts, parts[1:]):
                pair_counts[(a, b)] += f
        if not pair_counts:
            break
        best = min(pair_counts.items(), key=lambda kv: (-kv[1], kv[0]))
        (left, right), count = best
        if count < 2:
            break
        merged = left + right
        new_id = len(tokens)
        tokens.append(merged)
        id_of[merged] = new_id
        rules.append(MergeRule(id_of[left], id_of[right], new_id,
                               task_index, len(rules)))
        words = [_merge_word(p, left, right, merged) if len(p) > 1 else p
                 for p in words]

    return TaskVocab(task_index=task_index, tokens=tokens, rules=rules)


def _encode_parts(parts: list[bytes], ranks) -> list[bytes]:
    """Apply merge rules to a token sequence until none applies.

    Equivalent to applying rules one by one in priority order; here the
    best-priority applicable pair is merged each pass, which is the same
    fixed point because later rules never re-enable earlier ones.
    """
    while len(parts) > 1:
        best_key = None
        best_pair = None
        for a, b in zip(parts, parts[1:]):
            hit = ranks.get((a, b))
            if hit is not None and (best_key is None or hit[0] < best_key):
                best_key = hit[0]
                best_pair = (a, b, hit[1])
        if best_pair is None:
            break
        parts = _merge_word(parts, *best_pair)
    return parts


def encode(text: bytes, scope) -> list[int]:
    """Encode a byte string into token ids under the given scope.

    The scope is any object exposing ``id_of`` and ``merge_ranks()``
    (a TaskVocab or a merged multi-task view). Merges never contain
    whitespace bytes, so whitespace-separated segments encode
    independently; segment encodings are cached for speed.
    """
    if isinstance(text, str):
        text = text.encode("utf-8")
    if not text:
        return []
    ranks = scope.merge_ranks()
    cache = getattr(scope, "_encode_cache", None)
    if cache is None:
        cache = {}
        try:
            scope._encode_cache = cache
        except AttributeError:
            pass
    id_of = scope.id_of
    out: list[int] = []
    i = 0
    n = len(text)
    while i < n:
        j = i
        if text[i : i + 1].isspace():
            while j < n and text[j : j + 1].isspace():
                out.append(text[j])
                j += 1
        else:
            while j < n and not text[j : j + 1].isspace():
                j += 1
            seg = text[i:j]
            ids = cache.get(seg)
            if ids is None:
                parts = _encode_parts([bytes([b]) for b in seg], ranks)
                ids = [id_of[p] for p in parts]
                cache[seg] = ids
            out.extend(ids)
        i = j
    return out


def encode_reference(text: bytes, scope) -> list[int]:
    """Slow reference encoder: apply each rule exhaustively in priority order."""
    if isinstance(text, str):
        text = text.encode("utf-8")
    if not text:
        return []
    parts = [bytes([b]) for b in text]
    items = sorted(scope.merge_ranks().items(), key=lambda kv: kv[1][0])
    for (left, right), (_, merged) in items:
        parts = _merge_word(parts, left, right, merged)
    return [scope.id_of[p] for p in parts]


def decode(ids, scope) -> bytes:
    tokens = scope.tokens
    out = []
    for i in ids:
        if not 0 <= i < len(tokens):
            raise InvalidIdError(f"decode: unknown token id {i}")
        out.append(tokens[i])
    return b"".join(out)


# --- serialization -----------------------------------------------------

_PRINTABLE = set(range(0x20, 0x7F)) - {ord('"'), ord("\\")}


def token_to_text(tok: bytes) -> str:
    body = "".join(chr(c) if c in _PRINTABLE else f"\\x{c:02x}" for c in tok)
    return f'"{body}"'


def token_from_text(s: str) -> bytes:
    s = s.strip()
    if len(s) < 2 or s[0] != '"' or s[-1] != '"':
        raise InvalidInputError(f"bad token literal: {s!r}")
    body = s[1:-1]
    out = bytearray()
    i = 0
    while i < len(body):
        if body[i] == "\\":
            if body[i + 1] != "x":
                raise InvalidInputError(f"bad escape in token literal: {s!r}")
            out.append(int(body[i + 2 : i + 4], 16))
            i += 4
        else:
            out.append(ord(body[i]))
            i += 1
    return bytes(out)


def save_vocab(tokens: list[bytes], path) -> None:
    with open(path, "w", encoding="ascii") as f:
        for tok in tokens:
            f.write(token_to_text(tok) + "\n")


def load_vocab(path) -> list[bytes]:
    with open(path, "r", encoding="ascii") as f:
        return [token_from_text(line) for line in f if line.strip()]


def save_merges(rules: list[MergeRule], path) -> None:
    with open(path, "w", encoding="ascii") as f:
        for r in rules:
            f.write(f"{r.task_index} {r.rank} {r.left} {r.right} {r.result}\n")


def load_merges(path) -> list[MergeRule]:
    rules = []
    with open(path, "r", encoding="ascii") as f:
        for line in f:
            if not line.strip():
                continue
            t, rank, left, right, result = (int(x) for x in line.split())
            rules.append(MergeRule(left, right, result, t, rank))
    return rules


def vocab_from_files(vocab_path, merges_path, task_index=None) -> TaskVocab:
    tokens = load_vocab(vocab_path)
    rules = load_merges(merges_path)
    t = task_index if task_index is not None else (rules[0].task_index if rules else 0)
    return TaskVocab(task_index=t, tokens=tokens, rules=rules)
