"""Sample spaces, strictly positive distributions and corpus-estimated context models.

Every probability vector in the package is a :class:`Distribution`: strictly
positive entries summing to one. The positivity requirement is what keeps the
code lengths ``-ln p(x)`` finite everywhere, so zero counts are removed by
additive smoothing at estimation time rather than patched later.
"""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Hashable, Sequence

import numpy as np

from .errors import (
    AlphabetOverflow,
    CorpusTooShort,
    EmptyCorpus,
    LengthMismatch,
    NonPositiveEntry,
    NotNormalized,
    SpaceMismatch,
    UnknownSymbol,
    ValidationError,
)

SUM_TOL = 1e-12
INPUT_SUM_TOL = 1e-9
DEFAULT_MAX_ALPHABET = 256


@dataclass(frozen=True)
class SampleSpace:
    """Ordered finite set of symbol labels; the order fixes vector indexing."""

    symbols: tuple[Hashable, ...]
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        symbols = tuple(self.symbols)
        if not symbols:
            raise ValidationError("sample space must be non-empty")
        index = {s: k for k, s in enumerate(symbols)}
        if len(index) != len(symbols):
            raise ValidationError(f"duplicate symbol labels in {symbols!r}")
        object.__setattr__(self, "symbols", symbols)
        object.__setattr__(self, "_index", index)

    @property
    def size(self) -> int:
        return len(self.symbols)

    def __len__(self) -> int:
        return len(self.symbols)

    def index(self, symbol) -> int:
        try:
            return self._index[symbol]
        except (KeyError, TypeError):
            raise UnknownSymbol(f"symbol {symbol!r} not in sample space") from None


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Distribution:
    space: SampleSpace
    probs: np.ndarray

    def __post_init__(self):
        probs = _frozen(self.probs)
        if probs.ndim != 1 or probs.shape[0] != self.space.size:
            raise LengthMismatch(
                f"expected {self.space.size} probabilities, got shape {probs.shape}"
            )
        if not np.all(np.isfinite(probs)) or np.any(probs <= 0.0):
            raise NonPositiveEntry(f"probabilities must be finite and > 0: {probs}")
        if abs(probs.sum() - 1.0) > SUM_TOL:
            raise NotNormalized(f"probabilities sum to {probs.sum()!r}")
        object.__setattr__(self, "probs", probs)

    def __getitem__(self, symbol) -> float:
        return float(self.probs[self.space.index(symbol)])

    def __len__(self) -> int:
        return self.space.size

    def to_dict(self) -> dict:
        return {"symbols": list(self.space.symbols), "probs": [float(p) for p in self.probs]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict, space: SampleSpace | None = None) -> "Distribution":
        if space is None:
            space = SampleSpace(tuple(data["symbols"]))
        elif "symbols" in data and tuple(data["symbols"]) != space.symbols:
            raise SpaceMismatch("serialized symbols differ from the given sample space")
        return make_distribution(space, data["probs"], normalize=False)

    @classmethod
    def from_json(cls, text: str) -> "Distribution":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True, eq=False)
class ContextModelSet:
    """The given context models, one per context id, over a shared sample space.

    ``labels`` optionally records how each model was obtained (for corpus
    estimates: the order and the conditioning context).
    """

    space: SampleSpace
    models: tuple[Distribution, ...]
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        models = tuple(self.models)
        if not models:
            raise ValidationError("at least one context model is required")
        for m in models:
            if m.space != self.space:
                raise SpaceMismatch("all context models must share one sample space")
        object.__setattr__(self, "models", models)
        if self.labels is not None:
            labels = tuple(self.labels)
            if len(labels) != len(models):
                raise LengthMismatch("one label per model required")
            object.__setattr__(self, "labels", labels)

    @property
    def context_count(self) -> int:
        return len(self.models)

    def __len__(self) -> int:
        return len(self.models)

    def __getitem__(self, i: int) -> Distribution:
        return self.models[i]

    @property
    def code_lengths(self) -> np.ndarray:
        """Matrix ``eta[i, x] = -ln p_i(x)`` of shape (contexts, symbols)."""
        return -np.log(np.vstack([m.probs for m in self.models]))

    @classmethod
    def from_probs(cls, symbols: Sequence, rows: Sequence[Sequence[float]], labels=None):
        space = SampleSpace(tuple(symbols))
        return cls(space, tuple(make_distribution(space, r) for r in rows), labels)

    def to_dict(self) -> dict:
        out = {
            "symbols": list(self.space.symbols),
            "probs": [[float(p) for p in m.probs] for m in self.models],
        }
        if self.labels is not None:
            out["labels"] = list(self.labels)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ContextModelSet":
        return cls.from_probs(data["symbols"], data["probs"], data.get("labels"))


@dataclass(frozen=True)
class SmoothingConfig:
    """Additive pseudo-count added to every symbol count before normalizing."""

    epsilon: float = 0.01

    def __post_init__(self):
        if not (self.epsilon > 0.0 and np.isfinite(self.epsilon)):
            raise ValidationError(f"smoothing epsilon must be > 0, got {self.epsilon}")

    def check_alphabet(self, size: int) -> None:
        if not self.epsilon < 1.0 / size:
            raise ValidationError(
                f"smoothing epsilon {self.epsilon} must be < 1/|X| = {1.0 / size}"
            )


def make_distribution(space: SampleSpace, values, normalize: bool = False) -> Distribution:
    """Validate ``values`` as a distribution over ``space``.

    With ``normalize`` set the values are divided by their sum; otherwise they
    must already sum to one within 1e-9 and are renormalized only to remove
    that rounding.
    """
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or arr.shape[0] != space.size:
        raise LengthMismatch(f"expected {space.size} values, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0):
        raise NonPositiveEntry(f"all values must be finite and > 0: {arr}")
    total = arr.sum()
    if not normalize and abs(total - 1.0) > INPUT_SUM_TOL:
        raise NotNormalized(f"values sum to {total!r}; pass normalize=True to rescale")
    return Distribution(space, arr / total)


def uniform(space: SampleSpace) -> Distribution:
    return Distribution(space, np.full(space.size, 1.0 / space.size))


def _most_frequent_context(corpus: bytes, order: int) -> bytes:
    # only positions followed by a symbol count; ties go to the smallest byte string
    counts = Counter(corpus[k - order:k] for k in range(order, len(corpus)))
    if not counts:
        raise CorpusTooShort(f"corpus of length {len(corpus)} has no order-{order} context")
    best = max(counts.values())
    return min(c for c, n in counts.items() if n == best)


def _symbol_label(byte: int) -> str:
    return bytes([byte]).decode("latin-1")


def estimate_context_models(
    corpus: bytes,
    context_orders: Sequence[int],
    smoothing: SmoothingConfig = SmoothingConfig(),
    max_alphabet: int = DEFAULT_MAX_ALPHABET,
) -> tuple[ContextModelSet, Distribution]:
    """Estimate one smoothed symbol model per n-gram order from a byte corpus.

    The alphabet is the set of distinct bytes in the corpus, sorted by value.
    An order-``n`` model is the next-symbol distribution following the most
    frequent length-``n`` context (ties: smallest byte string), with
    ``smoothing.epsilon`` added to every count. The returned target is the
    unsmoothed order-0 empirical distribution, which is strictly positive
    because every alphabet symbol occurs at least once.

    Returns
    -------
    (ContextModelSet, Distribution)
        Models labelled ``"order=n context=..."`` and the empirical target.
    """
    if isinstance(corpus, str):
        corpus = corpus.encode("latin-1")
    corpus = bytes(corpus)
    if not corpus:
        raise EmptyCorpus("corpus is empty")
    orders = [int(o) for o in context_orders]
    if not orders:
        raise ValidationError("at least one context order is required")
    if len(set(orders)) != len(orders) or any(o < 0 for o in orders):
        raise ValidationError(f"context orders must be distinct and >= 0: {orders}")

    alphabet = sorted(set(corpus))
    if len(alphabet) > max_alphabet:
        raise AlphabetOverflow(f"{len(alphabet)} distinct symbols exceed the cap {max_alphabet}")
    smoothing.check_alphabet(len(alphabet))
    space = SampleSpace(tuple(_symbol_label(b) for b in alphabet))
    position = {b: k for k, b in enumerate(alphabet)}

    models, labels = [], []
    for order in orders:
        context = _most_frequent_context(corpus, order)
        counts = np.zeros(len(alphabet))
        for k in range(order, len(corpus)):
            if corpus[k - order:k] == context:
                counts[position[corpus[k]]] += 1
        models.append(make_distribution(space, counts + smoothing.epsilon, normalize=True))
        labels.append(f"order={order} context={context.decode('latin-1')!r}")

    totals = np.zeros(len(alphabet))
    for b, n in Counter(corpus).items():
        totals[position[b]] = n
    target = make_distribution(space, totals, normalize=True)
    return ContextModelSet(space, tuple(models), tuple(labels)), target


def code_length(model: Distribution, x) -> float:
    """Code length ``-ln p(x)`` in nats."""
    return float(-np.log(model.probs[model.space.index(x)]))


def entropy(d: Distribution) -> float:
    p = d.probs
    return float(-np.sum(p * np.log(p)))


def kl_divergence(a: Distribution, b: Distribution) -> float:
    """Kullback-Leibler divergence ``sum a ln(a/b)`` in nats."""
    if a.space != b.space:
        raise SpaceMismatch("KL divergence needs distributions on the same sample space")
    value = float(np.sum(a.probs * (np.log(a.probs) - np.log(b.probs))))
    # rounding can push identical inputs a few ulps below zero
    return max(value, 0.0)
