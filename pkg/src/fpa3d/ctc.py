"""Connectionist temporal classification.

The loss runs the alpha/beta recursions over the blank-interleaved label in
log space. Its gradient is taken with respect to the logits feeding the
per-frame log-softmax, evaluated at ``logits == log_probs``: for normalized
rows this is ``softmax - posterior occupancy``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, ContractError, InfeasibleError, SizeError

LETTERS = "abcdefghijklmnopqrstuvwxyz"


@dataclass(frozen=True)
class Alphabet:
    symbols: str = LETTERS + " "

    def __post_init__(self):
        if len(set(self.symbols)) != len(self.symbols):
            raise ArgumentError("alphabet symbols must be distinct")

    @property
    def blank_index(self) -> int:
        return len(self.symbols)

    @property
    def num_classes(self) -> int:
        return len(self.symbols) + 1

    def encode(self, text: str) -> "LabelSeq":
        try:
            idx = tuple(self.symbols.index(ch) for ch in text)
        except ValueError:
            raise ArgumentError(f"text {text!r} has characters outside the alphabet") from None
        return LabelSeq(idx, text)

    def decode(self, indices) -> str:
        return "".join(self.symbols[i] for i in indices)


@dataclass(frozen=True)
class LabelSeq:
    indices: tuple
    text: str = ""

    def __post_init__(self):
        if len(self.indices) < 1:
            raise ArgumentError("label must contain at least one symbol")

    def __len__(self):
        return len(self.indices)


def _indices(label) -> tuple:
    return tuple(label.indices) if isinstance(label, LabelSeq) else tuple(int(i) for i in label)


def min_frames(label) -> int:
    idx = _indices(label)
    return len(idx) + sum(a == b for a, b in zip(idx, idx[1:]))


def _check_rows(log_probs, tol):
    lp = np.asarray(log_probs, dtype=np.float64)
    if lp.ndim != 2:
        raise ArgumentError(f"log_probs must be (t, classes), got shape {lp.shape}")
    m = lp.max(axis=1, keepdims=True)
    norm = (m + np.log(np.exp(lp - m).sum(axis=1, keepdims=True)))[:, 0]
    if not np.all(np.abs(norm) <= tol):
        raise ContractError(f"log_probs rows are not normalized (max |logsumexp| = {np.abs(norm).max():.3g})")
    return lp


def ctc_loss_grad(log_probs, label, blank: int | None = None, tol: float = 1e-4):
    """Return ``(loss, grad)`` with ``grad`` shaped like ``log_probs``."""
    lp = _check_rows(log_probs, tol)
    t_len, k = lp.shape
    blank = k - 1 if blank is None else blank
    idx = _indices(label)
    if any(not 0 <= i < k or i == blank for i in idx):
        raise ArgumentError(f"label indices {idx} must be non-blank classes below {k}")
    if t_len < min_frames(idx):
        raise InfeasibleError(f"{t_len} frames cannot emit a label needing {min_frames(idx)}")

    ext = np.full(2 * len(idx) + 1, blank)
    ext[1::2] = idx
    s_len = ext.size
    skip = np.zeros(s_len, dtype=bool)
    skip[2:] = (ext[2:] != blank) & (ext[2:] != ext[:-2])
    lpe = lp[:, ext]

    alpha = np.full((t_len, s_len), -np.inf)
    alpha[0, :2] = lpe[0, :2]
    for t in range(1, t_len):
        prev = alpha[t - 1]
        acc = prev.copy()
        acc[1:] = np.logaddexp(acc[1:], prev[:-1])
        acc[2:] = np.where(skip[2:], np.logaddexp(acc[2:], prev[:-2]), acc[2:])
        alpha[t] = acc + lpe[t]

    beta = np.full((t_len, s_len), -np.inf)
    beta[-1, -2:] = lpe[-1, -2:]
    for t in range(t_len - 2, -1, -1):
        nxt = beta[t + 1]
        acc = nxt.copy()
        acc[:-1] = np.logaddexp(acc[:-1], nxt[1:])
        acc[:-2] = np.where(skip[2:], np.logaddexp(acc[:-2], nxt[2:]), acc[:-2])
        beta[t] = acc + lpe[t]

    log_p = np.logaddexp(alpha[-1, -1], alpha[-1, -2])
    gamma = alpha + beta - lpe
    occ = np.full((t_len, k), -np.inf)
    rows = np.repeat(np.arange(t_len), s_len)
    np.logaddexp.at(occ, (rows, np.tile(ext, t_len)), gamma.ravel())
    grad = np.exp(lp) - np.exp(occ - log_p)
    return float(-log_p), grad


def posterior_occupancy(log_probs, label, blank: int | None = None) -> np.ndarray:
    """Log posterior probability of emitting each class at each frame."""
    lp = np.asarray(log_probs, dtype=np.float64)
    _, grad = ctc_loss_grad(lp, label, blank)
    with np.errstate(divide="ignore"):
        return np.log(np.exp(lp) - grad)


def collapse(path, blank: int) -> tuple:
    out = []
    prev = None
    for p in path:
        if p != prev and p != blank:
            out.append(p)
        prev = p
    return tuple(out)


def ctc_brute_force(log_probs, label, blank: int | None = None) -> float:
    """Exhaustive sum over every frame-level path; small instances only."""
    lp = np.asarray(log_probs, dtype=np.float64)
    t_len, k = lp.shape
    if k ** t_len > 10**6:
        raise SizeError(f"{k}^{t_len} paths is too many to enumerate")
    blank = k - 1 if blank is None else blank
    target = _indices(label)
    scores = [
        lp[np.arange(t_len), path].sum()
        for path in itertools.product(range(k), repeat=t_len)
        if collapse(path, blank) == target
    ]
    if not scores:
        return float("inf")
    scores = np.array(scores)
    m = scores.max()
    return float(-(m + np.log(np.exp(scores - m).sum())))


def greedy_decode(log_probs, alphabet: Alphabet) -> str:
    best = np.asarray(log_probs).argmax(axis=1)
    return alphabet.decode(collapse(best.tolist(), alphabet.blank_index))
