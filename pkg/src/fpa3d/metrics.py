"""Character/word error rates, corpus BLEU and per-slot word error rates."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

from .errors import ArgumentError


def edit_distance(a: Sequence, b: Sequence) -> int:
    """Levenshtein distance with unit costs."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, 1):
        cur = [i]
        for j, y in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (x != y)))
        prev = cur
    return prev[-1]


def tokenize(text: str, tokenizer: str) -> list:
    if tokenizer == "chars":
        return list(text)
    if tokenizer == "words":
        return text.split()
    raise ArgumentError(f"unknown tokenizer {tokenizer!r}")


def error_rate(hyps: Sequence[str], refs: Sequence[str], tokenizer: str = "words") -> float:
    """Corpus-level error rate: total edits over total reference tokens."""
    if len(hyps) != len(refs):
        raise ArgumentError(f"{len(hyps)} hypotheses for {len(refs)} references")
    if not refs:
        raise ArgumentError("reference corpus is empty")
    edits = total = 0
    for h, r in zip(hyps, refs):
        rt = tokenize(r, tokenizer)
        edits += edit_distance(tokenize(h, tokenizer), rt)
        total += len(rt)
    if total == 0:
        raise ArgumentError("reference corpus has no tokens")
    return edits / total


def _ngrams(tokens, n):
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu(hyps: Sequence[str], refs: Sequence[str], max_n: int = 4) -> float:
    """Corpus BLEU with uniform weights and clipped counts.

    The n-gram order is capped at the shortest reference length so that
    corpora of very short sentences still score 1 when matched exactly.
    """
    if len(hyps) != len(refs):
        raise ArgumentError(f"{len(hyps)} hypotheses for {len(refs)} references")
    if not refs:
        raise ArgumentError("reference corpus is empty")
    hyp_toks = [h.split() for h in hyps]
    ref_toks = [r.split() for r in refs]
    n_max = min(max_n, min(len(r) for r in ref_toks))
    if n_max < 1:
        return 0.0
    matches = [0] * n_max
    totals = [0] * n_max
    for h, r in zip(hyp_toks, ref_toks):
        for n in range(1, n_max + 1):
            hc, rc = _ngrams(h, n), _ngrams(r, n)
            matches[n - 1] += sum(min(c, rc[g]) for g, c in hc.items())
            totals[n - 1] += sum(hc.values())
    if min(matches) == 0:
        return 0.0
    log_prec = sum(math.log(m / t) for m, t in zip(matches, totals)) / n_max
    c = sum(len(h) for h in hyp_toks)
    r = sum(len(x) for x in ref_toks)
    bp = 1.0 if c >= r else math.exp(1 - r / c)
    return bp * math.exp(log_prec)


def per_slot_wer(hyps: Sequence[str], refs: Sequence[str], grammar) -> list[float]:
    """Fraction of sentences whose k-th word is wrong, for every grammar slot."""
    if len(hyps) != len(refs) or not refs:
        raise ArgumentError("need equally many hypotheses and references, at least one")
    n_slots = len(grammar.slots)
    errors = [0] * n_slots
    for h, r in zip(hyps, refs):
        rw = r.split()
        if not grammar.parses(rw):
            raise ArgumentError(f"reference {r!r} does not follow the grammar")
        hw = h.split()
        for k in range(n_slots):
            errors[k] += k >= len(hw) or hw[k] != rw[k]
    return [e / len(refs) for e in errors]


@dataclass
class EvalReport:
    cer: float
    wer: float
    bleu: float
    slot_wer: list = field(default_factory=list)

    def to_line(self) -> str:
        parts = [f"cer={self.cer:.6f}", f"wer={self.wer:.6f}", f"bleu={self.bleu:.6f}"]
        parts += [f"wer{k}={v:.6f}" for k, v in enumerate(self.slot_wer, 1)]
        return " ".join(parts)

    @classmethod
    def from_line(cls, line: str) -> "EvalReport":
        kv = dict(item.split("=", 1) for item in line.split())
        slots = [float(kv[f"wer{k}"]) for k in range(1, len(kv)) if f"wer{k}" in kv]
        return cls(float(kv["cer"]), float(kv["wer"]), float(kv["bleu"]), slots)


def evaluate(hyps: Sequence[str], refs: Sequence[str], grammar=None) -> EvalReport:
    slots = per_slot_wer(hyps, refs, grammar) if grammar is not None else []
    return EvalReport(error_rate(hyps, refs, "chars"), error_rate(hyps, refs, "words"), bleu(hyps, refs), slots)
