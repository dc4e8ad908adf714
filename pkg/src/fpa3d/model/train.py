from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..ctc import Alphabet, LabelSeq, ctc_loss_grad, greedy_decode
from ..errors import NumericError
from ..layers import derive_seed
from ..metrics import EvalReport, evaluate
from ..synthdata import read_manifest
from ..tensor import load_vid5, substream
from .lipnet import LipNet, lipnet_backward, lipnet_forward
from .optim import AdamState, adam_step


@dataclass
class TrainConfig:
    epochs: int = 30
    batch_size: int = 4
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0


@dataclass
class Sample:
    video: np.ndarray  # (c, t, h, w)
    label: LabelSeq


def load_split(corpus_dir, split: str, alphabet: Alphabet = Alphabet(), dtype=np.float32) -> list[Sample]:
    root = Path(corpus_dir)
    samples = []
    for video, sentence in read_manifest(root / f"{split}.tsv"):
        samples.append(Sample(load_vid5(root / video)[0].astype(dtype), alphabet.encode(sentence)))
    return samples


def _batches(n: int, batch_size: int, order):
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]


def batch_loss_grad(model: LipNet, samples, mode: str, dropout_key: int):
    """Mean CTC loss of a batch, its logit gradient and the forward cache."""
    videos = np.stack([s.video for s in samples])
    log_probs, cache = lipnet_forward(model, videos, mode, dropout_key)
    if not np.all(np.isfinite(log_probs)):
        raise NumericError("forward pass produced non-finite log-probabilities")
    grad = np.empty_like(log_probs)
    total = 0.0
    for i, s in enumerate(samples):
        loss, g = ctc_loss_grad(log_probs[i], s.label)
        total += loss
        grad[i] = g
    n = len(samples)
    return total / n, grad / n, cache


def train_epoch(dataset, model: LipNet, adam: AdamState, config: TrainConfig, epoch: int = 0) -> float:
    """One pass over seeded-shuffled mini-batches; returns the sample-weighted mean loss."""
    if not dataset:
        raise ValueError("training set is empty")
    order = np.random.default_rng(substream(config.seed, f"shuffle/{epoch}")).permutation(len(dataset))
    params = dict(model.named_parameters())
    total = 0.0
    for b, idx in enumerate(_batches(len(dataset), config.batch_size, order)):
        batch = [dataset[i] for i in idx]
        try:
            loss, grad, cache = batch_loss_grad(model, batch, "train", derive_seed(config.seed, epoch, b))
            if not np.isfinite(loss):
                raise NumericError(f"non-finite loss {loss}")
            grads = lipnet_backward(model, cache, grad_logits=grad)
            adam_step(params, grads, adam, config.lr, config.beta1, config.beta2, config.eps)
        except NumericError as e:
            raise NumericError(f"epoch {epoch + 1}, batch {b}: {e}") from e
        total += loss * len(batch)
    return total / len(dataset)


def dataset_loss(dataset, model: LipNet, batch_size: int = 8, mode: str = "eval") -> float:
    total = 0.0
    for idx in _batches(len(dataset), batch_size, np.arange(len(dataset))):
        batch = [dataset[i] for i in idx]
        loss, _, _ = batch_loss_grad(model, batch, mode, 0)
        total += loss * len(batch)
    return total / len(dataset)


def predict(model: LipNet, videos, alphabet: Alphabet = Alphabet(), batch_size: int = 8) -> list[str]:
    out = []
    for start in range(0, len(videos), batch_size):
        log_probs, _ = lipnet_forward(model, np.stack(videos[start : start + batch_size]), "eval")
        out += [greedy_decode(lp, alphabet) for lp in log_probs]
    return out


def evaluate_model(model: LipNet, dataset, grammar=None, alphabet: Alphabet = Alphabet()) -> EvalReport:
    hyps = predict(model, [s.video for s in dataset], alphabet)
    refs = [s.label.text for s in dataset]
    return evaluate(hyps, refs, grammar)
