"""Synthetic viseme videos over a GRID-style slot grammar.

Every letter maps to a mouth shape (an ellipse of given aperture, width and
vertical offset). A word is played as a 2-6 frame sequence that walks its
letters, so words sharing a prefix share their opening frames. Frames after
the sentence hold a closed, neutral mouth.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ctc import LETTERS, Alphabet, LabelSeq
from .errors import ArgumentError
from .layers import derive_seed
from .tensor import save_vid5

GRID_SLOTS = (
    ("bin", "lay", "place", "set"),
    ("blue", "green", "red", "white"),
    ("at", "by", "in", "with"),
    tuple(c for c in LETTERS if c != "w"),
    ("zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine"),
    ("again", "now", "please", "soon"),
)


@dataclass(frozen=True)
class Grammar:
    slots: tuple = GRID_SLOTS

    def __post_init__(self):
        if not self.slots or any(len(s) == 0 for s in self.slots):
            raise ArgumentError("every grammar slot needs at least one word")
        for s in self.slots:
            if len(set(s)) != len(s):
                raise ArgumentError(f"duplicate words in slot {s}")

    @classmethod
    def grid(cls, n_slots: int = 6) -> "Grammar":
        if not 1 <= n_slots <= len(GRID_SLOTS):
            raise ArgumentError(f"slot count must be in 1..{len(GRID_SLOTS)}, got {n_slots}")
        return cls(GRID_SLOTS[:n_slots])

    @property
    def words(self) -> set:
        return {w for s in self.slots for w in s}

    def parses(self, words) -> bool:
        return len(words) == len(self.slots) and all(w in s for w, s in zip(words, self.slots))

    def to_text(self) -> str:
        return "".join(" ".join(s) + "\n" for s in self.slots)

    @classmethod
    def from_text(cls, text: str) -> "Grammar":
        return cls(tuple(tuple(line.split()) for line in text.splitlines() if line.strip()))


@dataclass(frozen=True)
class MouthShape:
    aperture: float  # vertical opening, fraction of frame height
    width: float  # fraction of frame width
    offset: float  # vertical centre offset, fraction of frame height


NEUTRAL = MouthShape(0.02, 0.25, 0.0)


def letter_shape(ch: str) -> MouthShape:
    i = LETTERS.index(ch)
    return MouthShape(0.05 + 0.05 * (i % 5), 0.15 + 0.05 * (i // 5), 0.03 * ((i % 3) - 1))


def word_duration(word: str) -> int:
    return int(np.clip(len(word) - 1, 2, 6))


def viseme_spec(word: str) -> tuple[MouthShape, ...]:
    if not word or any(ch not in LETTERS for ch in word):
        raise ArgumentError(f"no viseme program for word {word!r}")
    dur = word_duration(word)
    return tuple(letter_shape(word[j * len(word) // dur]) for j in range(dur))


def viseme_specs(grammar: Grammar) -> dict:
    return {w: viseme_spec(w) for w in sorted(grammar.words)}


@dataclass(frozen=True)
class RenderConfig:
    t: int = 24
    h: int = 32
    w: int = 32
    noise: float = 0.02
    background: float = 0.6
    mouth: float = 0.1


def render_frame(shape: MouthShape, h: int, w: int, background: float, mouth: float) -> np.ndarray:
    yy, xx = np.mgrid[0:h, 0:w] + 0.5
    cy = h / 2 + shape.offset * h
    cx = w / 2
    ay = max(shape.aperture * h / 2, 0.25)
    ax = max(shape.width * w / 2, 0.25)
    r = np.sqrt(((yy - cy) / ay) ** 2 + ((xx - cx) / ax) ** 2)
    # Signed distance to the rim in pixels gives one pixel of anti-aliasing.
    coverage = np.clip(0.5 - (r - 1.0) * min(ax, ay), 0.0, 1.0)
    return background + coverage * (mouth - background)


def sentence_frames(words, specs: dict) -> list[MouthShape]:
    frames = []
    for word in words:
        if word not in specs:
            raise ArgumentError(f"unknown word {word!r}")
        frames.extend(specs[word])
    return frames


def render_video(sentence, specs: dict, noise_seed: int, config: RenderConfig = RenderConfig()) -> np.ndarray:
    """Render a sentence as a (1, 1, t, h, w) float32 video with values in [0, 1]."""
    text = sentence.text if isinstance(sentence, LabelSeq) else str(sentence)
    frames = sentence_frames(text.split(), specs)
    if len(frames) > config.t:
        raise ArgumentError(f"sentence {text!r} needs {len(frames)} frames, only {config.t} available")
    frames += [NEUTRAL] * (config.t - len(frames))
    video = np.stack([render_frame(f, config.h, config.w, config.background, config.mouth) for f in frames])
    if config.noise > 0:
        video = video + np.random.default_rng(noise_seed).normal(0.0, config.noise, video.shape)
    return np.clip(video, 0.0, 1.0).astype(np.float32)[None, None]


def sample_sentence(grammar: Grammar, seed: int, alphabet: Alphabet = Alphabet()) -> LabelSeq:
    rng = np.random.default_rng(seed)
    words = [slot[rng.integers(len(slot))] for slot in grammar.slots]
    return alphabet.encode(" ".join(words))


def is_validation(seed: int, index: int) -> bool:
    digest = hashlib.sha256(f"{seed}:{index}".encode()).digest()
    return int.from_bytes(digest[:8], "little") % 10 == 0


@dataclass(frozen=True)
class CorpusEntry:
    video: str  # path relative to the corpus root
    sentence: str
    split: str


def gen_corpus(grammar: Grammar, n: int, seed: int, out_dir, config: RenderConfig = RenderConfig()) -> list[CorpusEntry]:
    """Write ``n`` videos, label files and tab-separated manifests under ``out_dir``."""
    if n < 1:
        raise ArgumentError(f"corpus size must be >= 1, got {n}")
    root = Path(out_dir)
    (root / "videos").mkdir(parents=True, exist_ok=True)
    (root / "labels").mkdir(exist_ok=True)
    specs = viseme_specs(grammar)
    entries = []
    for i in range(n):
        label = sample_sentence(grammar, derive_seed(seed, 1, i))
        video = render_video(label, specs, derive_seed(seed, 2, i), config)
        rel = f"videos/{i:06d}.vid5"
        save_vid5(root / rel, video)
        (root / "labels" / f"{i:06d}.txt").write_text(label.text + "\n", encoding="utf-8")
        entries.append(CorpusEntry(rel, label.text, "val" if is_validation(seed, i) else "train"))
    (root / "grammar.txt").write_text(grammar.to_text(), encoding="utf-8")
    for name, keep in (("manifest.tsv", None), ("train.tsv", "train"), ("val.tsv", "val")):
        lines = [f"{e.video}\t{e.sentence}\n" for e in entries if keep in (None, e.split)]
        (root / name).write_text("".join(lines), encoding="utf-8")
    return entries


def read_manifest(path) -> list[tuple[str, str]]:
    rows = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        video, sep, sentence = line.partition("\t")
        if not sep:
            raise ArgumentError(f"{path}:{lineno}: expected '<video-path>\\t<sentence>'")
        rows.append((video, sentence))
    return rows


def load_grammar(corpus_dir) -> Grammar:
    path = Path(corpus_dir) / "grammar.txt"
    return Grammar.from_text(path.read_text(encoding="utf-8")) if path.exists() else Grammar()
