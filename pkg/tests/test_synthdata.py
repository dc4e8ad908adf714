import itertools
from collections import Counter

import numpy as np
import pytest

from fpa3d.errors import ArgumentError
from fpa3d.synthdata import (
    NEUTRAL,
    Grammar,
    RenderConfig,
    gen_corpus,
    load_grammar,
    read_manifest,
    render_frame,
    render_video,
    sample_sentence,
    viseme_specs,
    word_duration,
)
from fpa3d.tensor import load_vid5


def test_default_grammar_shape():
    g = Grammar()
    assert [len(s) for s in g.slots] == [4, 4, 4, 25, 10, 4]
    assert len(sample_sentence(g, 3).text.split()) == 6
    assert sample_sentence(g, 3) == sample_sentence(g, 3)
    assert Grammar.from_text(g.to_text()) == g


def test_slot_one_is_uniform():
    g = Grammar()
    counts = Counter(sample_sentence(g, s).text.split()[0] for s in range(10_000))
    assert set(counts) == set(g.slots[0])
    assert all(abs(c / 10_000 - 0.25) < 0.02 for c in counts.values())


def test_durations_vary_within_two_to_six():
    specs = viseme_specs(Grammar())
    lengths = {len(v) for v in specs.values()}
    assert min(lengths) >= 2 and max(lengths) <= 6 and len(lengths) >= 3
    assert all(len(specs[w]) == word_duration(w) for w in specs)


def test_shared_prefixes_share_opening_frames():
    specs = viseme_specs(Grammar())
    for a, b in itertools.combinations(specs, 2):
        if a[0] == b[0]:
            assert specs[a][0] == specs[b][0]


def test_every_grammar_sentence_renders():
    g = Grammar()
    specs = viseme_specs(g)
    longest = max(sum(len(specs[w]) for w in ws) for ws in itertools.product(*g.slots))
    assert longest <= RenderConfig().t


def test_render_examples():
    cfg = RenderConfig(noise=0.0)
    specs = viseme_specs(Grammar.grid(2))
    v = render_video("bin blue", specs, 0, cfg)
    assert v.shape == (1, 1, 24, 32, 32) and v.dtype == np.float32
    tail = v[0, 0, -1]
    assert np.array_equal(tail, render_frame(NEUTRAL, 32, 32, cfg.background, cfg.mouth).astype(np.float32))
    assert tail[0, 0] == np.float32(cfg.background) and tail.min() < cfg.background
    noisy = RenderConfig()
    a = render_video("bin blue", specs, 5, noisy)
    assert a.tobytes() == render_video("bin blue", specs, 5, noisy).tobytes()
    assert 0 <= a.min() and a.max() <= 1
    with pytest.raises(ArgumentError):
        render_video("bin purple", specs, 0, cfg)


def test_corpus_counts_split_and_reproducibility(tmp_path):
    g = Grammar.grid(2)
    entries = gen_corpus(g, 10, 4, tmp_path / "a")
    gen_corpus(g, 10, 4, tmp_path / "b")
    assert len(list((tmp_path / "a" / "videos").glob("*.vid5"))) == 10
    assert len(read_manifest(tmp_path / "a" / "manifest.tsv")) == 10
    for f in sorted((tmp_path / "a").rglob("*")):
        if f.is_file():
            assert f.read_bytes() == (tmp_path / "b" / f.relative_to(tmp_path / "a")).read_bytes()
    video, sentence = read_manifest(tmp_path / "a" / "manifest.tsv")[0]
    assert load_vid5(tmp_path / "a" / video).shape == (1, 1, 24, 32, 32)
    assert sentence == entries[0].sentence
    assert load_grammar(tmp_path / "a") == g


def test_validation_fraction(tmp_path):
    entries = gen_corpus(Grammar.grid(2), 500, 7, tmp_path, RenderConfig(h=4, w=4))
    frac = sum(e.split == "val" for e in entries) / 500
    assert abs(frac - 0.1) < 0.05


def test_bad_inputs(tmp_path):
    with pytest.raises(ArgumentError):
        gen_corpus(Grammar.grid(2), 0, 1, tmp_path)
    with pytest.raises(ArgumentError):
        Grammar.grid(7)
    with pytest.raises(ArgumentError):
        Grammar((("a", "a"),))
