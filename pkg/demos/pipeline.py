"""
The command-line pipeline on a tiny corpus
==========================================

synth -> train (with a 3D FPA after block 2) -> eval -> mask-dump, all in a
scratch directory with a shrunken model so it finishes in well under a
minute. Pass a directory as the first argument to keep the outputs.
"""
import sys
import tempfile
from pathlib import Path

from fpa3d.cli import main

root = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp(prefix="fpa3d-demo-"))
root.mkdir(parents=True, exist_ok=True)

# Config values become flag defaults; flags still override them.
cfg = root / "tiny.cfg"
cfg.write_text(
    "# 16 frames is enough for every two-slot sentence\n"
    "model.t = 16\n"
    "model.h = 32\n"
    "model.w = 32\n"
    "model.hidden = 16\n"
    "train.batch_size = 4\n",
    encoding="utf-8",
)


def run(*args):
    argv = [str(a) for a in args]
    print(f"\n$ fpa3d {' '.join(argv)}")
    code = main(argv)
    if code:
        sys.exit(code)


run("synth", "--config", cfg, "--n", 80, "--seed", 1, "--slots", 2, "--out", root / "data")
run("train", "--config", cfg, "--data", root / "data", "--epochs", 3, "--fpa", "f2:3d", "--out", root / "run")
run("eval", "--config", cfg, "--data", root / "data", "--out", root / "run", "--split", "train")

first_video = sorted((root / "data" / "videos").glob("*.vid5"))[0]
run("mask-dump", "--config", cfg, "--ckpt", root / "run" / "model.ckpt", "--data", first_video,
    "--position", "f2", "--out", root / "masks")

pgms = sorted((root / "masks").glob("*.pgm"))
print(f"\n{len(pgms)} mask frames written, e.g. {pgms[0]}")
print("outputs kept in", root)
