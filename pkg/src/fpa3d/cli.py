"""``fpa3d`` command-line interface.

Subcommands: synth, train, eval, gradcheck, bench, mask-dump. Values from
``--config`` become the flag defaults, and explicit flags win over both.
Exit codes: 0 success, 1 usage, 2 data or file format, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, parse_config
from .ctc import Alphabet, min_frames
from .errors import ArgumentError, FormatError, FpaError, InfeasibleError
from .fpa import FpaConfig, fpa_build, fpa_forward
from .kernels import Conv3dParams, conv3d
from .model import AdamState, build_lipnet, lipnet_forward, load_checkpoint, load_tensors, save_checkpoint, train_epoch
from .model.lipnet import POSITIONS, LipNetConfig, fpa_input, stcnn_block_forward
from .model.train import dataset_loss, evaluate_model, load_split
from .parallel import hardware_description, set_threads
from .synthdata import Grammar, RenderConfig, gen_corpus, load_grammar
from .tensor import load_vid5, save_vid5

BENCH_OPS = ("conv3d", "fpa_forward", "fpa_overhead")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _shape(text: str) -> tuple:
    try:
        dims = tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if len(dims) != 5 or min(dims) < 1:
        raise argparse.ArgumentTypeError(f"expected five positive extents n,c,t,h,w, got {text!r}")
    return dims


def build_parser(cfg: RunConfig | None = None) -> argparse.ArgumentParser:
    cfg = cfg or RunConfig()
    fmt = argparse.ArgumentDefaultsHelpFormatter
    p = _Parser(prog="fpa3d", description="Feature pyramid attention kernels and a small lip-reading model.",
                formatter_class=fmt)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, help_text):
        sp = sub.add_parser(name, help=help_text, description=help_text, formatter_class=fmt)
        sp.add_argument("--config", default=None, help="key = value run configuration file")
        sp.add_argument("--threads", type=int, default=cfg.train.threads, help="worker pool size")
        return sp

    sp = add("synth", "Generate a synthetic viseme corpus.")
    sp.add_argument("--out", default=cfg.paths.data, help="corpus directory to write")
    sp.add_argument("--n", type=int, default=cfg.synth.n, help="number of videos")
    sp.add_argument("--seed", type=int, default=0, help="data seed")
    sp.add_argument("--slots", type=int, default=cfg.synth.slots, help="grammar slots to keep (1-6)")
    sp.add_argument("--noise", type=float, default=cfg.synth.noise, help="pixel noise standard deviation")

    sp = add("train", "Train the model with CTC loss and Adam.")
    sp.add_argument("--data", default=cfg.paths.data, help="corpus directory")
    sp.add_argument("--out", default=cfg.paths.out, help="run directory for checkpoint and metrics")
    sp.add_argument("--ckpt", default=cfg.paths.ckpt or None, help="checkpoint path; OUT/model.ckpt when unset")
    sp.add_argument("--epochs", type=int, default=cfg.train.epochs, help="training epochs")
    sp.add_argument("--seed", type=int, default=cfg.train.seed, help="seed for init, dropout and shuffling")
    sp.add_argument("--fpa", default=cfg.fpa.positions or "none", help="FPA placements, e.g. f2:3d or f2:3d,input:2d")

    sp = add("eval", "Decode a corpus split with a checkpoint and report metrics.")
    sp.add_argument("--data", default=cfg.paths.data, help="corpus directory")
    sp.add_argument("--ckpt", default=cfg.paths.ckpt or None, help="checkpoint to evaluate; OUT/model.ckpt when unset")
    sp.add_argument("--out", default=cfg.paths.out, help="run directory holding model.ckpt")
    sp.add_argument("--split", default="val", choices=("train", "val"), help="corpus split")
    sp.add_argument("--fpa", default=None, help="FPA placements; read from the checkpoint when unset")

    sp = add("gradcheck", "Finite-difference check of every backward pass.")
    sp.add_argument("--seed", type=int, default=cfg.train.seed, help="seed for inputs and cotangents")
    from .checks import SUITE
    sp.add_argument("--op", nargs="*", choices=sorted(SUITE), default=None, help="ops to check; all when unset")

    sp = add("bench", "Time a kernel.")
    sp.add_argument("--op", choices=BENCH_OPS, default="conv3d", help="operation to time")
    sp.add_argument("--shape", type=_shape, default=(4, 8, 24, 32, 32), help="input extents n,c,t,h,w")
    sp.add_argument("--repeats", type=int, default=10, help="timed calls")
    sp.add_argument("--warmup", type=int, default=1, help="untimed calls before timing")
    sp.add_argument("--seed", type=int, default=cfg.train.seed, help="seed for inputs and weights")

    sp = add("mask-dump", "Write the attention mask of one FPA as PGM frames, CSV and VID5.")
    sp.add_argument("--ckpt", default=cfg.paths.ckpt or None, help="checkpoint; OUT/model.ckpt when unset")
    sp.add_argument("--data", default=None, help="VID5 input video; first corpus video when unset")
    sp.add_argument("--index", type=int, default=0, help="batch item of the video file")
    sp.add_argument("--position", choices=POSITIONS, default=None, help="FPA position; first one present when unset")
    sp.add_argument("--out", default=cfg.paths.out, help="directory to write mask files into")
    sp.add_argument("--fpa", default=None, help="FPA placements; read from the checkpoint when unset")
    return p


def parse_args(argv):
    pre = _Parser(add_help=False)
    pre.add_argument("--config", default=None)
    known, _ = pre.parse_known_args(argv)
    cfg = parse_config(known.config) if known.config else RunConfig()
    return build_parser(cfg).parse_args(argv), cfg


def model_config_from_checkpoint(tensors: dict, cfg: RunConfig, fpa_text: str | None) -> LipNetConfig:
    """Widths, hidden size and FPA placement read back from tensor names and shapes."""
    base = cfg.lipnet_config()
    try:
        channels = tuple(int(tensors[f"block{i}.weight"].shape[0]) for i in (1, 2, 3))
        hidden = int(tensors["gru1.fwd.wh"].shape[0])
        num_classes = int(tensors["out.bias"].shape[0])
    except KeyError as e:
        raise FormatError(f"checkpoint lacks backbone tensor {e}") from None
    if fpa_text is not None:
        fpa = cfg.fpa_configs(fpa_text)
    else:
        fpa = {}
        for pos in POSITIONS:
            key = f"fpa.{pos}.down0.weight"
            if key not in tensors:
                continue
            levels = sum(1 for k in tensors if k.startswith(f"fpa.{pos}.down") and k.endswith(".weight"))
            variant = "2d" if tensors[key].shape[2] == 1 else "3d"
            fpa[pos] = FpaConfig(variant, levels, 3, cfg.fpa.mask_activation,
                                 f"fpa.{pos}.down0.bn.gamma" in tensors, cfg.fpa.dropout)
    return LipNetConfig(c=base.c, t=base.t, h=base.h, w=base.w, channels=channels, hidden=hidden,
                        num_classes=num_classes, dropout=base.dropout, fpa=fpa)


def _load_model(ckpt, cfg: RunConfig, fpa_text):
    tensors = load_tensors(ckpt)
    model = build_lipnet(model_config_from_checkpoint(tensors, cfg, fpa_text), seed=0)
    load_checkpoint(ckpt, model)
    return model


def _ckpt_path(args) -> Path:
    return Path(args.ckpt) if args.ckpt else Path(args.out) / "model.ckpt"


def cmd_synth(args, cfg: RunConfig) -> int:
    grammar = Grammar.grid(args.slots)
    render = RenderConfig(t=cfg.model.t, h=cfg.model.h, w=cfg.model.w, noise=args.noise)
    entries = gen_corpus(grammar, args.n, args.seed, args.out, render)
    n_val = sum(e.split == "val" for e in entries)
    print(f"synth n={len(entries)} train={len(entries) - n_val} val={n_val} slots={args.slots} seed={args.seed} out={args.out}")
    return 0


def check_feasible(samples, t: int) -> None:
    """Fail fast when some label needs more CTC frames than the model emits."""
    frames = {s.video.shape[1] for s in samples}
    if frames != {t}:
        raise ArgumentError(f"videos have {sorted(frames)} frames but model.t is {t}")
    worst = max(samples, key=lambda s: min_frames(s.label))
    need = min_frames(worst.label)
    if need > t:
        raise InfeasibleError(f"label {worst.label.text!r} needs {need} CTC frames but the model emits {t}; "
                              f"regenerate the corpus with model.t >= {need} or fewer slots")


def cmd_train(args, cfg: RunConfig) -> int:
    if args.epochs < 1:
        raise ArgumentError(f"--epochs must be >= 1, got {args.epochs}")
    cfg.train.seed = args.seed
    cfg.train.epochs = args.epochs
    cfg.fpa.positions = args.fpa
    alphabet = Alphabet()
    train_set = load_split(args.data, "train", alphabet)
    val_set = load_split(args.data, "val", alphabet)
    if not train_set:
        raise ArgumentError(f"{args.data}: training split is empty")
    check_feasible(train_set + val_set, cfg.model.t)
    grammar = load_grammar(args.data)
    model = build_lipnet(cfg.lipnet_config(alphabet.num_classes), seed=args.seed)
    tc = cfg.train_config()
    adam = AdamState()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lines = []

    def emit(line):
        lines.append(line)
        print(line, flush=True)

    emit(f"params={sum(v.size for _, v in model.named_parameters())} fpa={args.fpa} seed={args.seed}")
    for epoch in range(args.epochs):
        loss = train_epoch(train_set, model, adam, tc, epoch)
        emit(f"epoch={epoch + 1} loss={loss:.6f}")
    if val_set:
        log_probs, _ = lipnet_forward(model, val_set[0].video[None], "eval")
        emit(f"output_shape={tuple(log_probs.shape[1:])}")
        emit(f"val_loss={dataset_loss(val_set, model, tc.batch_size):.6f}")
        emit("eval " + evaluate_model(model, val_set, grammar, alphabet).to_line())
    else:
        emit("eval skipped: validation split is empty")
    ckpt = _ckpt_path(args)
    save_checkpoint(ckpt, model, adam)
    (out / "metrics.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"checkpoint={ckpt}")
    return 0


def cmd_eval(args, cfg: RunConfig) -> int:
    model = _load_model(_ckpt_path(args), cfg, args.fpa)
    alphabet = Alphabet()
    data = load_split(args.data, args.split, alphabet)
    if not data:
        raise ArgumentError(f"{args.data}: split {args.split!r} is empty")
    print(f"split={args.split} n={len(data)} loss={dataset_loss(data, model):.6f}")
    print("eval " + evaluate_model(model, data, load_grammar(args.data), alphabet).to_line())
    return 0


def cmd_gradcheck(args, cfg: RunConfig) -> int:
    from .checks import SUITE

    failed = 0
    worst = 0.0
    ops = args.op or list(SUITE)
    for op in ops:
        for report in SUITE[op](args.seed):
            for line in report.lines():
                print(line)
            failed += not report.passed
            worst = max(worst, report.max_rel_err)
    print(f"gradcheck ops={len(ops)} max_rel_err={worst:.3e} {'FAIL' if failed else 'PASS'}")
    return 3 if failed else 0


def _time(fn, repeats: int, warmup: int) -> np.ndarray:
    for _ in range(warmup):
        fn()
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return np.array(times)


def _timing_line(label: str, times: np.ndarray, elems: int) -> str:
    med = float(np.median(times))
    if len(times) == 1:
        return f"{label} time={med * 1e3:.3f}ms elems_per_s={elems / med:.4g}"
    p10, p90 = np.percentile(times, [10, 90])
    return (f"{label} median={med * 1e3:.3f}ms p10={p10 * 1e3:.3f}ms p90={p90 * 1e3:.3f}ms "
            f"elems_per_s={elems / med:.4g}")


def cmd_bench(args, cfg: RunConfig) -> int:
    if args.repeats < 1:
        raise ArgumentError(f"--repeats must be >= 1, got {args.repeats}")
    rng = np.random.default_rng(args.seed)
    n, c, t, h, w = args.shape
    print(f"hardware {hardware_description()} threads={args.threads}")
    label = f"{args.op} shape={','.join(map(str, args.shape))} threads={args.threads} repeats={args.repeats}"
    x = rng.standard_normal(args.shape).astype(np.float32)
    if args.op == "conv3d":
        p = Conv3dParams.init(c, c, 3, rng=rng)
        print(_timing_line(label, _time(lambda: conv3d(x, p), args.repeats, args.warmup), x.size))
    elif args.op == "fpa_forward":
        m = fpa_build(FpaConfig("3d"), c, init_seed=args.seed)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            times = _time(lambda: fpa_forward(m, x, "eval"), args.repeats, args.warmup)
        print(_timing_line(label, times, x.size))
    else:
        # Three backbone blocks on a video batch versus one 3D FPA on block 2's output.
        lcfg = LipNetConfig(c=c, t=t, h=h, w=w)
        model = build_lipnet(lcfg, seed=args.seed)

        def backbone():
            y = x
            for unit in model.blocks:
                y, _ = stcnn_block_forward(y, unit, lcfg.pool, "eval", 0)

        feat = x
        for unit in model.blocks[:2]:
            feat, _ = stcnn_block_forward(feat, unit, lcfg.pool, "eval", 0)
        m = fpa_build(FpaConfig("3d"), feat.shape[1], init_seed=args.seed)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            t_back = _time(backbone, args.repeats, args.warmup)
            t_fpa = _time(lambda: fpa_forward(m, feat, "eval"), args.repeats, args.warmup)
        print(_timing_line(label.replace("fpa_overhead", "backbone"), t_back, x.size))
        print(_timing_line(f"fpa_forward[f2] shape={','.join(map(str, feat.shape))}", t_fpa, feat.size))
        print(f"fpa_overhead ratio={np.median(t_fpa) / np.median(t_back):.4f}")
    return 0


def write_pgm(path, frame: np.ndarray) -> None:
    """8-bit binary PGM of ``round(255 * frame)`` clipped to 0..255."""
    pix = np.clip(np.round(255.0 * frame.astype(np.float64)), 0, 255).astype(np.uint8)
    h, w = pix.shape
    Path(path).write_bytes(f"P5\n{w} {h}\n255\n".encode("ascii") + pix.tobytes())


def dump_mask(ckpt, video_path, position, out_dir, cfg: RunConfig | None = None, fpa_text=None, index: int = 0) -> list[Path]:
    """Run the FPA at ``position`` in eval mode and export its mask.

    Writes ``mask_<t>.pgm`` per frame (channel average), ``mask.csv`` with one
    row ``t,h,w,<value per channel>`` per voxel, and ``mask.vid5``.
    """
    cfg = cfg or RunConfig()
    model = _load_model(ckpt, cfg, fpa_text)
    if position is None:
        if not model.fpas:
            raise ArgumentError(f"{ckpt}: checkpoint holds no FPA module")
        position = next(iter(model.fpas))
    video = load_vid5(video_path)
    if not 0 <= index < video.shape[0]:
        raise ArgumentError(f"--index {index} out of range for {video.shape[0]} videos")
    video = video[index : index + 1]
    x = fpa_input(model, video, position)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        _, cache = fpa_forward(model.fpas[position], x, "eval")
    mask = cache.mask[0]  # (c, t, h, w)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    mean = mask.mean(axis=0)
    for ti in range(mean.shape[0]):
        path = out / f"mask_{ti:03d}.pgm"
        write_pgm(path, mean[ti])
        written.append(path)
    c, t, h, w = mask.shape
    tt, hh, ww = np.meshgrid(np.arange(t), np.arange(h), np.arange(w), indexing="ij")
    rows = [",".join([str(a), str(b), str(d)] + [repr(float(v)) for v in vals])
            for a, b, d, vals in zip(tt.ravel(), hh.ravel(), ww.ravel(), mask.reshape(c, -1).T)]
    (out / "mask.csv").write_text("\n".join(rows) + "\n", encoding="utf-8")
    save_vid5(out / "mask.vid5", mask[None])
    return written + [out / "mask.csv", out / "mask.vid5"]


def cmd_mask_dump(args, cfg: RunConfig) -> int:
    video = args.data
    if video is None:
        corpus = Path(cfg.paths.data)
        first = sorted((corpus / "videos").glob("*.vid5"))
        if not first:
            raise ArgumentError("no --data video given and no corpus videos found")
        video = first[0]
    files = dump_mask(_ckpt_path(args), video, args.position, args.out, cfg, args.fpa, args.index)
    n_pgm = sum(f.suffix == ".pgm" for f in files)
    print(f"mask-dump frames={n_pgm} out={args.out}")
    return 0


COMMANDS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "eval": cmd_eval,
    "gradcheck": cmd_gradcheck,
    "bench": cmd_bench,
    "mask-dump": cmd_mask_dump,
}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args, cfg = parse_args(argv)
        if args.threads < 1:
            raise ArgumentError(f"--threads must be >= 1, got {args.threads}")
        set_threads(args.threads)
        return COMMANDS[args.command](args, cfg)
    except FpaError as e:
        print(f"fpa3d: error: {e}", file=sys.stderr)
        return e.exit_code
    except OSError as e:
        print(f"fpa3d: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
