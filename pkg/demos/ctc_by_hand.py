"""
CTC by hand
===========

Scores a short label against random per-frame class probabilities three
ways: exhaustive path enumeration, the forward-backward recursion, and a
finite-difference probe of the gradient. Then greedy decoding and the
transcript metrics on a toy batch.
"""
import itertools

import numpy as np

from fpa3d.ctc import Alphabet, collapse, ctc_brute_force, ctc_loss_grad, greedy_decode
from fpa3d.kernels import log_softmax
from fpa3d.metrics import bleu, edit_distance, evaluate

# Three classes: 'a' (0), 'b' (1), blank (2). Four frames.
rng = np.random.default_rng(0)
logits = rng.standard_normal((4, 3))
log_probs = log_softmax(logits, axis=1)
label = [0, 1]

# Every one of the 3**4 frame paths that collapses to "ab".
paths = [p for p in itertools.product(range(3), repeat=4) if collapse(p, 2) == (0, 1)]
print(f"{len(paths)} of {3 ** 4} paths collapse to 'ab':")
print("  ", " ".join("".join("ab-"[i] for i in p) for p in paths))

loss, grad = ctc_loss_grad(log_probs, label, blank=2)
print("\nforward-backward loss:", loss)
print("brute-force loss     :", ctc_brute_force(log_probs, label, blank=2))

# The gradient is taken with respect to the logits that feed the softmax.
step = 1e-6
i, k = 1, 0
bumped = logits.copy()
bumped[i, k] += step
numeric = (ctc_loss_grad(log_softmax(bumped, axis=1), label, blank=2)[0] - loss) / step
print(f"d loss / d logit[{i},{k}]: analytic {grad[i, k]:.6f}  numeric {numeric:.6f}")

# The t=2 uniform case has a closed form: three of four paths are valid.
two = np.log(np.full((2, 2), 0.5))
print("\nt=2 uniform loss:", ctc_loss_grad(two, [0], blank=1)[0], "= -ln 0.75 =", -np.log(0.75))

# Greedy decoding picks the best class per frame and collapses.
alphabet = Alphabet()
frames = "bb-iinn  --bblluu-e"
onehot = np.full((len(frames), alphabet.num_classes), -20.0)
for t, ch in enumerate(frames):
    onehot[t, alphabet.blank_index if ch == "-" else alphabet.symbols.index(ch)] = 0.0
print("\ngreedy decode:", repr(greedy_decode(onehot, alphabet)))

refs = ["bin blue", "set red", "lay green"]
hyps = ["bin blue", "set rod", "lay"]
print("edit distance 'set rod' vs 'set red':", edit_distance("set rod", "set red"))
print(evaluate(hyps, refs).to_line())
print("bleu of a corpus against itself:", bleu(refs, refs))
