"""Central finite-difference check of analytic gradients."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..errors import ArgumentError, NumericError


@dataclass
class GradReport:
    op: str
    tolerance: float
    per_param: dict = field(default_factory=dict)

    @property
    def max_rel_err(self) -> float:
        return max(self.per_param.values(), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_rel_err < self.tolerance

    def lines(self) -> list[str]:
        return [
            f"{self.op} {name} max_rel_err={err:.3e} {'PASS' if err < self.tolerance else 'FAIL'}"
            for name, err in self.per_param.items()
        ]


def relative_error(analytic, numeric):
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return np.abs(analytic - numeric) / denom


def gradcheck(
    forward: Callable,
    backward: Callable,
    inputs: dict,
    *,
    name: str = "op",
    seed: int = 0,
    tol: float = 1e-4,
    step: float = 1e-5,
    max_checks: int | None = None,
) -> GradReport:
    """Compare ``backward`` against central differences of ``forward``.

    ``forward()`` takes no arguments and reads the arrays in ``inputs``,
    which are perturbed in place; it returns ``(output, cache)``.
    ``backward(cache, cotangent)`` returns a dict of gradients keyed like
    ``inputs``. The scalar under test is ``sum(cotangent * output)`` for a
    fixed random cotangent. ``max_checks`` samples that many coordinates
    per input instead of checking all of them.
    """
    for key, arr in inputs.items():
        if arr.dtype != np.float64:
            raise ArgumentError(f"gradcheck needs float64 inputs; {key} is {arr.dtype}")
        if not arr.flags.c_contiguous:
            raise ArgumentError(f"gradcheck perturbs inputs in place; {key} must be C-contiguous")
    rng = np.random.default_rng(seed)
    out, cache = forward()
    if not np.all(np.isfinite(out)):
        raise NumericError(f"{name}: forward produced non-finite values")
    cot = rng.standard_normal(out.shape)
    grads = backward(cache, cot)

    def output():
        y, _ = forward()
        if not np.all(np.isfinite(y)):
            raise NumericError(f"{name}: forward produced non-finite values")
        return np.asarray(y, dtype=np.float64)

    report = GradReport(name, tol)
    for key, arr in inputs.items():
        if key not in grads:
            continue
        g = np.asarray(grads[key], dtype=np.float64)
        if g.shape != arr.shape:
            raise ArgumentError(f"{name}: gradient for {key} has shape {g.shape}, expected {arr.shape}")
        if not np.all(np.isfinite(g)):
            raise NumericError(f"{name}: analytic gradient for {key} is non-finite")
        idx = np.arange(arr.size)
        if max_checks is not None and arr.size > max_checks:
            idx = np.sort(rng.choice(arr.size, size=max_checks, replace=False))
        flat = arr.reshape(-1)
        numeric = np.empty(idx.size)
        for j, i in enumerate(idx):
            orig = flat[i]
            flat[i] = orig + step
            up = output()
            flat[i] = orig - step
            down = output()
            flat[i] = orig
            # Differencing outputs before the contraction keeps unaffected
            # elements exactly zero instead of cancelling two large sums.
            numeric[j] = np.sum(cot * (up - down)) / (2 * step)
        report.per_param[key] = float(relative_error(g.reshape(-1)[idx], numeric).max(initial=0.0))
    return report
