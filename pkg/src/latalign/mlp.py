"""Small feed-forward epsilon predictor loaded from a text weight file.

Weight file grammar (ASCII, one record per line, ``#`` starts a comment that
runs to end of line, blank lines ignored, fields separated by spaces/tabs)::

    file     := header layer+
    header   := "mlp 1" NL
                "shape" INT+ NL            latent shape, row-major
                "time_embed" INT NL        even number of sinusoidal features
                "time_base" FLOAT NL       optional, default 10000
                "classes" INT NL           width of the condition one-hot
                "activation" NAME NL       relu | silu | tanh | identity
                "layers" INT INT+ NL       n_0 ... n_L
    layer    := "layer" INT NL             0-based, in order
                row{n_out} "bias" FLOAT{n_out} NL
    row      := FLOAT{n_in} NL

The network input is ``[x_t.ravel(), emb(t), onehot(cond)]`` so ``n_0`` must
equal ``prod(shape) + time_embed + classes`` and ``n_L`` must equal
``prod(shape)``. ``emb(t) = [sin(t f_i), cos(t f_i)]`` with
``f_i = time_base ** (-i / half)`` for ``i = 0..half-1``. The activation is
applied after every layer but the last. An unconditional call leaves the
one-hot at zero.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .grid import checked

ACTIVATIONS = {
    "relu": lambda h: np.maximum(h, 0.0),
    "silu": lambda h: h / (1.0 + np.exp(-h)),
    "tanh": np.tanh,
    "identity": lambda h: h,
}


class WeightFileError(ValueError):
    """Malformed weight file; carries the offending line number."""

    def __init__(self, source, lineno, message):
        self.lineno = lineno
        super().__init__(f"{source}:{lineno}: {message}")


def time_embedding(t: float, dim: int, base: float = 10000.0) -> np.ndarray:
    half = dim // 2
    freqs = base ** (-np.arange(half) / half) if half else np.zeros(0)
    ang = float(t) * freqs
    return np.concatenate([np.sin(ang), np.cos(ang)])


@dataclass(frozen=True, eq=False)
class MLPDenoiser:
    shape: tuple[int, ...]
    time_embed: int
    classes: int
    activation: str
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    time_base: float = 10000.0

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.time_embed % 2:
            raise ValueError("time_embed must be even")
        d = math.prod(self.shape)
        sizes = [w.shape[1] for w in self.weights[:1]] + [w.shape[0] for w in self.weights]
        if not self.weights or sizes[0] != d + self.time_embed + self.classes or sizes[-1] != d:
            raise ValueError(f"layer sizes {sizes} do not fit latent size {d}")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if b.shape != (w.shape[0],):
                raise ValueError(f"layer {i}: bias length {b.shape} != {w.shape[0]}")
            if i and w.shape[1] != self.weights[i - 1].shape[0]:
                raise ValueError(f"layer {i}: input width {w.shape[1]} != {self.weights[i - 1].shape[0]}")

    @property
    def layer_sizes(self) -> list[int]:
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    def features(self, x_t, t, cond) -> np.ndarray:
        onehot = np.zeros(self.classes)
        if cond is not None:
            if not 0 <= cond < self.classes:
                raise ValueError(f"unknown class {cond!r}")
            onehot[cond] = 1.0
        return np.concatenate([np.ravel(x_t), time_embedding(t, self.time_embed, self.time_base), onehot])

    def predict(self, x_t, t, cond, alpha_bar_t=None):
        if x_t.shape != self.shape:
            raise ValueError(f"x_t shape {x_t.shape} != model shape {self.shape}")
        act = ACTIVATIONS[self.activation]
        h = self.features(x_t, t, cond)
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = w @ h + b
            if i < last:
                h = act(h)
        return checked(h.reshape(self.shape))

    def mask_hint(self, cond):
        return None


def save_mlp(model: MLPDenoiser, path) -> None:
    lines = [
        "mlp 1",
        "shape " + " ".join(str(s) for s in model.shape),
        f"time_embed {model.time_embed}",
        f"time_base {model.time_base!r}",
        f"classes {model.classes}",
        f"activation {model.activation}",
        "layers " + " ".join(str(n) for n in model.layer_sizes),
    ]
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        lines.append(f"layer {i}")
        lines.extend(" ".join(repr(float(v)) for v in row) for row in w)
        lines.append("bias " + " ".join(repr(float(v)) for v in b))
    Path(path).write_text("\n".join(lines) + "\n")


def load_mlp_denoiser(path) -> MLPDenoiser:
    source = str(path)
    records = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        fields = raw.split("#", 1)[0].split()
        if fields:
            records.append((lineno, fields))
    pos = 0
    last_line = records[-1][0] if records else 0

    def next_record(what):
        nonlocal pos
        if pos >= len(records):
            raise WeightFileError(source, last_line, f"unexpected end of file, expected {what}")
        pos += 1
        return records[pos - 1]

    def take(keyword, nargs=None):
        lineno, fields = next_record(repr(keyword))
        if fields[0] != keyword:
            raise WeightFileError(source, lineno, f"expected {keyword!r}, found {fields[0]!r}")
        args = fields[1:]
        if nargs is not None and len(args) != nargs:
            raise WeightFileError(source, lineno, f"{keyword!r} takes {nargs} value(s), got {len(args)}")
        return lineno, args

    def numbers(lineno, args, kind=float):
        try:
            return [kind(a) for a in args]
        except ValueError:
            raise WeightFileError(source, lineno, f"cannot parse numbers {' '.join(args)!r}")

    lineno, args = take("mlp", 1)
    if args != ["1"]:
        raise WeightFileError(source, lineno, f"unsupported format version {args[0]!r}")
    shape = tuple(numbers(*take("shape"), kind=int))
    (time_embed,) = numbers(*take("time_embed", 1), kind=int)
    time_base = 10000.0
    if pos < len(records) and records[pos][1][0] == "time_base":
        (time_base,) = numbers(*take("time_base", 1))
    (classes,) = numbers(*take("classes", 1), kind=int)
    _, (activation,) = take("activation", 1)
    lineno, args = take("layers")
    sizes = numbers(lineno, args, kind=int)
    if len(sizes) < 2:
        raise WeightFileError(source, lineno, "need at least two layer sizes")
    weights, biases = [], []
    for i, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        lineno, args = take("layer", 1)
        if numbers(lineno, args, kind=int) != [i]:
            raise WeightFileError(source, lineno, f"expected layer {i}")
        rows = []
        for _ in range(n_out):
            lineno, fields = next_record(f"layer {i} weight row")
            row = numbers(lineno, fields)
            if len(row) != n_in:
                raise WeightFileError(source, lineno, f"layer {i}: row has {len(row)} values, expected {n_in}")
            rows.append(row)
        lineno, args = take("bias", n_out)
        biases.append(np.array(numbers(lineno, args)))
        weights.append(np.array(rows, dtype=np.float64).reshape(n_out, n_in))
    if pos < len(records):
        raise WeightFileError(source, records[pos][0], "trailing data after last layer")
    return MLPDenoiser(shape, time_embed, classes, activation, tuple(weights), tuple(biases), time_base)
