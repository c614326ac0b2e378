"""Epsilon predictors: the model interface, the analytic Gaussian-mixture
denoiser and classifier-free guidance.

A condition is either ``None`` (unconditional) or an integer class label.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Protocol, Sequence, runtime_checkable

import numpy as np
from scipy.special import logsumexp

from .grid import as_grid, checked, load_grid, same_shape

Condition = Optional[int]

WEIGHT_TOL = 1e-12


@runtime_checkable
class EpsilonModel(Protocol):
    """Noise predictor used by the editor.

    ``predict`` receives both the training timestep and its cumulative signal
    weight so analytic and learned backends can share the loop.
    """

    shape: tuple[int, ...]

    def predict(self, x_t: np.ndarray, t: int, cond: Condition,
                alpha_bar_t: float) -> np.ndarray: ...


@dataclass(frozen=True)
class Component:
    weight: float
    mean: np.ndarray
    variance: float
    label: int

    def __post_init__(self):
        object.__setattr__(self, "mean", as_grid(self.mean))
        if not self.weight > 0:
            raise ValueError("component weight must be positive")
        if not self.variance >= 0 or not math.isfinite(self.variance):
            raise ValueError("component variance must be finite and >= 0")


@dataclass(frozen=True)
class MixtureSpec:
    """Class-conditional isotropic Gaussian mixture.

    ``weight`` of a component is its probability within its class; the
    unconditional mixture weights each class by ``class_weights`` (uniform when
    omitted).
    """

    components: tuple[Component, ...]
    class_weights: dict = field(default_factory=dict)

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise ValueError("mixture needs at least one component")
        object.__setattr__(self, "components", comps)
        shape = comps[0].mean.shape
        if any(c.mean.shape != shape for c in comps):
            raise ValueError("all component means must share one shape")
        labels = sorted({c.label for c in comps})
        for k in labels:
            total = sum(c.weight for c in comps if c.label == k)
            if abs(total - 1.0) > WEIGHT_TOL:
                raise ValueError(f"weights of class {k} sum to {total!r}, not 1")
        cw = dict(self.class_weights) or {k: 1.0 / len(labels) for k in labels}
        if sorted(cw) != labels:
            raise ValueError("class_weights must list exactly the declared classes")
        if any(v <= 0 for v in cw.values()) or abs(sum(cw.values()) - 1.0) > WEIGHT_TOL:
            raise ValueError("class_weights must be positive and sum to 1")
        object.__setattr__(self, "class_weights", cw)
        object.__setattr__(self, "_arrays", {})

    @property
    def shape(self) -> tuple[int, ...]:
        return self.components[0].mean.shape

    @property
    def classes(self) -> list[int]:
        return sorted(self.class_weights)

    def arrays(self, cond: Condition = None):
        """Stacked ``(log_weights, means, variances)`` for ``cond`` (all
        components, globally weighted, when ``cond`` is None)."""
        if cond is not None and cond not in self.class_weights:
            raise ValueError(f"unknown class {cond!r}")
        if cond not in self._arrays:
            self._arrays[cond] = self._stack(cond)
        return self._arrays[cond]

    def _stack(self, cond: Condition):
        comps = [c for c in self.components if cond is None or c.label == cond]
        w = np.array([c.weight * (1.0 if cond is not None else self.class_weights[c.label])
                      for c in comps])
        means = np.stack([c.mean.ravel() for c in comps])
        var = np.array([c.variance for c in comps])
        out = (np.log(w), means, var)
        for arr in out:
            arr.setflags(write=False)
        return out

    def mean_spread(self) -> float:
        vals = np.concatenate([c.mean.ravel() for c in self.components])
        spread = float(vals.max() - vals.min())
        return spread if spread > 0 else 1.0

    def sample(self, rng, cond: Condition = None) -> np.ndarray:
        """Draw one clean sample: a component by one uniform, then its noise."""
        logw, means, var = self.arrays(cond)
        cdf = np.cumsum(np.exp(logw))
        i = min(int(np.searchsorted(cdf, rng.uniforms(1)[0] * cdf[-1], side="right")), len(var) - 1)
        noise = rng.normals(means.shape[1])
        return as_grid(means[i] + math.sqrt(var[i]) * noise, self.shape)


def _diffused_log_terms(x: np.ndarray, alpha_bar_t: float, spec: MixtureSpec, cond: Condition):
    logw, means, var = spec.arrays(cond)
    a = alpha_bar_t
    tot_var = a * var + (1.0 - a)
    if np.any(tot_var <= 0):
        raise ValueError("degenerate diffused component (zero variance at alpha_bar = 1)")
    d = x.size
    diff = x.ravel()[None, :] - math.sqrt(a) * means
    sq = np.einsum("kd,kd->k", diff, diff)
    log_terms = logw - 0.5 * sq / tot_var - 0.5 * d * np.log(2 * np.pi * tot_var)
    return log_terms, diff, tot_var


def _softmax(log_terms: np.ndarray) -> np.ndarray:
    # Plain numpy: scipy's softmax costs more than the mixture itself at this size.
    r = np.exp(log_terms - log_terms.max())
    return r / r.sum()


def gm_responsibilities(x_t, alpha_bar_t, cond, spec) -> np.ndarray:
    log_terms, _, _ = _diffused_log_terms(x_t, alpha_bar_t, spec, cond)
    return _softmax(log_terms)


def gm_log_density(x_t, alpha_bar_t, cond, spec) -> float:
    """Log density of the mixture diffused to ``alpha_bar_t``."""
    log_terms, _, _ = _diffused_log_terms(np.asarray(x_t, dtype=np.float64), alpha_bar_t, spec, cond)
    return float(logsumexp(log_terms))


def gm_epsilon(x_t: np.ndarray, alpha_bar_t: float, cond: Condition, spec: MixtureSpec) -> np.ndarray:
    """Exact minimum-MSE noise prediction for mixture data.

    Each component diffuses to ``N(sqrt(a) mu_i, (a s_i^2 + 1 - a) I)``; the
    prediction is ``sqrt(1 - a) * sum_i r_i (x - sqrt(a) mu_i) / (a s_i^2 + 1 - a)``.
    """
    if x_t.shape != spec.shape:
        raise ValueError(f"x_t shape {x_t.shape} does not match mixture shape {spec.shape}")
    a = float(alpha_bar_t)
    if not 0.0 < a <= 1.0:
        raise ValueError(f"alpha_bar_t must lie in (0, 1], got {a}")
    log_terms, diff, tot_var = _diffused_log_terms(x_t, a, spec, cond)
    r = _softmax(log_terms)
    eps = math.sqrt(1.0 - a) * ((r / tot_var) @ diff)
    return checked(eps.reshape(x_t.shape))


def gm_class_log_posterior(x: np.ndarray, spec: MixtureSpec) -> dict:
    """Log ``P(class | x)`` under the clean mixture, for every class.

    Zero-variance components are treated as point masses, so a point exactly
    on such a mean takes all the mass of the classes that own it. When no
    component has positive density at ``x`` the class weights are returned.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != spec.shape:
        raise ValueError(f"x shape {x.shape} does not match mixture shape {spec.shape}")
    classes = spec.classes
    point_hits = {k: 0.0 for k in classes}
    per_class = {}
    for k in classes:
        logw, means, var = spec.arrays(k)
        diff = x.ravel()[None, :] - means
        sq = np.einsum("kd,kd->k", diff, diff)
        smooth = var > 0
        for w, s, v in zip(np.exp(logw), sq, var):
            if v == 0 and s == 0:
                point_hits[k] += w
        if smooth.any():
            d = x.size
            lt = logw[smooth] - 0.5 * sq[smooth] / var[smooth] - 0.5 * d * np.log(2 * np.pi * var[smooth])
            per_class[k] = math.log(spec.class_weights[k]) + float(logsumexp(lt))
        else:
            per_class[k] = -math.inf
    if any(point_hits.values()):
        total = sum(spec.class_weights[k] * point_hits[k] for k in classes)
        return {k: (math.log(spec.class_weights[k] * point_hits[k] / total)
                    if point_hits[k] else -math.inf) for k in classes}
    vals = np.array([per_class[k] for k in classes])
    if not np.isfinite(vals).any():
        return {k: math.log(spec.class_weights[k]) for k in classes}
    norm = float(logsumexp(vals))
    return {k: per_class[k] - norm for k in classes}


def gm_class_posterior(x: np.ndarray, k: int, spec: MixtureSpec) -> float:
    if k not in spec.class_weights:
        raise ValueError(f"unknown class {k!r}")
    return math.exp(gm_class_log_posterior(x, spec)[k])


@dataclass(frozen=True)
class GuidanceConfig:
    scale: float = 10.0

    def __post_init__(self):
        if not math.isfinite(self.scale) or self.scale < 0:
            raise ValueError("guidance scale must be finite and >= 0")


def cfg_combine(eps_uncond: np.ndarray, eps_cond: np.ndarray, g: GuidanceConfig) -> np.ndarray:
    same_shape(eps_uncond, eps_cond)
    return checked(eps_uncond + g.scale * (eps_cond - eps_uncond))


class GaussianMixtureDenoiser:
    """EpsilonModel backed by :func:`gm_epsilon`."""

    def __init__(self, spec: MixtureSpec):
        self.spec = spec
        self.shape = spec.shape

    def predict(self, x_t, t, cond, alpha_bar_t):
        return gm_epsilon(x_t, alpha_bar_t, cond, self.spec)

    def mask_hint(self, cond):
        return None


# --- mixture file -----------------------------------------------------------
#
#   shape = 4 4                       (optional when means are given inline)
#   class_weight.<k> = <p>            (optional, default uniform)
#   component.<i>.class = <k>
#   component.<i>.weight = <w>
#   component.<i>.variance = <s2>
#   component.<i>.mean = v1 v2 ...    or  component.<i>.mean_image = file.pgm|file.csv
#
# Blank lines and '#' comments are ignored; relative paths resolve against the
# mixture file's directory.

def parse_mixture(text: str, base_dir: Path | str = ".", source: str = "<mixture>") -> MixtureSpec:
    base_dir = Path(base_dir)
    shape = None
    class_weights = {}
    comps: dict[int, dict] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        parts = key.split(".")
        try:
            if key == "shape":
                shape = tuple(int(v) for v in value.split())
            elif parts[0] == "class_weight" and len(parts) == 2:
                class_weights[int(parts[1])] = float(value)
            elif parts[0] == "component" and len(parts) == 3:
                entry = comps.setdefault(int(parts[1]), {})
                field_name = parts[2]
                if field_name == "class":
                    entry["label"] = int(value)
                elif field_name in ("weight", "variance"):
                    entry[field_name] = float(value)
                elif field_name == "mean":
                    entry["mean"] = np.array([float(v) for v in value.split()])
                elif field_name == "mean_image":
                    entry["mean"] = load_grid(base_dir / value)
                else:
                    raise ValueError(f"unknown component field {field_name!r}")
            else:
                raise ValueError(f"unknown key {key!r}")
        except ValueError as exc:
            raise ValueError(f"{source}:{lineno}: {exc}") from exc
    components = []
    for i in sorted(comps):
        entry = comps[i]
        missing = {"label", "weight", "variance", "mean"} - set(entry)
        if missing:
            raise ValueError(f"{source}: component {i} missing {sorted(missing)}")
        mean = entry["mean"]
        if shape is not None:
            mean = np.asarray(mean).reshape(shape)
        components.append(Component(entry["weight"], mean, entry["variance"], entry["label"]))
    return MixtureSpec(tuple(components), class_weights)


def load_mixture(path) -> MixtureSpec:
    path = Path(path)
    return parse_mixture(path.read_text(), path.parent, str(path))


def format_mixture(spec: MixtureSpec) -> str:
    lines = ["shape = " + " ".join(str(s) for s in spec.shape)]
    for k, w in sorted(spec.class_weights.items()):
        lines.append(f"class_weight.{k} = {w!r}")
    for i, c in enumerate(spec.components):
        lines += [
            f"component.{i}.class = {c.label}",
            f"component.{i}.weight = {c.weight!r}",
            f"component.{i}.variance = {c.variance!r}",
            f"component.{i}.mean = " + " ".join(repr(float(v)) for v in c.mean.ravel()),
        ]
    return "\n".join(lines) + "\n"


def two_class_spec(means_a: Sequence[float] | np.ndarray, means_b: Sequence[float] | np.ndarray,
                   variance: float, shape: Sequence[int] | None = None) -> MixtureSpec:
    """One isotropic Gaussian per class, classes 0 and 1, equal priors."""
    a = np.asarray(means_a, dtype=np.float64)
    b = np.asarray(means_b, dtype=np.float64)
    if shape is not None:
        a, b = a.reshape(shape), b.reshape(shape)
    return MixtureSpec((Component(1.0, a, variance, 0), Component(1.0, b, variance, 1)))
