"""Non-gaussian disturbance distributions for linear acyclic causal models.

Every distribution here has zero mean and a known positive variance. Besides
the basic parametric families, a "sum" node represents a weighted sum of
independent disturbances (the convolutions produced when latent variables are
absorbed or merged), keeping simulation exact. An "unspecified" family stands
in for disturbances whose shape is unknown but whose variance is (models
reconstructed from a mixing matrix).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

FAMILIES = ("laplace", "uniform", "gengauss", "gaussmix", "sum", "unspecified")

# Cumulants of orders 2..4; unknown higher cumulants are None.
Cumulants = tuple[float, "float | None", "float | None"]


@dataclass(frozen=True)
class DisturbanceDist:
    """A zero-mean disturbance distribution.

    params by family:
      laplace:     (scale b,)                  variance 2 b^2
      uniform:     (half_width a,)             U(-a, a), variance a^2 / 3
      gengauss:    (shape beta, scale alpha)   variance alpha^2 G(3/b)/G(1/b)
      gaussmix:    (w1, m1, v1, w2, m2, v2, ...)  zero-mean mixture
      unspecified: (variance,)                 shape unknown
      sum:         () with `components` = ((weight, dist), ...)
    """

    family: str
    params: tuple[float, ...] = ()
    components: tuple[tuple[float, "DisturbanceDist"], ...] = field(default=())

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown disturbance family {self.family!r}")
        if self.family == "sum":
            if len(self.components) < 2:
                raise ValueError("sum disturbance needs at least two components")
            if any(w == 0.0 for w, _ in self.components):
                raise ValueError("sum disturbance has a zero-weight component")
        elif self.family == "gaussmix":
            w, m, v = self._mixture_arrays()
            if abs(w.sum() - 1.0) > 1e-9:
                raise ValueError("mixture weights must sum to 1")
            if np.any(w <= 0) or np.any(v <= 0):
                raise ValueError("mixture weights and variances must be positive")
            if abs(float(w @ m)) > 1e-9:
                raise ValueError("mixture must have zero mean")
        if self.family != "sum" and self.variance <= 0:
            raise ValueError("disturbance variance must be positive")

    def _mixture_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        p = np.asarray(self.params, dtype=float).reshape(-1, 3)
        return p[:, 0], p[:, 1], p[:, 2]

    @property
    def variance(self) -> float:
        return self.cumulants()[0]

    def cumulants(self) -> Cumulants:
        """Cumulants (k2, k3, k4); k3/k4 are None when the shape is unknown."""
        if self.family == "laplace":
            b = self.params[0]
            k2 = 2.0 * b * b
            return (k2, 0.0, 3.0 * k2 * k2)
        if self.family == "uniform":
            a = self.params[0]
            k2 = a * a / 3.0
            return (k2, 0.0, -1.2 * k2 * k2)
        if self.family == "gengauss":
            beta, alpha = self.params
            k2 = alpha**2 * math.exp(math.lgamma(3.0 / beta) - math.lgamma(1.0 / beta))
            m4 = alpha**4 * math.exp(math.lgamma(5.0 / beta) - math.lgamma(1.0 / beta))
            return (k2, 0.0, m4 - 3.0 * k2 * k2)
        if self.family == "gaussmix":
            w, m, v = self._mixture_arrays()
            k2 = float(w @ (m * m + v))
            k3 = float(w @ (m**3 + 3 * m * v))
            m4 = float(w @ (m**4 + 6 * m * m * v + 3 * v * v))
            return (k2, k3, m4 - 3.0 * k2 * k2)
        if self.family == "unspecified":
            return (self.params[0], None, None)
        # sum: cumulants are additive, scaled by weight^order
        k2 = k3 = k4 = 0.0
        for w, d in self.components:
            c2, c3, c4 = d.cumulants()
            k2 += w * w * c2
            k3 = None if (k3 is None or c3 is None) else k3 + w**3 * c3
            k4 = None if (k4 is None or c4 is None) else k4 + w**4 * c4
        return (k2, k3, k4)

    def standardized_cumulants(self) -> tuple["float | None", "float | None"]:
        """Scale-free skewness/kurtosis fingerprint (k3/k2^1.5, k4/k2^2)."""
        k2, k3, k4 = self.cumulants()
        return (
            None if k3 is None else k3 / k2**1.5,
            None if k4 is None else k4 / k2**2,
        )

    @property
    def samplable(self) -> bool:
        if self.family == "unspecified":
            return False
        if self.family == "sum":
            return all(d.samplable for _, d in self.components)
        return True

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.family == "laplace":
            return rng.laplace(0.0, self.params[0], size=n)
        if self.family == "uniform":
            a = self.params[0]
            return rng.uniform(-a, a, size=n)
        if self.family == "gengauss":
            beta, alpha = self.params
            g = rng.gamma(1.0 / beta, 1.0, size=n)
            sign = rng.integers(0, 2, size=n) * 2 - 1
            return sign * alpha * g ** (1.0 / beta)
        if self.family == "gaussmix":
            w, m, v = self._mixture_arrays()
            idx = rng.choice(len(w), size=n, p=w)
            return rng.normal(m[idx], np.sqrt(v[idx]))
        if self.family == "sum":
            out = np.zeros(n)
            for w, d in self.components:
                out += w * d.sample(rng, n)
            return out
        raise ValueError(f"cannot sample from {self.family!r} disturbance")

    def scaled(self, c: float) -> "DisturbanceDist":
        """The distribution of c * e for this e (c nonzero)."""
        if c == 0.0:
            raise ValueError("scale factor must be nonzero")
        if self.family == "laplace":
            return DisturbanceDist("laplace", (abs(c) * self.params[0],))
        if self.family == "uniform":
            return DisturbanceDist("uniform", (abs(c) * self.params[0],))
        if self.family == "gengauss":
            beta, alpha = self.params
            return DisturbanceDist("gengauss", (beta, abs(c) * alpha))
        if self.family == "gaussmix":
            w, m, v = self._mixture_arrays()
            params = tuple(
                float(x) for trip in zip(w, c * m, c * c * v) for x in trip
            )
            return DisturbanceDist("gaussmix", params)
        if self.family == "unspecified":
            return DisturbanceDist("unspecified", (c * c * self.params[0],))
        return DisturbanceDist(
            "sum", (), tuple((c * w, d) for w, d in self.components)
        )

    def negated(self) -> "DisturbanceDist":
        return self.scaled(-1.0)

    @property
    def gaussian(self) -> bool:
        """True when the density is exactly gaussian (forbidden for generators)."""
        if self.family == "gaussmix":
            w, m, v = self._mixture_arrays()
            return bool(np.all(m == 0.0) and np.all(v == v[0]))
        if self.family == "gengauss":
            return self.params[0] == 2.0
        if self.family == "sum":
            return all(d.gaussian for _, d in self.components)
        return False

    def to_json_obj(self) -> dict:
        obj: dict = {"family": self.family, "params": list(self.params)}
        if self.family == "sum":
            obj["components"] = [
                {"weight": w, **d.to_json_obj()} for w, d in self.components
            ]
        return obj

    @classmethod
    def from_json_obj(cls, obj: dict) -> "DisturbanceDist":
        family = obj["family"]
        if family == "sum":
            comps = tuple(
                (float(c["weight"]), cls.from_json_obj(c))
                for c in obj["components"]
            )
            return cls("sum", (), comps)
        return cls(family, tuple(float(p) for p in obj.get("params", ())))


def laplace(variance: float = 1.0) -> DisturbanceDist:
    return DisturbanceDist("laplace", (math.sqrt(variance / 2.0),))


def uniform(variance: float = 1.0) -> DisturbanceDist:
    return DisturbanceDist("uniform", (math.sqrt(3.0 * variance),))


def gengauss(shape: float, variance: float = 1.0) -> DisturbanceDist:
    """Generalized gaussian with the given shape (shape 2 would be gaussian)."""
    if shape == 2.0:
        raise ValueError("shape 2 is the gaussian; disturbances must be non-gaussian")
    unit_var = math.exp(math.lgamma(3.0 / shape) - math.lgamma(1.0 / shape))
    return DisturbanceDist("gengauss", (shape, math.sqrt(variance / unit_var)))


def gaussmix(weights, means, variances) -> DisturbanceDist:
    params = tuple(
        float(x)
        for trip in zip(weights, means, variances)
        for x in trip
    )
    return DisturbanceDist("gaussmix", params)


def symmetric_binary_mix(loc: float, variance: float = 1.0) -> DisturbanceDist:
    """Two equal-weight gaussian bumps at +/-loc*sd; strongly non-gaussian."""
    if not 0.0 < loc < 1.0:
        raise ValueError("loc must be in (0, 1) as a fraction of the sd")
    sd = math.sqrt(variance)
    m = loc * sd
    v = variance - m * m
    return gaussmix((0.5, 0.5), (-m, m), (v, v))


def unspecified(variance: float) -> DisturbanceDist:
    return DisturbanceDist("unspecified", (float(variance),))


def weighted_sum(terms: list[tuple[float, DisturbanceDist]]) -> DisturbanceDist:
    """Distribution of sum_i w_i e_i for independent e_i; flattens nested sums."""
    flat: list[tuple[float, DisturbanceDist]] = []
    for w, d in terms:
        if d.family == "sum":
            flat.extend((w * cw, cd) for cw, cd in d.components)
        else:
            flat.append((float(w), d))
    if len(flat) == 1:
        return flat[0][1].scaled(flat[0][0])
    return DisturbanceDist("sum", (), tuple(flat))


def dists_close(a: DisturbanceDist, b: DisturbanceDist, tol: float = 1e-9) -> bool:
    """Whether two unit-scale-comparable disturbances look identical.

    Compares standardized cumulants up to order 4; an unknown cumulant on
    either side is treated as compatible (the shape is simply undetermined).
    """
    for ca, cb in zip(a.standardized_cumulants(), b.standardized_cumulants()):
        if ca is None or cb is None:
            continue
        if abs(ca - cb) > tol * max(1.0, abs(ca), abs(cb)):
            return False
    return True
