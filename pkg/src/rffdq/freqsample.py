"""Frequency distributions over the canonical half-lattice and samplers.

Three representations are supported:

* explicit sparse maps (poly-size support),
* product-induced distributions (independent per-dimension draws over the
  mirror-symmetric per-dimension sets, folded onto the canonical half), and
* tensor-train (MPS) induced distributions with nonnegative cores, sampled
  by left-to-right conditional marginalization against cached right
  environments.

Folding rule: p(omega) = ptilde(omega) for omega = 0, and
p(omega) = ptilde(omega) + ptilde(-omega) otherwise.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConfigError, DegenerateDistributionError
from .freqcore import FrequencySet, canonical_fold

PROB_TOL = 1e-12


@dataclass(frozen=True)
class SeededRng:
    """Counter-based PRNG handle: (algorithm, seed, stream) pins the draws.

    Streams let parallel trials own independent, reproducible generators
    derived from one master seed.
    """

    seed: int
    stream: int = 0
    algorithm: str = "philox"

    def generator(self) -> np.random.Generator:
        if self.algorithm != "philox":
            raise ConfigError(f"unknown rng algorithm '{self.algorithm}'")
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream,))
        return np.random.Generator(np.random.Philox(ss))

    def stream_for(self, index: int) -> "SeededRng":
        """Derived stream for trial/cell ``index`` under the same master seed."""
        return SeededRng(self.seed, self.stream * 1_000_003 + index + 1, self.algorithm)


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, SeededRng):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError("rng must be a SeededRng or numpy Generator")


class PMax(NamedTuple):
    value: float
    is_exact: bool


class FrequencyDistribution:
    """Common interface for frequency distributions over the canonical half."""

    kind: str = ""
    # set for the two labeled uniform variants produced by uniform_distribution
    uniform_variant: str | None = None

    def __init__(self, fs: FrequencySet):
        self.fs = fs

    def pmf(self, omega) -> float:
        raise NotImplementedError

    def sample(self, rng, M: int) -> np.ndarray:
        raise NotImplementedError

    def pmf_vector(self) -> np.ndarray:
        """Probabilities over the materialized canonical half, in lattice order."""
        self.fs.require_materialized()
        return np.array([self.pmf(row) for row in self.fs.half])

    def p_max(self, enumerate_cap: int = 200_000) -> PMax | None:
        """Maximum probability; exact when the half can be enumerated."""
        if self.fs.materialized and self.fs.size <= enumerate_cap:
            return PMax(float(np.max(self.pmf_vector())), True)
        return None

    def _key(self, omega) -> tuple:
        w = np.asarray(omega, dtype=float)
        folded, sign = canonical_fold(w)
        if sign < 0:
            raise ValueError(f"frequency {tuple(w)} is not canonical")
        return self.fs.snap(folded)

    def _component_index(self, j: int, value: float) -> int:
        freqs = self.fs.per_dimension_freqs[j]
        pos = int(np.searchsorted(freqs, value))
        for cand in (pos - 1, pos):
            if 0 <= cand < freqs.size and abs(freqs[cand] - value) <= 1e-9:
                return cand
        raise ValueError(f"frequency component {value} not in lattice dimension {j+1}")


class ExplicitDistribution(FrequencyDistribution):
    """Sparse map from canonical frequencies to probabilities."""

    kind = "explicit"

    def __init__(self, fs: FrequencySet, support, probs):
        super().__init__(fs)
        support = np.atleast_2d(np.asarray(support, dtype=float))
        probs = np.asarray(probs, dtype=float)
        if support.shape[0] != probs.size:
            raise ConfigError("support and probs must have matching lengths")
        if np.any(probs < 0):
            raise ConfigError("probabilities must be nonnegative")
        total = float(probs.sum())
        if abs(total - 1.0) > PROB_TOL * max(1, probs.size):
            raise ConfigError(f"probabilities sum to {total}, expected 1")
        keys = []
        for row in support:
            folded, sign = canonical_fold(row)
            if sign < 0:
                raise ConfigError(f"support point {tuple(row)} is not canonical")
            keys.append(self.fs.snap(folded))
        if len(set(keys)) != len(keys):
            raise ConfigError("duplicate support points")
        self.support = np.array(keys, dtype=float)
        self.probs = probs
        self._table = {k: float(p) for k, p in zip(keys, probs)}

    def pmf(self, omega) -> float:
        return self._table.get(self._key(omega), 0.0)

    def sample(self, rng, M: int) -> np.ndarray:
        if M < 1:
            raise ValueError("M must be >= 1")
        gen = as_generator(rng)
        idx = gen.choice(self.support.shape[0], size=M, p=self.probs)
        return self.support[idx]

    def p_max(self, enumerate_cap: int = 200_000) -> PMax:
        return PMax(float(np.max(self.probs)), True)


class ProductDistribution(FrequencyDistribution):
    """Fold of an independent per-dimension distribution over the mirror
    lattice."""

    kind = "product"

    def __init__(self, fs: FrequencySet, per_dim):
        super().__init__(fs)
        if len(per_dim) != fs.d:
            raise ConfigError("per_dim must have one distribution per dimension")
        self.per_dim = []
        for j, pj in enumerate(per_dim):
            pj = np.asarray(pj, dtype=float)
            if pj.size != fs.per_dimension_freqs[j].size:
                raise ConfigError(
                    f"dimension {j+1}: {pj.size} probabilities for "
                    f"{fs.per_dimension_freqs[j].size} frequencies"
                )
            if np.any(pj < 0):
                raise ConfigError("probabilities must be nonnegative")
            if abs(float(pj.sum()) - 1.0) > PROB_TOL * max(1, pj.size):
                raise ConfigError(f"dimension {j+1} probabilities do not sum to 1")
            self.per_dim.append(pj)

    def tilde_pmf(self, omega) -> float:
        w = np.asarray(omega, dtype=float)
        out = 1.0
        for j in range(self.fs.d):
            out *= self.per_dim[j][self._component_index(j, w[j])]
        return out

    def pmf(self, omega) -> float:
        key = self._key(omega)
        w = np.asarray(key, dtype=float)
        if np.all(w == 0.0):
            return self.tilde_pmf(w)
        return self.tilde_pmf(w) + self.tilde_pmf(-w)

    def sample(self, rng, M: int) -> np.ndarray:
        if M < 1:
            raise ValueError("M must be >= 1")
        gen = as_generator(rng)
        cols = []
        for j in range(self.fs.d):
            idx = gen.choice(self.per_dim[j].size, size=M, p=self.per_dim[j])
            cols.append(self.fs.per_dimension_freqs[j][idx])
        raw = np.stack(cols, axis=1)
        return _fold_rows(raw)

    def tilde_max(self) -> float:
        out = 1.0
        for pj in self.per_dim:
            out *= float(np.max(pj))
        return out

    def p_max(self, enumerate_cap: int = 200_000) -> PMax:
        if self.fs.materialized and self.fs.size <= enumerate_cap:
            return PMax(float(np.max(self.pmf_vector())), True)
        return PMax(2.0 * self.tilde_max(), False)


class MpsDistribution(FrequencyDistribution):
    """Tensor-train pmf over the mirror lattice (cores hold probabilities,
    not amplitudes), folded onto the canonical half."""

    kind = "mps"

    def __init__(self, fs: FrequencySet, cores):
        super().__init__(fs)
        if len(cores) != fs.d:
            raise ConfigError("need one core per dimension")
        self.cores = []
        bond = 1
        for j, core in enumerate(cores):
            core = np.asarray(core, dtype=float)
            if core.ndim != 3:
                raise ConfigError(f"core {j+1} must be a 3-d array")
            if core.shape[0] != bond:
                raise ConfigError(f"core {j+1} left bond {core.shape[0]} != {bond}")
            if core.shape[1] != fs.per_dimension_freqs[j].size:
                raise ConfigError(
                    f"core {j+1} physical dimension {core.shape[1]} does not match "
                    f"lattice dimension {fs.per_dimension_freqs[j].size}"
                )
            if np.any(core < 0):
                raise ConfigError("core entries must be nonnegative")
            bond = core.shape[2]
            self.cores.append(core)
        if bond != 1:
            raise ConfigError("last core must close the tensor train (right bond 1)")
        # right environments: R[j] sums out dimensions j..d-1
        self.right = [None] * (fs.d + 1)
        self.right[fs.d] = np.ones(1)
        for j in range(fs.d - 1, -1, -1):
            self.right[j] = self.cores[j].sum(axis=1) @ self.right[j + 1]
        self.total_mass = float(self.right[0][0])
        if not np.isfinite(self.total_mass) or self.total_mass <= 0:
            raise DegenerateDistributionError(
                f"tensor train has total mass {self.total_mass}"
            )

    def _indices(self, values: np.ndarray) -> list[int]:
        return [self._component_index(j, v) for j, v in enumerate(values)]

    def tilde_pmf(self, omega) -> float:
        idx = self._indices(np.asarray(omega, dtype=float))
        vec = np.ones(1)
        for j, k in enumerate(idx):
            vec = vec @ self.cores[j][:, k, :]
        return float(vec[0]) / self.total_mass

    def pmf(self, omega) -> float:
        key = self._key(omega)
        w = np.asarray(key, dtype=float)
        if np.all(w == 0.0):
            return self.tilde_pmf(w)
        return self.tilde_pmf(w) + self.tilde_pmf(-w)

    def marginal(self, j: int, prefix) -> np.ndarray:
        """Conditional pmf of dimension ``j`` (0-based) given the values of
        dimensions 0..j-1.  Raises if the prefix has exactly zero mass."""
        prefix = np.asarray(prefix, dtype=float)
        if prefix.shape != (j,):
            raise ValueError(f"prefix must assign dimensions 1..{j}")
        left = np.ones(1)
        for i, v in enumerate(prefix):
            left = left @ self.cores[i][:, self._component_index(i, v), :]
        weights = np.einsum("a,akb,b->k", left, self.cores[j], self.right[j + 1])
        total = float(weights.sum())
        if total <= 0:
            raise DegenerateDistributionError(
                f"conditional mass at dimension {j+1} is zero for prefix {tuple(prefix)}"
            )
        return weights / total

    def sample(self, rng, M: int) -> np.ndarray:
        if M < 1:
            raise ValueError("M must be >= 1")
        gen = as_generator(rng)
        d = self.fs.d
        left = np.ones((M, 1))
        cols = []
        for j in range(d):
            weights = np.einsum("ma,akb,b->mk", left, self.cores[j], self.right[j + 1])
            totals = weights.sum(axis=1)
            if np.any(totals <= 0):
                raise DegenerateDistributionError(
                    f"conditional mass at dimension {j+1} is zero during sampling"
                )
            probs = weights / totals[:, None]
            u = gen.random(M)
            cum = np.cumsum(probs, axis=1)
            cum[:, -1] = 1.0  # guard the inverse-CDF against summation shortfall
            ks = (cum > u[:, None]).argmax(axis=1)
            cols.append(self.fs.per_dimension_freqs[j][ks])
            left = np.einsum("ma,amb->mb", left, self.cores[j][:, ks, :])
        raw = np.stack(cols, axis=1)
        return _fold_rows(raw)


def _fold_rows(raw: np.ndarray) -> np.ndarray:
    """Fold each row onto the canonical half (vectorized first-nonzero rule)."""
    mask = np.abs(raw) > 1e-12
    has_nz = mask.any(axis=1)
    first = np.argmax(mask, axis=1)
    vals = raw[np.arange(raw.shape[0]), first]
    flip = has_nz & (vals < 0)
    out = raw.copy()
    out[flip] *= -1.0
    return out


def pmf(dist: FrequencyDistribution, omega) -> float:
    """Probability of a canonical frequency under any distribution variant."""
    return dist.pmf(omega)


def sample_frequencies(dist: FrequencyDistribution, rng, M: int) -> np.ndarray:
    """Draw ``M`` iid canonical frequencies; deterministic given the rng state."""
    return dist.sample(rng, M)


def mps_marginal(dist: MpsDistribution, j: int, prefix) -> np.ndarray:
    """Conditional single-dimension pmf used by the tensor-train sampler."""
    if not isinstance(dist, MpsDistribution):
        raise TypeError("mps_marginal needs an MPS-induced distribution")
    return dist.marginal(j, prefix)


def uniform_distribution(fs: FrequencySet, lazy: bool = False) -> FrequencyDistribution:
    """Uniform frequency distribution, in one of two labeled flavors.

    The explicit variant puts exactly 1/|Omega| on every canonical frequency
    (requires materialization).  The lazy variant is the fold of uniform
    per-dimension distributions: it puts 2/|full lattice| on every nonzero
    canonical frequency and 1/|full lattice| on zero, and never materializes
    the half.
    """
    if lazy:
        dist = ProductDistribution(
            fs,
            [np.full(f.size, 1.0 / f.size) for f in fs.per_dimension_freqs],
        )
        dist.uniform_variant = "product"
        return dist
    fs.require_materialized()
    m = fs.size
    dist = ExplicitDistribution(fs, fs.half, np.full(m, 1.0 / m))
    dist.uniform_variant = "explicit"
    return dist


def distribution_from_json(doc: dict, fs: FrequencySet) -> FrequencyDistribution:
    """Parse a distribution config document against a frequency set."""
    try:
        kind = doc["kind"]
    except (KeyError, TypeError) as exc:
        raise ConfigError("distribution document must have a 'kind'") from exc
    if kind == "explicit":
        return ExplicitDistribution(fs, doc["support"], doc["probs"])
    if kind == "product":
        return ProductDistribution(fs, doc["per_dim"])
    if kind == "mps":
        cores = [np.asarray(c, dtype=float) for c in doc["cores"]]
        if "dims" in doc:
            declared = [int(v) for v in doc["dims"]]
            actual = [c.shape[1] if c.ndim == 3 else -1 for c in cores]
            if declared != actual:
                raise ConfigError(
                    f"declared physical dims {declared} do not match cores {actual}"
                )
        return MpsDistribution(fs, cores)
    if kind == "uniform":
        variant = doc.get("variant", "explicit")
        if variant not in ("explicit", "product"):
            raise ConfigError(f"unknown uniform variant '{variant}'")
        return uniform_distribution(fs, lazy=(variant == "product"))
    raise ConfigError(f"unknown distribution kind '{kind}'")


def load_distribution(path: str, fs: FrequencySet) -> FrequencyDistribution:
    with open(path, "r", encoding="utf-8") as fh:
        return distribution_from_json(json.load(fh), fs)


def explicit_from_weights(fs: FrequencySet, weights) -> ExplicitDistribution:
    """Exact sampling distribution of a weight vector: p_i = w_i^2/||w||^2."""
    from .kernelmap import WeightVector, distribution_of

    w = weights if isinstance(weights, WeightVector) else WeightVector(weights)
    fs.require_materialized()
    if len(w) != fs.size:
        raise ValueError("weight vector length does not match the canonical half")
    p = distribution_of(w)
    keep = p > 0
    probs = p[keep] / p[keep].sum()
    return ExplicitDistribution(fs, fs.half[keep], probs)
