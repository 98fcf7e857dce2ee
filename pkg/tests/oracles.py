"""Independent reference implementations used as test oracles.

Everything here is deliberately written from scratch against the underlying
math (itertools enumeration, dense quadrature, plain DFT) rather than reusing
package code paths, so each check is a genuine dual route.
"""

import itertools

import numpy as np

from rffdq.freqcore import EncodingStrategy, HamiltonianSpectrum
from rffdq.pqcsim import Circuit, GateSpec, Observable


def oracle_component_set(spectra_values):
    """All differences of all eigenvalue sums, by brute enumeration.

    Exact-float dedup: intended for dyadic eigenvalues where the arithmetic
    is exact.
    """
    if not spectra_values:
        return [0.0]
    sums = [sum(combo) for combo in itertools.product(*spectra_values)]
    return sorted({a - b for a in sums for b in sums})


def oracle_full_lattice(per_dim_sets):
    return [tuple(p) for p in itertools.product(*per_dim_sets)]


def oracle_is_canonical(point, tol=1e-12):
    for v in point:
        if abs(v) > tol:
            return v > 0
    return True


def oracle_half(per_dim_sets):
    rows = [p for p in oracle_full_lattice(per_dim_sets) if oracle_is_canonical(p)]
    return sorted(rows)


def random_dyadic_encoding(rng, d_max=3, L_max=3, spec_max=3, allow_empty=True):
    """Random encoding strategy with eigenvalues on the k/2 grid, |k| <= 4,
    so every downstream sum/difference is exact in binary floating point."""
    d = int(rng.integers(1, d_max + 1))
    dims = []
    for _ in range(d):
        lo = 0 if allow_empty else 1
        L = int(rng.integers(lo, L_max + 1))
        specs = []
        for _ in range(L):
            size = int(rng.integers(1, spec_max + 1))
            vals = sorted(float(k) / 2.0 for k in rng.integers(-4, 5, size=size))
            specs.append(HamiltonianSpectrum(tuple(vals)))
        dims.append(tuple(specs))
    return EncodingStrategy(tuple(dims))


def quadrature_operator_matrix(kernel_fn, d, grid_per_dim):
    """Discretized kernel integral operator under the uniform probability
    measure: T[a, b] = K(x_a, x_b) / N with N uniform grid points."""
    axis = 2.0 * np.pi * np.arange(grid_per_dim) / grid_per_dim
    mesh = np.meshgrid(*([axis] * d), indexing="ij")
    pts = np.stack([g.ravel() for g in mesh], axis=-1)
    K = kernel_fn(pts, pts)
    return K / pts.shape[0], pts


def quadrature_top_singular_value(kernel_fn, d, grid_per_dim):
    T, _ = quadrature_operator_matrix(kernel_fn, d, grid_per_dim)
    if T.shape[0] <= 1500:
        return float(np.max(np.abs(np.linalg.eigvalsh(T))))
    import scipy.sparse.linalg

    val = scipy.sparse.linalg.eigsh(T, k=1, which="LM", return_eigenvectors=False)
    return float(abs(val[0]))


def quadrature_apply_operator(kernel_fn, g_fn, x_points, d, grid_per_dim):
    """(T g)(x) by direct quadrature at the given x points."""
    axis = 2.0 * np.pi * np.arange(grid_per_dim) / grid_per_dim
    mesh = np.meshgrid(*([axis] * d), indexing="ij")
    nodes = np.stack([g.ravel() for g in mesh], axis=-1)
    gv = g_fn(nodes)
    K = kernel_fn(np.atleast_2d(x_points), nodes)
    return (K @ gv) / nodes.shape[0]


def quadrature_l2_norm_sq(f_fn, d, grid_per_dim):
    """Integral of f^2 over [0, 2pi)^d (Lebesgue), by the rectangle rule."""
    axis = 2.0 * np.pi * np.arange(grid_per_dim) / grid_per_dim
    mesh = np.meshgrid(*([axis] * d), indexing="ij")
    nodes = np.stack([g.ravel() for g in mesh], axis=-1)
    vals = f_fn(nodes)
    return float(np.mean(vals**2) * (2.0 * np.pi) ** d)


def dft_coefficients(values_grid):
    """Plain DFT oracle: maps a grid of function values to a dict
    {signed integer index tuple: coefficient}."""
    sizes = values_grid.shape
    coeff = np.fft.fftn(values_grid) / values_grid.size
    out = {}
    for index in np.ndindex(*sizes):
        k = tuple(((index[j] + sizes[j] // 2) % sizes[j]) - sizes[j] // 2 for j in range(len(sizes)))
        out[k] = complex(coeff[index])
    return out


_PAULI_CHARS = "IXYZ"


def random_circuit(rng, q_max=4, d_max=2, L_max=3):
    """Random integer-lattice circuit with entangling and variational gates."""
    q = int(rng.integers(1, q_max + 1))
    d = int(rng.integers(1, d_max + 1))
    gates = []
    n_theta = 0

    def rand_pauli(nontrivial):
        while True:
            word = "".join(_PAULI_CHARS[i] for i in rng.integers(0, 4, size=q))
            if not nontrivial or any(ch != "I" for ch in word):
                return word

    for j in range(1, d + 1):
        L = int(rng.integers(1, L_max + 1))
        for _ in range(L):
            scale = float(rng.choice([0.5, 1.0]))
            gates.append(GateSpec("encode", pauli=rand_pauli(True), scale=scale, dim=j))
            if rng.random() < 0.7:
                gates.append(GateSpec("rot", pauli=rand_pauli(True), theta_index=n_theta))
                n_theta += 1
            if q >= 2 and rng.random() < 0.5:
                c, t = rng.choice(q, size=2, replace=False)
                kind = "cnot" if rng.random() < 0.5 else "cz"
                gates.append(GateSpec(kind, control=int(c), target=int(t)))
    rng.shuffle(gates)
    # keep at least one encode gate per declared dimension after the shuffle
    dims_present = {g.dim for g in gates if g.kind == "encode"}
    for j in range(1, d + 1):
        if j not in dims_present:
            gates.append(GateSpec("encode", pauli=rand_pauli(True), scale=1.0, dim=j))
    n_terms = int(rng.integers(1, 4))
    terms = [(float(rng.uniform(-1.5, 1.5)), rand_pauli(False)) for _ in range(n_terms)]
    theta = rng.uniform(0.0, 2.0 * np.pi, size=n_theta)
    return Circuit(q, gates), Observable(terms), theta


def evaluate_on_grid(circuit, obs, theta, sizes):
    """Grid values of the circuit model (independent driver for the DFT
    oracle)."""
    from rffdq.pqcsim import evaluate_model

    axes = [2.0 * np.pi * np.arange(N) / N for N in sizes]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in mesh], axis=-1)
    vals = np.array([evaluate_model(circuit, obs, theta, p) for p in pts])
    return vals.reshape(sizes)


def mp_sufficient_counts(op_norm, C, b, eps, delta, dps=60):
    """High-precision independent evaluation of the sufficiency constants."""
    import mpmath as mp

    mp.mp.dps = dps
    T = mp.mpf(op_norm)
    Cm, bm, em, dm = map(mp.mpf, (C, b, eps, delta))
    n0 = max(4 * T**2, (528 * mp.log(1112 * mp.sqrt(2) / dm)) ** 2)
    c0 = 36 * (3 + 2 / T)
    c1 = 8 * mp.sqrt(2) * (4 * bm + (5 / mp.sqrt(2)) * Cm + 2 * mp.sqrt(2 * Cm))
    n_min = max(c1**2 * mp.log(1 / dm) ** 4 / em**2, n0)
    M_min = c0 * mp.sqrt(n_min) * mp.log(108 * mp.sqrt(n_min) / dm)
    return {
        "n0": float(n0),
        "c0": float(c0),
        "c1": float(c1),
        "n_min": float(n_min),
        "M_min": float(M_min),
    }


def chi_square_pvalue(counts, probs):
    """Goodness-of-fit p-value with small-expectation bins merged."""
    import scipy.stats

    counts = np.asarray(counts, dtype=float)
    expected = np.asarray(probs, dtype=float) * counts.sum()
    order = np.argsort(expected)
    counts, expected = counts[order], expected[order]
    merged_c, merged_e = [], []
    acc_c = acc_e = 0.0
    for c, e in zip(counts, expected):
        acc_c += c
        acc_e += e
        if acc_e >= 5.0:
            merged_c.append(acc_c)
            merged_e.append(acc_e)
            acc_c = acc_e = 0.0
    if acc_e > 0 and merged_e:
        merged_c[-1] += acc_c
        merged_e[-1] += acc_e
    merged_c = np.asarray(merged_c)
    merged_e = np.asarray(merged_e)
    merged_e *= merged_c.sum() / merged_e.sum()
    if len(merged_c) < 2:
        return 1.0
    stat, p = scipy.stats.chisquare(merged_c, merged_e)
    return float(p)
