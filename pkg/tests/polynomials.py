"""Random polynomial Lagrangians with independently computed partials."""

import numpy as np

from hypothesis import strategies as st

# variable order: t, q1..qN, v1..vN, S


def random_terms(rng, n_vars, n_terms=6, max_degree=4):
    terms = []
    for _ in range(n_terms):
        deg = rng.integers(0, max_degree + 1)
        powers = np.zeros(n_vars, dtype=int)
        for _ in range(deg):
            powers[rng.integers(n_vars)] += 1
        terms.append((float(rng.uniform(-2, 2)), powers))
    return terms


def evaluate(terms, x):
    """Polynomial value on floats or jets; ``x`` is a list of the variables."""
    total = 0.0
    for c, powers in terms:
        term = c
        for xi, p in zip(x, powers):
            if p:
                term = term * xi**int(p)
        total = total + term
    return total


def partial(terms, x, i, j=None):
    """Exact first (``j is None``) or second partial from the exponents."""
    x = np.asarray(x, dtype=float)
    total = 0.0
    for c, powers in terms:
        coef = c
        p = powers.copy()
        coef *= p[i]
        if coef == 0:
            continue
        p[i] -= 1
        if j is not None:
            coef *= p[j]
            if coef == 0:
                continue
            p[j] -= 1
        total += coef * np.prod(x**p)
    return total


def as_lagrangian(terms, n_dof):
    def L(t, q, v, S):
        return evaluate(terms, [t, *[q[i] for i in range(n_dof)], *[v[i] for i in range(n_dof)], S])

    return L


polynomial_seeds = st.integers(min_value=0, max_value=2**32 - 1)
