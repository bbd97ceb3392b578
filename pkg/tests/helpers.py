"""Shared test utilities: random problem factories and independent oracles.

The oracle functions deliberately avoid the package's own quadrature and
normalization helpers.  They work from plain term lists on their own fine
grids so that agreement with the package is evidence, not circularity.
"""

import math

import numpy as np

from gradflow import Potential, TrigTerm

TWO_PI = 2.0 * math.pi


def random_terms(rng, max_terms=3, max_freq=4, max_amp=3.0):
    """Random trig term list [(amplitude, kind, frequency), ...], distinct modes."""
    n_terms = int(rng.integers(1, max_terms + 1))
    combos = [(kind, k) for kind in ("cos", "sin") for k in range(1, max_freq + 1)]
    picked = rng.choice(len(combos), size=n_terms, replace=False)
    terms = []
    for i in picked:
        kind, k = combos[int(i)]
        amp = float(rng.uniform(0.3, max_amp)) * (1.0 if rng.random() < 0.5 else -1.0)
        terms.append((amp, kind, k))
    return terms


def potential_of(terms, name=None):
    """Package Potential built from a helper term list."""
    return Potential(tuple(TrigTerm(a, kind, k) for a, kind, k in terms), name=name)


def random_potential(rng, max_terms=3, max_freq=4, max_amp=3.0, name=None):
    return potential_of(random_terms(rng, max_terms, max_freq, max_amp), name=name)


def terms_of(pot):
    """Helper term list for a package Potential (for feeding the oracles)."""
    return [(t.amplitude, t.kind, t.frequency) for t in pot.terms]


def trig_eval(terms, x):
    total = np.zeros_like(x)
    for amp, kind, freq in terms:
        f = np.cos if kind == "cos" else np.sin
        total = total + amp * f(freq * x)
    return total


def fine_grid(n):
    h = TWO_PI / n
    return -math.pi + h * np.arange(n), h


def oracle_log_normalizer(terms, n=1_000_000):
    """log integral of exp(-V) by left-endpoint sums on an n-point fine grid."""
    x, h = fine_grid(n)
    expo = -trig_eval(terms, x)
    m = expo.max()
    return float(m + math.log(np.exp(expo - m).sum() * h))


def oracle_log_density(terms, n):
    x, h = fine_grid(n)
    logp = -trig_eval(terms, x)
    m = logp.max()
    logz = m + math.log(np.exp(logp - m).sum() * h)
    return x, logp - logz, h


def oracle_kl(terms_p, terms_q, n=1_000_000):
    _, lp, h = oracle_log_density(terms_p, n)
    _, lq, _ = oracle_log_density(terms_q, n)
    return float(np.sum(np.exp(lp) * (lp - lq)) * h)


def oracle_chi2(terms_p, terms_q, n=1_000_000):
    _, lp, h = oracle_log_density(terms_p, n)
    _, lq, _ = oracle_log_density(terms_q, n)
    return float(np.sum(np.exp(2.0 * lp - lq)) * h - 1.0)


def oracle_renyi(q, terms_p, terms_q, n=1_000_000):
    _, lp, h = oracle_log_density(terms_p, n)
    _, lq, _ = oracle_log_density(terms_q, n)
    expo = q * lp - (q - 1.0) * lq
    m = expo.max()
    return float(m + math.log(np.exp(expo - m).sum() * h)) / (q - 1.0)
