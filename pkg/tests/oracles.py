"""Slow reference implementations the test suite trusts.

Everything here works by brute force with plain Python arithmetic:
tag paths are enumerated with itertools.product and probabilities come
from exp'd path scores, gradients from central differences. None of the
lattice code under test is reused, so a disagreement means the package
is wrong (or the tolerance is).
"""

import itertools
import math

import numpy as np


def enumerate_lattice(emissions, transitions):
    """All-path quantities for a (T, S) emission table by enumeration.

    ``transitions`` is (S+2, S+2) with START = S and STOP = S+1, exactly
    the layout the package uses. Returns a dict with the log partition,
    the best path (first in product order among ties, i.e. smallest
    lexicographically), its score, unary marginals (T, S) and pairwise
    marginals (T-1, S, S).
    """
    emissions = np.asarray(emissions, dtype=float)
    transitions = np.asarray(transitions, dtype=float)
    n, n_tags = emissions.shape
    start, stop = n_tags, n_tags + 1
    paths = list(itertools.product(range(n_tags), repeat=n))
    scores = []
    for path in paths:
        score = transitions[start, path[0]]
        for t in range(n):
            score += emissions[t, path[t]]
            if t:
                score += transitions[path[t - 1], path[t]]
        score += transitions[path[-1], stop]
        scores.append(score)
    finite = [s for s in scores if s > -math.inf]
    if not finite:
        raise ZeroDivisionError("no admissible path")
    peak = max(finite)
    weights = [math.exp(s - peak) if s > -math.inf else 0.0 for s in scores]
    total = math.fsum(weights)
    unary = np.zeros((n, n_tags))
    pairwise = np.zeros((max(n - 1, 0), n_tags, n_tags))
    for path, weight in zip(paths, weights):
        p = weight / total
        for t in range(n):
            unary[t, path[t]] += p
            if t:
                pairwise[t - 1, path[t - 1], path[t]] += p
    best = int(np.argmax(scores))
    return {
        "log_z": peak + math.log(total),
        "best_path": list(paths[best]),
        "best_score": scores[best],
        "unary": unary,
        "pairwise": pairwise,
    }


def path_log_prob(emissions, transitions, path):
    """log P(path) by enumeration; -inf for inadmissible paths."""
    ref = enumerate_lattice(emissions, transitions)
    emissions = np.asarray(emissions, dtype=float)
    transitions = np.asarray(transitions, dtype=float)
    n, n_tags = emissions.shape
    score = transitions[n_tags, path[0]]
    for t in range(n):
        score += emissions[t, path[t]]
        if t:
            score += transitions[path[t - 1], path[t]]
    score += transitions[path[-1], n_tags + 1]
    if score == -math.inf:
        return -math.inf
    return score - ref["log_z"]


def word_emissions(model, seq):
    """(n_words, S) emission table summed feature row by feature row."""
    rows = []
    for indices in model.encoder.encode(seq.words):
        row = np.zeros(model.n_tags)
        for j in indices:
            row = row + model.emission_weights[j]
        rows.append(row)
    return np.asarray(rows)


def finite_difference(f, x, h=1e-5):
    """Central finite-difference gradient of a scalar function.

    ``f`` is called with the (mutated in place, then restored) array
    itself, so it must read ``x`` fresh on every call.
    """
    x = np.asarray(x, dtype=float)
    flat = x.ravel()
    grad = np.zeros_like(flat)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        hi = f(x)
        flat[i] = orig - h
        lo = f(x)
        flat[i] = orig
        grad[i] = (hi - lo) / (2.0 * h)
    return grad.reshape(x.shape)


def max_relative_error(analytic, numeric):
    """max |a - n| / max(1, |a|, |n|), the usual gradient-check metric."""
    analytic = np.asarray(analytic, dtype=float)
    numeric = np.asarray(numeric, dtype=float)
    denom = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(numeric)))
    return float(np.max(np.abs(analytic - numeric) / denom))
