"""Independent reference implementations used to pin expected test values.

Everything here is written as a literal transcription of the definitions,
favoring plain loops over shared library code, so a bug in the package
cannot hide behind an identical bug in the oracle.
"""

import math
from collections import Counter


def entropy_oracle(midis):
    counts = Counter(midis)
    n = len(midis)
    total = 0.0
    for c in counts.values():
        p = c / n
        total += p * math.log(p, 2)
    return -total


def range_oracle(midis):
    return max(midis) - min(midis)


def mean_oracle(midis):
    return sum(midis) / len(midis)


def displacement_oracle(sets):
    """Mean 0/1/2 weight of max pairwise distances between consecutive sets."""
    weights = []
    for current, following in zip(sets, sets[1:]):
        distance = max(abs(p - q) for p in current for q in following)
        if distance < 7:
            weights.append(0)
        elif distance < 12:
            weights.append(1)
        else:
            weights.append(2)
    return sum(weights) / len(weights)


def ioi_oracle(onsets):
    gaps = [b - a for a, b in zip(onsets, onsets[1:])]
    return sum(gaps) / len(gaps)


def lz_phrase_oracle(symbols):
    """Quadratic scanning parser: grow a chunk while it matches a recorded
    phrase, emit it once extending would create a new string; the trailing
    chunk counts as a phrase even if unfinished."""
    symbols = list(symbols)
    phrases = []
    i = 0
    n = len(symbols)
    while i < n:
        j = i + 1
        while j < n and symbols[i:j] in phrases:
            j += 1
        phrases.append(symbols[i:j])
        i = j
    return len(phrases)


def decode_oracle(probs):
    """Largest index whose whole prefix clears the threshold, plus one."""
    candidates = [
        i
        for i in range(1, len(probs) + 1)
        if probs[i - 1] >= 0.5 and all(probs[j] >= 0.5 for j in range(i - 1))
    ]
    return 1 + max(candidates) if candidates else 1


def tau_c_oracle(x, y):
    """Pair-count tau-c: 2m(C - D) / (n^2 (m - 1)) via explicit enumeration."""
    n = len(x)
    m = min(len(set(x)), len(set(y)))
    if m < 2:
        return 0.0
    concordant = discordant = 0
    for i in range(n):
        for j in range(i + 1, n):
            dx = x[i] - x[j]
            dy = y[i] - y[j]
            if dx * dy > 0:
                concordant += 1
            elif dx * dy < 0:
                discordant += 1
    return 2.0 * m * (concordant - discordant) / (n * n * (m - 1))


def average_linkage_oracle(distance, members_a, members_b):
    """Mean of all leaf-to-leaf distances between two clusters."""
    total = 0.0
    for a in members_a:
        for b in members_b:
            total += distance[a][b]
    return total / (len(members_a) * len(members_b))


def finite_difference_gradients(loss_fn, arrays, step=1e-5):
    """Central finite differences of ``loss_fn`` over a dict of float lists.

    ``arrays`` maps names to flat lists; ``loss_fn`` receives the dict and
    returns a scalar.  Returns a dict of per-entry derivative lists.
    """
    grads = {}
    for name, values in arrays.items():
        grad = []
        for index in range(len(values)):
            original = values[index]
            values[index] = original + step
            plus = loss_fn(arrays)
            values[index] = original - step
            minus = loss_fn(arrays)
            values[index] = original
            grad.append((plus - minus) / (2.0 * step))
        grads[name] = grad
    return grads
