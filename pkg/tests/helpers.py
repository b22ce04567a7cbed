import math


def deal(items, p):
    """Round-robin split into p slices."""
    items = list(items)
    return [items[i::p] for i in range(p)]


def chunk(items, p):
    """Contiguous split into p slices of near-equal size."""
    items = list(items)
    n = len(items)
    return [items[i * n // p : (i + 1) * n // p] for i in range(p)]


def within_sigma(hits, trials, prob, sigmas=4):
    """Binomial band around trials*prob."""
    sd = math.sqrt(trials * prob * (1 - prob))
    return abs(hits - trials * prob) <= sigmas * sd + 1
