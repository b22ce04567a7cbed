import math

MERSENNE_61 = 2**61 - 1

# deterministic for n < 3.3e24; beyond that a strong probable prime
_WITNESSES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41)


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    for q in _WITNESSES:
        if n % q == 0:
            return n == q
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _WITNESSES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def next_prime_above(bound: int) -> int:
    candidate = bound + 1
    if candidate <= 2:
        return 2
    if candidate % 2 == 0:
        candidate += 1
    while not is_prime(candidate):
        candidate += 2
    return candidate


def choose_modulus(n: int, delta: float, universe: int) -> int:
    """Prime r > max(n/delta, U - 1) for the polynomial multiset check."""
    bound = max(math.ceil(n / delta), universe - 1)
    if bound < MERSENNE_61:
        return MERSENNE_61
    return next_prime_above(bound)
