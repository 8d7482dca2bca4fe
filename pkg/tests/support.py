"""Shared random-input helpers for the test modules."""
from staggerlab.hardness_lab import UniqueDivisorSystem


def random_system(rng, L):
    """Unique-divisor system with private primes and shared cofactors, moduli at most 10^4."""
    primes = rng.sample([2, 3, 5, 7, 11, 13, 17, 19, 23], L)
    shared = [p for p in (29, 31, 37) if rng.random() < 0.5]
    moduli = []
    for p in primes:
        n = p ** rng.randint(1, 3)
        for s in shared:
            if rng.random() < 0.5 and n * s <= 10**4:
                n *= s
        moduli.append(n)
    taus = [rng.randrange(n) for n in moduli]
    return UniqueDivisorSystem(tuple(primes), tuple(moduli), tuple(taus))
