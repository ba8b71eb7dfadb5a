"""Independent reference computations the tests compare against.

Nothing here goes through the package's own estimator code: high-precision
arithmetic via mpmath, closed forms, and the 2-state chain worked by hand.
"""

import math

import mpmath
import numpy as np


def agresti_coull_mp(m, n, z, digits=50):
    """(p_tilde, halfwidth) at `digits` decimal digits, rounded to float."""
    with mpmath.workdps(digits):
        m_, n_, z_ = mpmath.mpf(m), mpmath.mpf(n), mpmath.mpf(z)
        n_tilde = n_ + z_**2
        p_tilde = (m_ + z_**2 / 2) / n_tilde
        half = z_ * mpmath.sqrt(p_tilde * (1 - p_tilde) / n_tilde)
        return float(p_tilde), float(half)


def countdown_tail(t, c=4.0, beta=2.0, holding=1.0):
    """P[return time > t] = P[Y > floor(t/holding)], P[Y > n] = min(1, C n^-beta)."""
    q = math.floor(t / holding)
    if q <= 0:
        return 1.0
    return min(1.0, c * float(q) ** -beta)


def countdown_gamma(grid, c=4.0, beta_tail=2.0, holding=1.0, beta=2.0):
    """sup over the grid of P[tau > t] * t^beta for the countdown return time."""
    return max(countdown_tail(t, c, beta_tail, holding) * t**beta for t in grid)


def countdown_mean_level(c=4.0, beta=2.0, n_terms=10**6):
    """E[Y] = sum_{n>=0} P[Y > n], truncated (beta > 1 so the tail is tiny)."""
    total = 0.0
    for n in range(n_terms):
        p = 1.0 if n == 0 else min(1.0, c * float(n) ** -beta)
        total += p
        if p < 1e-15:
            break
    return total


# The worked 2-state chain: componentwise row minimum over the refset {a, b}
# gives eta = 3/4, theta = (1/3, 2/3); the split kernel below is hand
# arithmetic over the order (a0, b0, a1, b1).
TWO_STATE_KERNEL = np.array([[0.5, 0.5], [0.25, 0.75]])
TWO_STATE_ETA = 0.75
TWO_STATE_THETA = np.array([1.0 / 3.0, 2.0 / 3.0])
TWO_STATE_THETA_STAR = np.array([1.0 / 12.0, 1.0 / 6.0, 1.0 / 4.0, 1.0 / 2.0])
TWO_STATE_SPLIT = np.array(
    [
        [1.0 / 4.0, 0.0, 3.0 / 4.0, 0.0],
        [0.0, 1.0 / 4.0, 0.0, 3.0 / 4.0],
        [1.0 / 12.0, 1.0 / 6.0, 1.0 / 4.0, 1.0 / 2.0],
        [1.0 / 12.0, 1.0 / 6.0, 1.0 / 4.0, 1.0 / 2.0],
    ]
)


def tv_by_powers(kernel, mu, nu, n):
    """Half-L1 distance of mu P^n and nu P^n by direct matrix powers."""
    a = np.asarray(mu, dtype=np.float64).copy()
    b = np.asarray(nu, dtype=np.float64).copy()
    kernel = np.asarray(kernel, dtype=np.float64)
    for _ in range(n):
        a = a @ kernel
        b = b @ kernel
    return 0.5 * float(np.abs(a - b).sum())


def moment_sum_mp(q, n_max, digits=30):
    """E[Z^q] summed over n < n_max for P[Z > n] = min(1, n^-2), via mpmath."""
    with mpmath.workdps(digits):
        total = mpmath.mpf(0)
        one = mpmath.mpf(1)
        for n in range(n_max):
            tail = one if n == 0 else min(one, mpmath.mpf(n) ** -2)
            total += ((mpmath.mpf(n) + 1) ** q - mpmath.mpf(n) ** q) * tail
        return float(total)


def random_minorized_chain(rng, n_states):
    """A random row-stochastic kernel with a strictly positive column block.

    Adding a uniform floor before normalizing guarantees every entry is
    positive, so the componentwise row minimum over any refset gives a
    usable minorization pair.
    """
    raw = rng.random((n_states, n_states)) + 0.05
    kernel = raw / raw.sum(axis=1, keepdims=True)
    size = int(rng.integers(1, n_states + 1))
    refset = rng.choice(n_states, size=size, replace=False)
    return kernel, sorted(int(i) for i in refset)
