#!/usr/bin/env python
"""
Associated Legendre functions by upward recurrence in degree.
"""

import math

import numpy as np

from src.utils.errors import DomainError


def legendre_p(degree: int, order: int, x: float) -> float:
    """
    Associated Legendre function P_degree^order(x) on [-1, 1], Condon-Shortley phase.

    Starts from P_m^m = (-1)^m (2m-1)!! (1-x^2)^{m/2} and climbs in degree with
    (l-m) P_l^m = (2l-1) x P_{l-1}^m - (l+m-1) P_{l-2}^m.

    Args:
        degree: l >= 0
        order: 0 <= m
        x: Argument in [-1, 1]

    Returns:
        float: P_l^m(x), zero when m > l

    Raises:
        DomainError: For negative indices or |x| > 1
    """
    if degree < 0 or order < 0:
        raise DomainError(f"Legendre indices must be non-negative, got ({degree}, {order})")
    if not -1.0 <= x <= 1.0:
        raise DomainError(f"Legendre argument must lie in [-1, 1], got {x}")
    if order > degree:
        return 0.0

    root = math.sqrt(max(0.0, (1.0 - x) * (1.0 + x)))
    p_mm = 1.0
    factor = 1.0
    for _ in range(order):
        p_mm *= -factor * root
        factor += 2.0
    if degree == order:
        return p_mm

    p_prev, p_curr = p_mm, x * (2 * order + 1) * p_mm
    for l in range(order + 2, degree + 1):
        p_prev, p_curr = p_curr, ((2 * l - 1) * x * p_curr - (l + order - 1) * p_prev) / (l - order)
    return p_curr


def legendre_table(max_degree: int, x: float) -> np.ndarray:
    """
    P_l^m(x) for 0 <= m <= l <= max_degree as a lower-triangular array [l, m].

    Each order climbs in degree from P_m^m with the recurrence of legendre_p, so the
    whole table costs O(max_degree^2).

    Raises:
        DomainError: For a negative degree or |x| > 1
    """
    if max_degree < 0:
        raise DomainError(f"Legendre degree must be non-negative, got {max_degree}")
    if not -1.0 <= x <= 1.0:
        raise DomainError(f"Legendre argument must lie in [-1, 1], got {x}")
    table = np.zeros((max_degree + 1, max_degree + 1))
    root = math.sqrt(max(0.0, (1.0 - x) * (1.0 + x)))
    p_mm = 1.0
    for m in range(max_degree + 1):
        if m > 0:
            p_mm *= -(2 * m - 1) * root
        table[m, m] = p_mm
        if m + 1 <= max_degree:
            table[m + 1, m] = x * (2 * m + 1) * p_mm
        for l in range(m + 2, max_degree + 1):
            upper = (2 * l - 1) * x * table[l - 1, m]
            lower = (l + m - 1) * table[l - 2, m]
            table[l, m] = (upper - lower) / (l - m)
    return table
