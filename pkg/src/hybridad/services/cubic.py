"""Real roots of low-degree polynomials in closed form."""

from __future__ import annotations

import math

# leading coefficients below this fraction of the largest one are treated as zero
VANISH_RTOL = 1e-14


def cube_root(x: float) -> float:
    """Signed real cube root."""
    return math.copysign(abs(x) ** (1.0 / 3.0), x)


def solve_linear(b: float, c: float) -> tuple[float, ...]:
    """Roots of b x + c = 0 (none when b vanishes)."""
    if b == 0.0:
        return ()
    return (-c / b,)


def solve_quadratic(a: float, b: float, c: float) -> tuple[float, ...]:
    """Real roots of a x^2 + b x + c = 0, cancellation-free form."""
    scale = max(abs(a), abs(b), abs(c))
    if scale == 0.0:
        return ()
    if abs(a) <= VANISH_RTOL * scale:
        return solve_linear(b, c)
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        return ()
    if disc == 0.0:
        return (-b / (2.0 * a),)
    q = -0.5 * (b + math.copysign(math.sqrt(disc), b))
    if q == 0.0:
        return (0.0,)
    return (q / a, c / q)


def solve_depressed_cubic(p: float, q: float) -> tuple[float, ...]:
    """Real roots of t^3 + p t + q = 0."""
    if p == 0.0:
        return (-cube_root(q),)

    disc = p**3 / 27.0 + q**2 / 4.0
    if disc > 0.0:
        s = math.sqrt(disc)
        return (cube_root(-q / 2.0 + s) + cube_root(-q / 2.0 - s),)
    if disc == 0.0:
        r = 3.0 * q / p
        return (r, -r / 2.0)

    # three real roots, trigonometric form
    arg = max(-1.0, min(1.0, (3.0 * q / (2.0 * p)) * math.sqrt(-3.0 / p)))
    phi = math.acos(arg) / 3.0
    t = 2.0 * math.sqrt(-p / 3.0)
    return tuple(t * math.cos(phi - 2.0 * math.pi * k / 3.0) for k in range(3))


def _polish(coeffs: tuple[float, float, float, float], x: float, steps: int = 2) -> float:
    a, b, c, d = coeffs
    for _ in range(steps):
        f = ((a * x + b) * x + c) * x + d
        fp = (3.0 * a * x + 2.0 * b) * x + c
        if fp == 0.0 or not math.isfinite(fp):
            break
        step = f / fp
        if not math.isfinite(step):
            break
        x -= step
    return x


def solve_cubic(a: float, b: float, c: float, d: float) -> tuple[float, ...]:
    """
    Real roots of a x^3 + b x^2 + c x + d = 0.

    Degrades to the quadratic and then the linear case when the leading
    coefficients vanish relative to the largest one. Otherwise the largest root
    from the closed form is polished and deflated out by backward division; the
    other two come from the remaining quadratic, which keeps small roots accurate
    when |a| is tiny next to |b|.
    """
    scale = max(abs(a), abs(b), abs(c), abs(d))
    if scale == 0.0:
        return ()
    if abs(a) <= VANISH_RTOL * scale:
        return solve_quadratic(b, c, d)

    bn, cn, dn = b / a, c / a, d / a
    p = cn - bn * bn / 3.0
    q = dn - bn * cn / 3.0 + 2.0 * bn**3 / 27.0
    coeffs = (a, b, c, d)
    roots = [t - bn / 3.0 for t in solve_depressed_cubic(p, q)]
    k = max(range(len(roots)), key=lambda i: abs(roots[i]))
    r = _polish(coeffs, roots[k], steps=8)
    if r == 0.0 or not math.isfinite(r):
        return tuple(_polish(coeffs, x) for x in roots)

    # (x - r)(a x^2 + q1 x + q0), solved from the constant term upwards
    q0 = -d / r
    q1 = (q0 - c) / r
    rest = solve_quadratic(a, q1, q0)
    if not rest and len(roots) == 3:
        rest = tuple(x for i, x in enumerate(roots) if i != k)
    return (r,) + tuple(_polish(coeffs, x) for x in rest)
