"""Regenerates derived.json: reference values computed with mpmath at 30 digits.

Run from this directory:  python3 oracle.py > derived.json
"""

import json

import mpmath as mp

mp.mp.dps = 30
TAU = 2 * mp.pi


def sig(x):
    return float(mp.nstr(x, 12, strip_zeros=False, min_fixed=-mp.inf, max_fixed=mp.inf))


# sinh field ---------------------------------------------------------------

def sinh_f(t):
    return -mp.atanh(1 / mp.sqrt(1 + t * t)) + mp.sqrt(1 + t * t)


def sinh_t(x, y, f=sinh_f):
    rhs = y - mp.atanh(1 / mp.cosh(x))
    sign = 1 if x > 0 else -1
    # bisection on ln|t|
    lo, hi = mp.mpf(-60), mp.mpf(60)
    for _ in range(400):
        mid = (lo + hi) / 2
        if f(sign * mp.e ** mid) < rhs:
            lo = mid
        else:
            hi = mid
    return sign * mp.e ** ((lo + hi) / 2)


def sinh_sigma(x, y, f=sinh_f):
    x, y = mp.mpf(x), mp.mpf(y)
    return mp.sinh(x) / sinh_t(x, y, f)


def log_atan(t):
    return mp.log(abs(t)) + mp.atan(t)


# counter-example ----------------------------------------------------------

def cex_F(x):
    x = mp.mpf(x)
    return x**2 / 8 - x / 12 - mp.log(1 - x) / 24 - mp.log(x) / 24 + 1 / (24 * x)


def cex_F_quad(x):
    # independent check: F(x) − F(1/2) = ∫ f/f'
    f = lambda s: (8 * s**3 - 6 * s**4 - 1) / (24 * s**2 * (1 - s))
    return cex_F(mp.mpf(1) / 2) + mp.quad(f, [mp.mpf(1) / 2, x])


def cex_local_w(x, y, z=0):
    x, y, z = mp.mpf(x), mp.mpf(y), mp.mpf(z)
    s = y + cex_F(x) - z * z / 2
    return mp.log(24 * x**2 * (1 - x)) + mp.log(1 + s * s)


# vanishing product field: j = (1, f, f), f = sin 2πx -------------------------

def remf_sigma(x, y, z):
    """σ = f(x)/f(t), F(t) = y + z + F(x), F = ∫_m 1/f by quadrature."""
    x, y, z = mp.mpf(x), mp.mpf(y), mp.mpf(z)
    f = lambda s: mp.sin(TAU * s)
    a = mp.floor(2 * x) / 2
    b = a + mp.mpf(1) / 2
    m = (a + b) / 2
    F = lambda s: mp.quad(lambda r: 1 / f(r), [m, s])
    target = y + z + F(x)
    lo, hi = a, b
    increasing = f(m) > 0
    for _ in range(200):
        mid = (lo + hi) / 2
        if (F(mid) < target) == increasing:
            lo = mid
        else:
            hi = mid
    t = (lo + hi) / 2
    return f(x) / f(t)


# planar: v = x + a sin 2πx ----------------------------------------------------

def planar_wv(x0, a=mp.mpf("0.1"), n=1000):
    """w_v by Simpson's rule of −Δv along the gradient-flow trajectory."""
    x0 = mp.mpf(x0)
    v = lambda x: x + a * mp.sin(TAU * x)
    vx = lambda x: 1 + a * TAU * mp.cos(TAU * x)
    lap = lambda x: -a * TAU**2 * mp.sin(TAU * x)
    # v increases along the flow: run backward in time from above the level
    d = -1 if v(x0) > 0 else 1
    sol = mp.odefun(lambda s, x: d * vx(x), 0, x0)
    # hitting time: v(X(τ)) = 0, guessed from the linear part
    span = mp.findroot(lambda s: v(sol(s)), abs(x0))
    h = span / n
    acc = lap(sol(0)) + lap(sol(span))
    for k in range(1, n):
        acc += (4 if k % 2 else 2) * lap(sol(k * h))
    # dt = d ds
    return -d * acc * h / 3, d * span


# periodic scan: one-dimensional reduction of the third flow ---------------------

def fgh_integral(x0, T, shift):
    """I(T) = q(T) − q(−T) for j = (1, f, f), f = sin 2πx + shift."""
    f = lambda x: mp.sin(TAU * x) + shift
    df = lambda x: TAU * mp.cos(TAU * x)
    rhs = lambda t, y: [2 * f(y[0]) * df(y[0]) / (1 + 2 * f(y[0]) ** 2),
                        2 * df(y[0]) ** 2 / (1 + 2 * f(y[0]) ** 2)]
    fwd = mp.odefun(rhs, 0, [mp.mpf(x0), mp.mpf(0)])
    bwd = mp.odefun(lambda t, y: [-v for v in rhs(-t, y)], 0, [mp.mpf(x0), mp.mpf(0)])
    return fwd(T)[1] - bwd(T)[1]


def main():
    out = {}
    out["sinh_sigma_at_1_2"] = sig(sinh_sigma(1, 2))
    out["sinh_w_at_1.2_2"] = sig(mp.log(sinh_sigma("1.2", 2)))
    out["sinh_w_points"] = [
        {"p": [x, y], "w": sig(mp.log(sinh_sigma(mp.mpf(x), mp.mpf(y))))}
        for x, y in [(0.3, 0.5), (-0.7, 1.4), (1.6, -0.8), (-1.9, 0.1), (0.25, 2.5)]
    ]
    out["sinh_log_atan_sigma"] = [
        {"p": [x, y], "sigma": sig(sinh_sigma(mp.mpf(x), mp.mpf(y), log_atan))}
        for x, y in [(0.5, 0.0), (-1.1, 0.7), (1.8, -1.0)]
    ]
    out["inversion_target_1.5"] = [sig(mp.asinh(mp.mpf("1.5"))), sig(mp.sqrt(1 + mp.mpf("1.5") ** 2)), 0.0]
    out["cex_F_at_0.01"] = sig(cex_F("0.01"))
    out["cex_F_quad_at_0.3"] = sig(cex_F_quad("0.3"))
    out["cex_F_at_0.3"] = sig(cex_F("0.3"))
    xs = ["0.5", "0.9", "0.99", "0.999999"]
    out["cex_local_w"] = [{"x": float(x), "w": sig(cex_local_w(x, 0))} for x in xs]
    out["remf_sigma"] = [
        {"p": [x, y, z], "sigma": sig(remf_sigma(x, y, z))}
        for x, y, z in [(0.1, 0.5, 0.25), (0.3, -0.9, 0.1), (0.62, 0.4, 0.6), (0.88, -1.0, -0.7), (0.499, 0.8, 0.9)]
    ]
    rows = []
    for x0 in ["0.37", "-0.2", "1.3", "0.05"]:
        wv, tau = planar_wv(x0)
        rows.append({"start": float(x0), "tau": sig(tau), "w_v": sig(wv)})
    out["planar_wavy_w_v"] = rows
    out["fgh_bounded_I"] = [
        {"start_x": 0.137, "T": T, "I": sig(fgh_integral("0.137", T, 2))} for T in [1, 4, 16]
    ]
    out["fgh_bounded_I_limit"] = sig(mp.log(3))
    out["fgh_vanishing_I"] = [
        {"start_x": 0.137, "T": T, "I": sig(fgh_integral("0.137", T, 0))} for T in [1, 2]
    ]
    print(json.dumps(out, indent=2))


if __name__ == "__main__":
    main()
