"""Reference values for the two-dimensional constant-main-scalar metrics.

Prints, at x = (0.3, -0.2), y = (0.7, 0.4) with beta = p y1, gamma = q y2:
eps, I^2, lambda = R/L and its angle derivatives, the flag ODE residual,
R_{.i} - 2 tau_i and the printed omega_12 closed forms. These numbers are
frozen into tests/test_dim2.cpp.
"""
import jax
import jax.numpy as jnp
import numpy as np

from spray_oracle import chi, decompose, riemann, spray_from_metric

x = jnp.array([0.3, -0.2])
y = jnp.array([0.7, 0.4])


def pq(z):
    x1, x2 = z
    return 1 + x1 * x2**2 / 3 + x2 / 5, 1 + x1 + x2**2 / 4


def derivs(f):
    g = jax.grad(f)(x)
    h = jax.hessian(f)(x)
    return f(x), g[0], g[1], h[0, 0], h[0, 1], h[1, 1]


p, P1, P2, P11, P12, P22 = derivs(lambda z: pq(z)[0])
q, Q1, Q2, Q11, Q12, Q22 = derivs(lambda z: pq(z)[1])
s, r = 1 / 3, 1.0


def L19(x, y):
    a, b = pq(x)
    return (a * y[0]) ** (2 * s) * (b * y[1]) ** (2 * (1 - s))


def L20(x, y):
    a, b = pq(x)
    be, ga = a * y[0], b * y[1]
    return be**2 * jnp.exp(2 * ga / be)


def L21(x, y):
    a, b = pq(x)
    be, ga = a * y[0], b * y[1]
    return (be**2 + ga**2) * jnp.exp(2 * r * jnp.arctan(be / ga))


den = p**2 * q**2
W = {
    "19": (1 - 2 * s) / (s * (1 - s)) * ((p**2 * q * Q12 - p * q**2 * P12 + q**2 * P1 * P2 - p**2 * Q1 * Q2) * s
                                         - p**2 * q * Q12 + p**2 * Q1 * Q2) / den,
    "20": -2 * (p**2 * q * P22 + p * q**2 * P12 - p**2 * q * Q12 + p**2 * Q1 * Q2 - q**2 * P1 * P2 - p**2 * P2 * Q2) / den,
    "21": 2 * r / (1 + r * r) * ((p**2 * q * Q12 - p * q**2 * P12 - p**2 * Q1 * Q2 + q**2 * P1 * P2) * r
                                 + p**2 * q * P22 + p * q**2 * Q11 - q**2 * P1 * Q1 - p**2 * P2 * Q2) / den,
}


def frame(L, x, y):
    g = 0.5 * jax.hessian(L, 1)(x, y)
    F = jnp.sqrt(L(x, y))
    l_low = 0.5 * jax.grad(L, 1)(x, y) / F
    det = jnp.linalg.det(g)
    eps = jnp.sign(det)
    m_up = jnp.array([-l_low[1], l_low[0]]) / jnp.sqrt(eps * det)
    return g, F, l_low, eps, m_up, g @ m_up


for label, L in [("19", L19), ("20", L20), ("21", L21)]:
    G = spray_from_metric(L)
    Rm = riemann(G)
    lam = lambda x, y, L=L, Rm=Rm: jnp.trace(Rm(x, y)) / L(x, y)

    def dth(S, L=L):
        def f(x, y):
            _, F, _, eps, m_up, _ = frame(L, x, y)
            return eps * F * jax.grad(S, 1)(x, y) @ m_up
        return f

    l1, l2 = dth(lam), dth(dth(lam))
    g, F, l_low, eps, m_up, m_low = frame(L, x, y)
    C = 0.25 * jax.jacfwd(jax.hessian(L, 1), 1)(x, y)
    I = F * C[0, 0, 0] / m_low[0] ** 3
    R, tau = decompose(G)
    d = jax.grad(R, 1)(x, y) - 2 * tau(x, y)
    print(f"class {label}: eps={float(eps)} I^2={float(I * I)!r}")
    print(f"  lambda={float(lam(x, y))!r} lambda'={float(l1(x, y))!r} lambda''={float(l2(x, y))!r}")
    print(f"  ode residual={float(l2(x, y) + eps * I * l1(x, y))!r}")
    print(f"  R.i-2tau={np.array(d).tolist()} predicted={[float(W[label] * y[1]), float(-W[label] * y[0])]}")
    print(f"  chi={np.array(chi(G)(x, y)).tolist()}")
