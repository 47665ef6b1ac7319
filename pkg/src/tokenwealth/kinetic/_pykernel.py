"""Pure-Python exchange loop; the reference the compiled kernel must match bit for bit."""
from .rules import candidates, settle


def exchange(wealth, lambdas, variant, js, ks, eps):
    """Apply the transactions ``(js[i], ks[i], eps[i])`` to ``wealth`` in place."""
    w = wealth.tolist()
    lam = lambdas.tolist()
    v = int(variant)
    for j, k, e in zip(js.tolist(), ks.tolist(), eps.tolist()):
        total, a, b = candidates(v, w[j], w[k], lam[j], lam[k], e)
        w[j], w[k] = settle(total, a, b)
    wealth[:] = w
