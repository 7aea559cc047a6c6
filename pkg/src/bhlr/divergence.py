"""Bregman divergence family over scalar generating functions.

A generating function phi is strictly convex and continuously differentiable
on its domain; the induced pointwise divergence is

    d(a, b) = phi(a) - phi(b) - phi'(b) * (a - b),

which is non-negative and vanishes iff a == b.  The aggregate divergence is
the mean of d over paired entries.

Shipped generators (selected by string key):

    key              phi(x)                           dom(phi)
    ---------------  -------------------------------  --------
    logistic         x log x + (1-x) log(1-x)         [0, 1]
    kl               x log(x + eps) - x               [0, inf)
    beta:<b>         x^(1+b)/(b(1+b)) - x/b           [0, inf)
    itakura-saito    -log x                           (0, inf)
    inverse          1/x                              (0, inf)
    quadratic        (x^2 - x)/2                      R
    exponential      exp(x)                           R
    dual-logistic    log(1 + exp(x))                  R

The boundary convention 0*log(0) = 0 applies to the logistic and kl
generators, so phi is finite on closed boundaries.  First and second
derivatives are analytic closed forms and are only defined on the interior
of the domain.

``eps`` is a small non-negative regularization offset used only by the kl
generator (default 1e-4); its derivatives are derived from the regularized
phi so that finite-difference consistency holds exactly.
"""

import numpy as np
from scipy.special import expit, xlogy

from .errors import ConfigError, DomainError, LengthMismatch, UnsupportedKind

KINDS = (
    "logistic",
    "kl",
    "beta",
    "itakura-saito",
    "inverse",
    "quadratic",
    "exponential",
    "dual-logistic",
)

DEFAULT_KL_EPSILON = 1e-4

_INF = float("inf")

# kind -> (lo, hi, lo_closed, hi_closed)
_DOMAINS = {
    "logistic": (0.0, 1.0, True, True),
    "kl": (0.0, _INF, True, False),
    "beta": (0.0, _INF, True, False),
    "itakura-saito": (0.0, _INF, False, False),
    "inverse": (0.0, _INF, False, False),
    "quadratic": (-_INF, _INF, False, False),
    "exponential": (-_INF, _INF, False, False),
    "dual-logistic": (-_INF, _INF, False, False),
}


def make_generator(key, epsilon=None):
    """Build a GeneratingFunction from its config string key.

    ``"beta:<b>"`` carries the positive beta parameter in the key itself.
    ``epsilon`` overrides the kl regularization offset (ignored elsewhere).
    """
    key = key.strip().lower()
    if key.startswith("beta:"):
        try:
            b = float(key.split(":", 1)[1])
        except ValueError:
            raise ConfigError(f"cannot parse beta parameter in {key!r}")
        return GeneratingFunction("beta", beta=b)
    if key == "beta":
        raise ConfigError("beta divergence needs a parameter: use 'beta:<b>'")
    if key not in _DOMAINS:
        raise ConfigError(f"unknown divergence key {key!r}; expected one of {KINDS}")
    if key == "kl":
        return GeneratingFunction("kl", epsilon=epsilon)
    return GeneratingFunction(key)


class GeneratingFunction:
    """A strictly convex generator phi with its domain and derivatives.

    Instances are immutable value objects; all methods are pure and accept
    scalars or numpy arrays (returning the matching shape).
    """

    def __init__(self, kind, beta=None, epsilon=None):
        if kind not in _DOMAINS:
            raise ConfigError(f"unknown generator kind {kind!r}")
        if kind == "beta":
            if beta is None or not beta > 0:
                raise ConfigError("beta generator requires beta > 0")
        elif beta is not None:
            raise ConfigError(f"beta parameter is meaningless for kind {kind!r}")
        if kind == "kl":
            epsilon = DEFAULT_KL_EPSILON if epsilon is None else float(epsilon)
            if epsilon < 0:
                raise ConfigError("epsilon must be non-negative")
        elif epsilon not in (None, 0, 0.0):
            raise ConfigError("epsilon applies only to the kl generator")
        else:
            epsilon = 0.0
        self.kind = kind
        self.beta = float(beta) if beta is not None else None
        self.epsilon = float(epsilon)
        self.lo, self.hi, self.lo_closed, self.hi_closed = _DOMAINS[kind]

    def __repr__(self):
        if self.kind == "beta":
            return f"GeneratingFunction(beta:{self.beta})"
        if self.kind == "kl" and self.epsilon:
            return f"GeneratingFunction(kl, eps={self.epsilon})"
        return f"GeneratingFunction({self.kind})"

    @property
    def key(self):
        return f"beta:{self.beta}" if self.kind == "beta" else self.kind

    # -- domain handling --------------------------------------------------

    def contains(self, x):
        """Elementwise membership in dom(phi), boundaries included if closed."""
        x = np.asarray(x, dtype=np.float64)
        lo_ok = x >= self.lo if self.lo_closed else x > self.lo
        hi_ok = x <= self.hi if self.hi_closed else x < self.hi
        return lo_ok & hi_ok & np.isfinite(x)

    def interior_contains(self, x):
        x = np.asarray(x, dtype=np.float64)
        return (x > self.lo) & (x < self.hi) & np.isfinite(x)

    def clamp_interval(self, margin):
        """The interval [lo + margin, hi - margin] used to clamp model outputs."""
        lo = self.lo + margin if np.isfinite(self.lo) else -_INF
        hi = self.hi - margin if np.isfinite(self.hi) else _INF
        return lo, hi

    def _checked(self, x, tol=0.0):
        """Validate x against dom(phi); values within tol of the domain are
        pulled back onto the boundary."""
        x = np.asarray(x, dtype=np.float64)
        if tol > 0:
            bad = (x < self.lo - tol) | (x > self.hi + tol) | ~np.isfinite(x)
            if not np.any(bad):
                x = np.clip(x, self.lo, self.hi)
        else:
            bad = ~self.contains(x)
        if np.any(bad):
            offender = np.asarray(x)[bad].flat[0] if np.ndim(x) else x
            raise DomainError(
                f"value {offender!r} outside dom(phi) of {self.key!r}"
            )
        return x

    def _checked_interior(self, x):
        x = np.asarray(x, dtype=np.float64)
        bad = ~self.interior_contains(x)
        if np.any(bad):
            offender = np.asarray(x)[bad].flat[0] if np.ndim(x) else x
            raise DomainError(
                f"value {offender!r} not in the interior of dom(phi) of {self.key!r}"
            )
        return x

    # -- phi and its derivatives -------------------------------------------

    def phi(self, x, tol=0.0):
        """Evaluate phi(x).  Raises DomainError outside dom(phi) beyond tol."""
        x = self._checked(x, tol)
        return _maybe_scalar(self._phi_raw(x))

    def _phi_raw(self, x):
        k = self.kind
        if k == "logistic":
            return xlogy(x, x) + xlogy(1.0 - x, 1.0 - x)
        if k == "kl":
            if self.epsilon > 0:
                return x * np.log(x + self.epsilon) - x
            return xlogy(x, x) - x
        if k == "beta":
            b = self.beta
            return np.power(x, 1.0 + b) / (b * (1.0 + b)) - x / b
        if k == "itakura-saito":
            return -np.log(x)
        if k == "inverse":
            return 1.0 / x
        if k == "quadratic":
            return (x * x - x) / 2.0
        if k == "exponential":
            return np.exp(x)
        if k == "dual-logistic":
            return np.logaddexp(0.0, x)
        raise UnsupportedKind(k)

    def phi_grad(self, x):
        """Analytic phi'(x) on the interior of dom(phi)."""
        x = self._checked_interior(x)
        return _maybe_scalar(self._grad_raw(x))

    def _grad_raw(self, x):
        k = self.kind
        if k == "logistic":
            return np.log(x) - np.log1p(-x)
        if k == "kl":
            e = self.epsilon
            if e > 0:
                return np.log(x + e) + x / (x + e) - 1.0
            return np.log(x)
        if k == "beta":
            b = self.beta
            return (np.power(x, b) - 1.0) / b
        if k == "itakura-saito":
            return -1.0 / x
        if k == "inverse":
            return -1.0 / (x * x)
        if k == "quadratic":
            return x - 0.5
        if k == "exponential":
            return np.exp(x)
        if k == "dual-logistic":
            return expit(x)
        raise UnsupportedKind(k)

    def phi_hess(self, x):
        """Analytic phi''(x) on the interior of dom(phi); positive there."""
        x = self._checked_interior(x)
        return _maybe_scalar(self._hess_raw(x))

    def _hess_raw(self, x):
        k = self.kind
        if k == "logistic":
            return 1.0 / (x * (1.0 - x))
        if k == "kl":
            e = self.epsilon
            if e > 0:
                s = x + e
                return 1.0 / s + e / (s * s)
            return 1.0 / x
        if k == "beta":
            return np.power(x, self.beta - 1.0)
        if k == "itakura-saito":
            return 1.0 / (x * x)
        if k == "inverse":
            return 2.0 / (x * x * x)
        if k == "quadratic":
            return np.ones_like(x)
        if k == "exponential":
            return np.exp(x)
        if k == "dual-logistic":
            s = expit(x)
            return s * (1.0 - s)
        raise UnsupportedKind(k)

    # -- divergences -------------------------------------------------------

    def d(self, a, b, tol=0.0):
        """Pointwise divergence phi(a) - phi(b) - phi'(b)(a - b).

        ``a`` may sit on a closed domain boundary; ``b`` must be interior.
        """
        a = self._checked(a, tol)
        b = self._checked_interior(b)
        out = self._phi_raw(a) - self._phi_raw(b) - self._grad_raw(b) * (a - b)
        return _maybe_scalar(out)

    def mean_divergence(self, a, b, tol=0.0):
        """Aggregate divergence: mean of d over paired entries of a and b."""
        a = np.asarray(a, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        if a.shape != b.shape:
            raise LengthMismatch(f"shapes {a.shape} and {b.shape} differ")
        if a.size == 0:
            raise LengthMismatch("empty input")
        return float(np.mean(self.d(a, b, tol=tol)))

    def exp_family_coeffs(self, mu):
        """Natural-parameter coefficients (phi'(mu), phi(mu) - mu*phi'(mu))
        of the exponential-family density implied by this generator."""
        mu = self._checked_interior(mu)
        g = self._grad_raw(mu)
        z2 = self._phi_raw(mu) - mu * g
        return _maybe_scalar(g), _maybe_scalar(z2)


def _maybe_scalar(x):
    return float(x) if np.ndim(x) == 0 else x
