"""scikit-learn style wrappers.

Samples are fields on a fixed box, passed either as :class:`Field` objects or
as arrays of shape ``(M, M, M)`` / ``(M**3,)``.  The wrappers only hold
hyperparameters and delegate to the functional core.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .classifier import classify_trajectory, lambda_scan
from .evolution import SolverConfig
from .functionals import Exponents, constants_build, energy_report
from .grid import BoxDomain, Field
from .ground_state import minimize_quotient
from .riesz import check_mu, kernel_build


def check_field(x, domain: BoxDomain) -> Field:
    """Coerce one sample to a finite :class:`Field` on ``domain``."""
    if isinstance(x, Field):
        if x.domain != domain:
            raise ValueError(f"field lives on {x.domain}, expected {domain}")
        values = x.values
    else:
        values = np.asarray(x, dtype=float)
        if values.size != domain.M ** 3:
            raise ValueError(f"expected {domain.M ** 3} values, got {values.size}")
    values = np.asarray(values, dtype=float).reshape((domain.M,) * 3)
    if not np.all(np.isfinite(values)):
        raise ValueError("field contains non-finite values")
    return Field(domain, values)


def check_fields(X, domain: BoxDomain) -> list[Field]:
    if isinstance(X, (Field, np.ndarray)) and (isinstance(X, Field) or X.ndim in (1, 3)):
        X = [X]
    return [check_field(x, domain) for x in X]


class _Base(BaseEstimator):
    def __init__(self, L=1.0, M=32, mu=2.0):
        self.L = L
        self.M = M
        self.mu = mu

    def _setup(self):
        check_mu(self.mu)
        self.domain_ = BoxDomain(float(self.L), int(self.M))
        self.exps_ = Exponents(self.mu)
        self.consts_ = constants_build(self.mu)
        self.kernel_ = kernel_build(self.domain_, self.mu)

    def _ensure(self):
        if not hasattr(self, "kernel_"):
            self._setup()


class EnergyTransformer(TransformerMixin, _Base):
    """Maps fields to rows ``[A, B, J, I]``."""

    def fit(self, X=None, y=None):
        self._setup()
        return self

    def transform(self, X):
        check_is_fitted(self, "kernel_")
        rows = []
        for u in check_fields(X, self.domain_):
            r = energy_report(u, self.kernel_, self.exps_, self.consts_)
            rows.append([r.a, r.b, r.j, r.i])
        return np.array(rows)


class WellClassifier(ClassifierMixin, _Base):
    """Labels fields by potential-well membership.

    With ``dynamic=False`` the label is the static class of the field itself
    (``W``, ``V``, ``N`` or ``Z``).  With ``dynamic=True`` each field is
    evolved and labelled by trajectory verdict (``EntersW``, ``EntersV`` or
    ``Undetermined``).
    """

    def __init__(self, L=1.0, M=32, mu=2.0, dynamic=False, solver=None):
        super().__init__(L, M, mu)
        self.dynamic = dynamic
        self.solver = solver

    def fit(self, X=None, y=None):
        self._setup()
        self.classes_ = np.array(
            ["EntersV", "EntersW", "Undetermined"] if self.dynamic else ["N", "V", "W", "Z"]
        )
        return self

    def predict(self, X):
        check_is_fitted(self, "classes_")
        out = []
        for u in check_fields(X, self.domain_):
            if self.dynamic:
                v = classify_trajectory(u, self.solver or SolverConfig(), self.kernel_, self.exps_, self.consts_)
                out.append(v.kind.value)
            else:
                out.append(energy_report(u, self.kernel_, self.exps_, self.consts_).klass.value)
        return np.array(out)


class ThresholdScanner(_Base):
    """Brackets the amplitude thresholds for ``u0 = lam * phi``; ``fit(phi)``."""

    def __init__(self, L=1.0, M=32, mu=2.0, lambda_min=0.5, lambda_max=4.0, bracket_tol=0.05,
                 solver=None, max_probes=40):
        super().__init__(L, M, mu)
        self.lambda_min = lambda_min
        self.lambda_max = lambda_max
        self.bracket_tol = bracket_tol
        self.solver = solver
        self.max_probes = max_probes

    def fit(self, X, y=None):
        self._setup()
        phi = check_field(X, self.domain_)
        res = lambda_scan(phi, self.lambda_min, self.lambda_max, self.bracket_tol,
                          self.solver or SolverConfig(), self.kernel_, self.exps_, self.consts_,
                          max_probes=self.max_probes)
        self.result_ = res
        self.lambda1_ = (res.lambda1_lo, res.lambda1_hi)
        self.lambda2_ = (res.lambda2_lo, res.lambda2_hi)
        return self


class GroundStateEstimator(_Base):
    """Minimises the HLS-Sobolev quotient from ``fit(u_init)``."""

    def __init__(self, L=1.0, M=32, mu=2.0, max_iter=2000, tol=1e-7):
        super().__init__(L, M, mu)
        self.max_iter = max_iter
        self.tol = tol

    def fit(self, X, y=None):
        self._setup()
        u = check_field(X, self.domain_)
        res = minimize_quotient(u, self.max_iter, self.tol, self.kernel_, self.exps_, self.consts_)
        self.result_ = res
        self.q_min_ = res.q_min
        self.m_est_ = res.m_est
        self.minimizer_ = res.minimizer
        return self

    def transform(self, X):
        check_is_fitted(self, "minimizer_")
        return np.array([self.minimizer_.values.ravel()])
