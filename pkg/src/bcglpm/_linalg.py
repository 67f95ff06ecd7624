import logging

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular

from .exceptions import NumericalError

log = logging.getLogger(__name__)


def cholesky(m, jitter=True, what="matrix"):
    """Lower Cholesky factor of a symmetric positive-definite matrix.

    On failure a single jitter of 1e-10 * trace / n is added to the diagonal
    and the factorization retried before giving up.
    """
    m = np.asarray(m, dtype=float)
    try:
        return np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        if not jitter or m.shape[0] == 0:
            raise NumericalError(f"{what} is not positive definite") from None
    n = m.shape[0]
    eps = 1e-10 * max(np.trace(m), 1e-300) / n
    log.warning("%s not positive definite; retrying with jitter %.3g", what, eps)
    try:
        return np.linalg.cholesky(m + eps * np.eye(n))
    except np.linalg.LinAlgError:
        piv = np.linalg.eigvalsh(m).min()
        raise NumericalError(f"{what} is not positive definite (smallest eigenvalue {piv:.3g})") from None


def logdet_chol(l):
    return 2.0 * np.sum(np.log(np.diag(l)))


def spd_inverse(m, what="matrix"):
    try:
        c = cho_factor(m, lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        raise NumericalError(f"{what} is not positive definite") from None
    return cho_solve(c, np.eye(m.shape[0]), check_finite=False)


def is_spd(m):
    try:
        np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        return False
    return True


__all__ = ["cholesky", "logdet_chol", "spd_inverse", "is_spd", "solve_triangular"]
