"""Dense solves with a cheap condition-number guard."""

import numpy as np
from scipy.linalg import LinAlgError, lapack, lu_factor, lu_solve

from .errors import SingularJacobian


def solve_checked(A, b, max_cond, what="Jacobian"):
    """Solve A x = b by LU, raising SingularJacobian if the 1-norm condition estimate exceeds `max_cond`."""
    try:
        lu, piv = lu_factor(A, check_finite=True)
    except (LinAlgError, ValueError) as exc:
        raise SingularJacobian(f"{what} could not be factorized: {exc}") from exc
    anorm = np.max(np.sum(np.abs(A), axis=0))
    rcond, info = lapack.dgecon(lu, anorm, norm="1")
    if info != 0 or not np.isfinite(rcond) or rcond * max_cond < 1.0:
        cond = np.inf if rcond == 0 else 1.0 / rcond
        raise SingularJacobian(f"{what} is numerically singular (condition estimate {cond:.3e})")
    return lu_solve((lu, piv), b)
