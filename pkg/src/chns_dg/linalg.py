"""Sparse solves, optionally with a single scalar mean constraint.

Matrices are scipy CSR/CSC; the mean constraint w.x = m is imposed through
a bordered (augmented) system with one Lagrange multiplier, which keeps one
basis for the constrained and unconstrained spaces.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class SolverError(RuntimeError):
    pass


class SingularMatrixError(SolverError):
    pass


class IterativeFailure(SolverError):
    def __init__(self, message, residual):
        super().__init__(f"{message} (final residual {residual:.3e})")
        self.residual = residual


@dataclass
class LinearSolveSpec:
    """How to solve a linear system.

    ``mean_constraint`` is an optional pair (w, m) enforcing w . x = m,
    for systems that are singular along exactly that direction.
    """

    method: str = "direct"  # direct | cg | gmres
    rel_tolerance: float = 1e-12
    max_iterations: int = 5000
    mean_constraint: tuple | None = field(default=None)

    def __post_init__(self):
        if self.rel_tolerance <= 0:
            raise ValueError("rel_tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.method not in ("direct", "cg", "gmres"):
            raise ValueError(f"unknown method {self.method!r}")


def bordered_matrix(a, w):
    """Augment A with one constraint row/column."""
    n = a.shape[0]
    w = sp.csr_matrix(w.reshape(1, -1))
    return sp.bmat([[a, w.T], [w, None]], format="csc")


def solve(a, b, spec=None):
    """Solve A x = b according to the spec; returns x.

    With a mean constraint the residual is measured on the constrained
    subspace and the constraint itself holds to solver precision.
    """
    spec = spec or LinearSolveSpec()
    a = a.tocsc() if sp.issparse(a) else sp.csc_matrix(a)
    b = np.asarray(b, dtype=float)
    if a.shape[0] != a.shape[1] or a.shape[0] != b.size:
        raise ValueError("incompatible system dimensions")

    if spec.mean_constraint is None:
        if spec.method == "direct":
            return _direct(a, b)
        return _iterative(a, b, spec)

    w, m = spec.mean_constraint
    w = np.asarray(w, dtype=float)
    if spec.method == "direct":
        big = bordered_matrix(a, w)
        rhs = np.concatenate([b, [m]])
        x = _direct(big, rhs)[:-1]
        return x
    # iterative: shift to a homogeneous constraint, then project
    ww = float(w @ w)
    if ww == 0.0:
        return _iterative(a, b, spec)
    shift = (m / ww) * w
    proj = lambda v: v - (w @ v) / ww * w
    op = spla.LinearOperator(a.shape, matvec=lambda v: proj(a @ proj(v)))
    rhs = proj(b - a @ shift)
    x0 = np.zeros_like(b)
    if spec.method == "cg":
        y, info = spla.cg(op, rhs, x0=x0, rtol=spec.rel_tolerance, atol=0.0,
                          maxiter=spec.max_iterations)
    else:
        y, info = spla.gmres(op, rhs, x0=x0, rtol=spec.rel_tolerance, atol=0.0,
                             maxiter=spec.max_iterations)
    if info != 0:
        res = float(np.linalg.norm(op @ y - rhs))
        raise IterativeFailure(f"{spec.method} did not converge", res)
    return proj(y) + shift


def _direct(a, b):
    import warnings

    with np.errstate(all="ignore"), warnings.catch_warnings():
        warnings.simplefilter("ignore", spla.MatrixRankWarning)
        try:
            x = spla.spsolve(a.tocsc(), b)
        except RuntimeError as exc:  # raised by SuperLU on exact singularity
            raise SingularMatrixError(str(exc)) from exc
    if not np.all(np.isfinite(x)):
        raise SingularMatrixError("direct factorization produced non-finite values")
    return x


def _iterative(a, b, spec):
    if spec.method == "cg":
        x, info = spla.cg(a, b, rtol=spec.rel_tolerance, atol=0.0,
                          maxiter=spec.max_iterations)
    else:
        x, info = spla.gmres(a, b, rtol=spec.rel_tolerance, atol=0.0,
                             maxiter=spec.max_iterations)
    if info != 0:
        res = float(np.linalg.norm(a @ x - b))
        raise IterativeFailure(f"{spec.method} did not converge", res)
    return x


def factorized(a, constraint_weights=None):
    """LU-factorize once; returns a solver closure.

    Without a constraint the closure maps b -> x.  With constraint weights w
    it maps (b, m) -> x with w . x = m.
    """
    if constraint_weights is None:
        lu = spla.splu(a.tocsc())
        return lambda b: lu.solve(b)
    big = bordered_matrix(a, np.asarray(constraint_weights, dtype=float))
    lu = spla.splu(big)

    def solve_constrained(b, m=0.0):
        rhs = np.concatenate([b, [m]])
        return lu.solve(rhs)[:-1]

    return solve_constrained


class ReusableSolver:
    """Direct/iterative hybrid for slowly varying operator sequences.

    The first call factorizes the matrix and solves directly; later calls
    run GMRES preconditioned by that factorization.  When GMRES needs too
    many iterations (the operator drifted too far) the factorization is
    refreshed and the call falls back to a direct solve.
    """

    def __init__(self, rtol=1e-12, refresh_iterations=25, max_iterations=120):
        self.rtol = rtol
        self.refresh_iterations = refresh_iterations
        self.max_iterations = max_iterations
        self._lu = None
        self.factorizations = 0

    def _refactor(self, a):
        # the assembled operators have symmetric sparsity; MMD on A^T + A
        # roughly halves the fill of the default column ordering
        self._lu = spla.splu(a.tocsc(), permc_spec="MMD_AT_PLUS_A")
        self.factorizations += 1

    def solve(self, a, b):
        if self._lu is None:
            self._refactor(a)
            return self._lu.solve(b)
        if not np.any(b):
            return np.zeros_like(b)
        count = [0]

        def cb(_):
            count[0] += 1

        precond = spla.LinearOperator(a.shape, self._lu.solve)
        x, info = spla.gmres(a, b, M=precond, rtol=self.rtol, atol=0.0,
                             restart=self.refresh_iterations + 5,
                             maxiter=4, callback=cb, callback_type="pr_norm")
        if info != 0 or count[0] > self.refresh_iterations:
            self._refactor(a)
            x = self._lu.solve(b)
        return x


def smallest_eigenvalue_on_subspace(a, constraint_weights=None, tol=1e-8,
                                    max_iterations=500):
    """Smallest Rayleigh quotient of a symmetric A over {x : w . x = 0}.

    A zero (or None) weight vector means the plain smallest eigenvalue.
    Small problems are solved densely; larger ones by inverse iteration
    with the constraint deflated through the bordered factorization.
    """
    a = a.tocsr() if sp.issparse(a) else sp.csr_matrix(a)
    n = a.shape[0]
    asym = abs(a - a.T).max() if n else 0.0
    scale = abs(a).max() if a.nnz else 0.0
    if scale > 0 and asym > 1e-12 * scale:
        raise ValueError("matrix must be symmetric")
    w = None
    if constraint_weights is not None:
        w = np.asarray(constraint_weights, dtype=float)
        if np.linalg.norm(w) == 0.0:
            w = None

    if scale == 0.0:
        return 0.0

    if n <= 600:
        dense = a.toarray()
        if w is None:
            return float(np.linalg.eigvalsh(dense)[0])
        basis = _orthonormal_complement(w)
        return float(np.linalg.eigvalsh(basis.T @ dense @ basis)[0])

    # inverse iteration with the constraint deflated through the bordered
    # factorization; the shift starts below the Gershgorin lower bound and
    # approaches the estimate from below, so the iteration cannot lock onto
    # an interior eigenvalue
    diag = a.diagonal()
    radius = np.asarray(abs(a).sum(axis=1)).ravel() - np.abs(diag)
    lower = float(np.min(diag - radius))
    rng = np.random.default_rng(1234)
    x = rng.standard_normal(n)
    if w is not None:
        x -= (w @ x) / (w @ w) * w
    x /= np.linalg.norm(x)
    lam = float(x @ (a @ x))
    shift = lower - 1e-3 * scale
    solver = None
    last_shift = None
    for _ in range(max_iterations):
        if shift != last_shift:
            mat = (a - shift * sp.identity(n, format="csr")).tocsc()
            try:
                solver = factorized(mat, w) if w is not None else factorized(mat)
                last_shift = shift
            except RuntimeError:
                shift -= 1e-6 * scale  # landed on an eigenvalue; nudge away
                continue
        y = solver(x, 0.0) if w is not None else solver(x)
        y_norm = np.linalg.norm(y)
        if not np.isfinite(y_norm) or y_norm == 0.0:
            shift -= 1e-6 * scale
            last_shift = None
            continue
        x = y / y_norm
        if w is not None:
            x -= (w @ x) / (w @ w) * w
            x /= np.linalg.norm(x)
        lam_new = float(x @ (a @ x))
        gap = abs(lam_new - lam)
        if gap <= tol * max(abs(lam_new), 1e-30):
            return lam_new
        lam = lam_new
        # once below the estimate, tighten from below for fast convergence
        shift = max(shift, lam_new - max(10.0 * gap, 1e-9 * scale))
    return lam


def _orthonormal_complement(w):
    """Orthonormal basis of the hyperplane w . x = 0, shape (n, n-1)."""
    n = w.size
    q, _ = np.linalg.qr(np.column_stack([w, np.eye(n)[:, : n - 1]]))
    # first column spans w; ensure the rest are its complement
    basis = q[:, 1:]
    return basis
