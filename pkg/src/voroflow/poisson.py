"""Pressure Poisson solves on the fluid-reduced operators.

The system is A p = G^T u* with A = G^T V^-1 G from the reduced gradient,
solved by Jacobi-preconditioned conjugate gradients. Free-surface cells see
a zero Dirichlet air pressure already folded into A; solid facets carry no
entries (homogeneous Neumann). A pure-Neumann system (no air anywhere) is
compatibility-projected and gauge-fixed to zero mean.
"""

from dataclasses import dataclass

import numpy as np

from . import operators as ops_mod


class SolverFailure(RuntimeError):
    """Base class; carries the best iterate in .solution when available."""

    def __init__(self, msg, solution=None):
        super().__init__(msg)
        self.solution = solution


class MaxIterations(SolverFailure):
    pass


class NonFiniteEncountered(SolverFailure):
    pass


@dataclass
class PoissonProblem:
    A: object               # sparse SPD (or PSD pure-Neumann) matrix
    rhs: np.ndarray
    initial_guess: np.ndarray
    pure_neumann: bool
    precond_diag: np.ndarray
    fops: object = None     # FluidOperators, kept for velocity projection
    u_star: np.ndarray = None


@dataclass
class PoissonSolution:
    p: np.ndarray
    iterations: int
    residual: float


def build_problem(fops, u_star, initial_guess=None):
    """Assemble A p = G^T u* with the boundary handling baked into fops."""
    u_star = np.asarray(u_star, dtype=np.float64)
    rhs = fops.G.T @ u_star.ravel()
    if fops.pure_neumann:
        rhs = rhs - rhs.mean()
    if initial_guess is None:
        guess = np.zeros(fops.nf)
    else:
        guess = np.array(initial_guess, dtype=np.float64)
        if fops.pure_neumann:
            guess = guess - guess.mean()
    diag = np.asarray(fops.A.diagonal()).copy()
    floor = max(1e-300, 1e-14 * (np.max(diag) if diag.size else 1.0))
    diag[diag <= floor] = 1.0
    return PoissonProblem(
        A=fops.A, rhs=rhs, initial_guess=guess,
        pure_neumann=fops.pure_neumann, precond_diag=diag,
        fops=fops, u_star=u_star,
    )


def cg_solve(problem, tol=1e-8, max_iter=None, div_tol=None):
    """Preconditioned CG; stops when ||A p - b|| <= tol ||b||.

    With div_tol set the residual must also satisfy max |r_i| / V_i <=
    div_tol: the residual of A p = G^T u* is exactly the volume-weighted
    divergence left in the projected velocity, so this enforces a pointwise
    divergence contract that a relative 2-norm test alone misses when
    squeezed surface cells have tiny volumes.
    """
    A = problem.A
    b = problem.rhs
    n = b.shape[0]
    if max_iter is None:
        max_iter = max(50, 10 * n)
    minv = 1.0 / problem.precond_diag
    vols = problem.fops.Vf if (div_tol is not None
                               and problem.fops is not None) else None

    def converged(r, rnorm):
        if rnorm > threshold:
            return False
        if vols is None:
            return True
        return float(np.max(np.abs(r) / vols)) <= div_tol

    x = problem.initial_guess.copy()
    r = b - A @ x
    bnorm = float(np.linalg.norm(b))
    threshold = tol * bnorm
    rnorm = float(np.linalg.norm(r))
    if converged(r, rnorm):
        return PoissonSolution(p=_gauge(problem, x), iterations=0, residual=rnorm)

    z = minv * r
    p = z.copy()
    rz = float(r @ z)
    for it in range(1, max_iter + 1):
        Ap = A @ p
        pap = float(p @ Ap)
        if not np.isfinite(pap) or pap <= 0.0:
            if pap == 0.0 and rnorm <= threshold:
                break
            raise NonFiniteEncountered(
                f"CG breakdown at iteration {it} (p^T A p = {pap})",
                solution=PoissonSolution(p=_gauge(problem, x), iterations=it,
                                         residual=rnorm),
            )
        alpha = rz / pap
        x += alpha * p
        r -= alpha * Ap
        rnorm = float(np.linalg.norm(r))
        if not np.isfinite(rnorm):
            raise NonFiniteEncountered(
                f"non-finite residual at iteration {it}",
                solution=PoissonSolution(p=_gauge(problem, x), iterations=it,
                                         residual=rnorm),
            )
        if converged(r, rnorm):
            return PoissonSolution(p=_gauge(problem, x), iterations=it,
                                   residual=rnorm)
        z = minv * r
        rz_new = float(r @ z)
        beta = rz_new / rz
        rz = rz_new
        p = z + beta * p
    raise MaxIterations(
        f"CG did not converge in {max_iter} iterations "
        f"(residual {rnorm:.3e}, target {threshold:.3e})",
        solution=PoissonSolution(p=_gauge(problem, x), iterations=max_iter,
                                 residual=rnorm),
    )


def _gauge(problem, x):
    if problem.pure_neumann:
        return x - x.mean()
    return x


def project_velocity(fops, u_star, p):
    """u = u* - [Gp]/V, the incompressible part of u*."""
    return u_star - ops_mod.fluid_gradient(fops, p) / fops.Vf[:, None]


def warm_start_equivalence_check(long_problem, short_problem, lambda_prev,
                                 tol=1e-8):
    """Do the warm-started long solve and zero-start short solve agree?

    The long problem carries the mapped velocity and is solved with the
    accumulated path integral as initial guess; the short problem carries
    the already-projected velocity and starts from zero. Both final
    projected velocities must match within 10x the CG tolerance.
    """
    fops_l = long_problem.fops
    fops_s = short_problem.fops
    pl = PoissonProblem(
        A=long_problem.A, rhs=long_problem.rhs,
        initial_guess=np.asarray(lambda_prev, dtype=np.float64),
        pure_neumann=long_problem.pure_neumann,
        precond_diag=long_problem.precond_diag,
        fops=fops_l, u_star=long_problem.u_star,
    )
    if pl.pure_neumann:
        pl.initial_guess = pl.initial_guess - pl.initial_guess.mean()
    sol_l = cg_solve(pl, tol=tol)
    sol_s = cg_solve(short_problem, tol=tol)
    u_l = project_velocity(fops_l, long_problem.u_star, sol_l.p)
    u_s = project_velocity(fops_s, short_problem.u_star, sol_s.p)
    scale = max(float(np.max(np.abs(u_l))), float(np.max(np.abs(u_s))), 1e-30)
    return float(np.max(np.abs(u_l - u_s))) <= 10.0 * tol * scale
