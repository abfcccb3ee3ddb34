"""Dense cone programs over nonnegative, second-order and PSD cones.

Standard form (the one cvxopt's ``conelp`` expects)::

    minimize    c^T x
    subject to  G x + s = h,   s in L x Q_1 x ... x S_1 x ...
                A x = b

Problems are assembled with :class:`ProgramBuilder`, which takes cone
members as affine maps ``F x + f`` and stores ``G = -F``, ``h = f``.
Blocks may be added in any order; ``build`` sorts them into the
nonnegative / second-order / PSD layout the backend needs and remembers
where each block landed so duals can be read back by handle.
"""

from dataclasses import dataclass, field
from enum import Enum
import math

import numpy as np

try:
    import cvxopt
    from cvxopt import solvers as _cvx_solvers
except ImportError:  # pragma: no cover
    cvxopt = None


class Status(str, Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    MAX_ITER = "MaxIter"
    NUMERICAL_FAILURE = "NumericalFailure"


@dataclass(frozen=True)
class NonNeg:
    dim: int


@dataclass(frozen=True)
class SecondOrder:
    dim: int


@dataclass(frozen=True)
class PSD:
    side: int

    @property
    def dim(self):
        return self.side * self.side


@dataclass
class ConeProgram:
    variable_dim: int
    objective: np.ndarray
    G: np.ndarray
    h: np.ndarray
    cones: list
    A: np.ndarray = None
    b: np.ndarray = None
    slots: dict = field(default_factory=dict)

    def __post_init__(self):
        n = self.variable_dim
        rows = sum(c.dim for c in self.cones)
        if self.objective.shape != (n,):
            raise ValueError("objective length differs from variable_dim")
        if self.G.shape != (rows, n) or self.h.shape != (rows,):
            raise ValueError(f"G/h shapes {self.G.shape}/{self.h.shape} do not match cones ({rows} rows)")
        kinds = [0 if isinstance(c, NonNeg) else 1 if isinstance(c, SecondOrder) else 2 for c in self.cones]
        if kinds != sorted(kinds):
            raise ValueError("cones must be ordered nonnegative, second-order, PSD")
        if self.A is not None and (self.A.shape[1] != n or self.A.shape[0] != self.b.size):
            raise ValueError("equality block has inconsistent shape")

    @property
    def dims(self):
        return {
            "l": sum(c.dim for c in self.cones if isinstance(c, NonNeg)),
            "q": [c.dim for c in self.cones if isinstance(c, SecondOrder)],
            "s": [c.side for c in self.cones if isinstance(c, PSD)],
        }


@dataclass
class ConeSolution:
    status: Status
    x: np.ndarray
    s: np.ndarray
    z: np.ndarray
    y: np.ndarray
    objective: float
    dual_objective: float
    residuals: dict
    iterations: int
    slots: dict = field(default_factory=dict, repr=False)

    @property
    def ok(self):
        return self.status is Status.OPTIMAL

    def usable(self, tol=1e-6):
        """Optimal, or stopped early with residuals and gap below ``tol``."""
        if self.ok:
            return True
        if self.status not in (Status.MAX_ITER, Status.NUMERICAL_FAILURE) or self.x is None:
            return False
        r = self.residuals
        return (r.get("primal", math.inf) <= tol and r.get("dual", math.inf) <= tol
                and r.get("rel_gap", math.inf) <= tol)

    def slack(self, handle):
        lo, hi = self.slots[handle]
        return self.s[lo:hi]

    def dual(self, handle):
        lo, hi = self.slots[handle]
        return self.z[lo:hi]

    def psd_dual(self, handle):
        """Dual of a PSD block as a symmetric matrix."""
        z = self.dual(handle)
        n = int(round(math.sqrt(z.size)))
        Z = z.reshape(n, n, order="F")
        return np.tril(Z) + np.tril(Z, -1).T


class ProgramBuilder:
    """Collect cone blocks; see the module docstring for the sign convention."""

    def __init__(self, num_vars):
        self.n = int(num_vars)
        self.c = np.zeros(self.n)
        self._blocks = []
        self._eq = []

    def _rows(self, F, f):
        F = np.atleast_2d(np.asarray(F, dtype=float))
        f = np.atleast_1d(np.asarray(f, dtype=float)).ravel()
        if F.shape != (f.size, self.n):
            raise ValueError(f"block map has shape {F.shape}, expected ({f.size}, {self.n})")
        return F, f

    def minimize(self, c):
        self.c = np.asarray(c, dtype=float).ravel().copy()
        return self

    def nonneg(self, F, f, name=None):
        """F x + f >= 0 elementwise."""
        F, f = self._rows(F, f)
        return self._add(NonNeg(f.size), F, f, name)

    def soc(self, F, f, name=None):
        """(F x + f)[0] >= ||(F x + f)[1:]||."""
        F, f = self._rows(F, f)
        if f.size < 2:
            raise ValueError("a second-order cone needs at least 2 rows")
        return self._add(SecondOrder(f.size), F, f, name)

    def psd(self, F, f, name=None):
        """mat(F x + f) is PSD; rows are the column-major entries of an n x n matrix."""
        F, f = self._rows(F, f)
        side = int(round(math.sqrt(f.size)))
        if side * side != f.size:
            raise ValueError("PSD block needs a square number of rows")
        return self._add(PSD(side), F, f, name)

    def equal(self, A, b):
        A, b = self._rows(A, b)
        self._eq.append((A, b))

    def _add(self, cone, F, f, name):
        handle = name if name is not None else len(self._blocks)
        self._blocks.append((handle, cone, F, f))
        return handle

    def build(self):
        order = sorted(range(len(self._blocks)),
                       key=lambda j: (0 if isinstance(self._blocks[j][1], NonNeg)
                                      else 1 if isinstance(self._blocks[j][1], SecondOrder) else 2, j))
        G, h, cones, slots, pos = [], [], [], {}, 0
        for j in order:
            handle, cone, F, f = self._blocks[j]
            G.append(-F)
            h.append(f)
            cones.append(cone)
            slots[handle] = (pos, pos + cone.dim)
            pos += cone.dim
        G = np.vstack(G) if G else np.zeros((0, self.n))
        h = np.concatenate(h) if h else np.zeros(0)
        A = b = None
        if self._eq:
            A = np.vstack([e[0] for e in self._eq])
            b = np.concatenate([e[1] for e in self._eq])
        return ConeProgram(self.n, self.c.copy(), G, h, cones, A, b, slots)


DEFAULT_TOL = 1e-8
DEFAULT_MAXITERS = 200


def solve(program, tol=DEFAULT_TOL, maxiters=DEFAULT_MAXITERS, verbose=False):
    """Solve with cvxopt's primal-dual interior-point method."""
    if cvxopt is None:  # pragma: no cover
        raise RuntimeError("cvxopt is required for the conic layer")
    m = lambda a: cvxopt.matrix(np.ascontiguousarray(a, dtype=float))
    kw = {}
    if program.A is not None:
        kw = {"A": m(program.A), "b": m(program.b.reshape(-1, 1))}
    opts = {"abstol": tol, "reltol": tol, "feastol": tol, "maxiters": int(maxiters),
            "show_progress": bool(verbose), "refinement": 1}
    try:
        sol = _cvx_solvers.conelp(m(program.objective.reshape(-1, 1)), m(program.G),
                                  m(program.h.reshape(-1, 1)), program.dims, options=opts, **kw)
    except (ArithmeticError, ValueError) as exc:
        nan = np.full(program.variable_dim, np.nan)
        return ConeSolution(Status.NUMERICAL_FAILURE, nan, None, None, None, math.nan, math.nan,
                            {"error": str(exc)}, -1, program.slots)

    def arr(key):
        v = sol.get(key)
        return None if v is None else np.array(v).ravel()

    raw = sol["status"]
    iters = int(sol.get("iterations", 0))
    if raw == "optimal":
        status = Status.OPTIMAL
    elif raw == "primal infeasible":
        status = Status.INFEASIBLE
    elif raw == "dual infeasible":
        status = Status.UNBOUNDED
    elif iters >= maxiters:
        status = Status.MAX_ITER
    else:
        status = Status.NUMERICAL_FAILURE
    x, s, z, y = arr("x"), arr("s"), arr("z"), arr("y")

    def num(key):
        v = sol.get(key)
        return math.inf if v is None else float(v)

    residuals = {
        "primal": num("primal infeasibility"),
        "dual": num("dual infeasibility"),
        "gap": num("gap"),
        "rel_gap": num("relative gap"),
    }
    if raw == "primal infeasible":
        residuals["certificate"] = num("residual as primal infeasibility certificate")
    if raw == "dual infeasible":
        residuals["certificate"] = num("residual as dual infeasibility certificate")
    if s is not None and z is not None:
        residuals["complementarity"] = float(abs(s @ z))
    return ConeSolution(status, x, s, z, y, num("primal objective"), num("dual objective"),
                        residuals, iters, program.slots)


# ----------------------------------------------------------------------------
# complex Hermitian <-> real symmetric


def hermitian_embed(H, tol=1e-10):
    """[[Re H, -Im H], [Im H, Re H]]; Tr(embed(H) embed(W)) = 2 Re Tr(H W)."""
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError("expected a square matrix")
    if np.max(np.abs(H - H.conj().T), initial=0.0) > tol * max(1.0, np.max(np.abs(H), initial=0.0)):
        raise ValueError("matrix is not Hermitian")
    R, I = H.real, H.imag
    return np.block([[R, -I], [I, R]])


def hermitian_unembed(Z):
    """Inverse of :func:`hermitian_embed`, averaging the redundant blocks."""
    Z = np.asarray(Z, dtype=float)
    n = Z.shape[0] // 2
    A, B, C, D = Z[:n, :n], Z[:n, n:], Z[n:, :n], Z[n:, n:]
    W = 0.5 * (A + D) + 0.5j * (C - B)
    return 0.5 * (W + W.conj().T)


def svec_colmajor(S):
    return np.asarray(S, dtype=float).reshape(-1, order="F")


def dump_program(program, path):
    """Write the standard form as plain text.

    Layout: a header line ``n rows eq``, the cone list, then sections
    ``c``, ``G`` (one row per line), ``h``, and optionally ``A`` / ``b``.
    """
    with open(path, "w") as fh:
        rows = program.G.shape[0]
        eq = 0 if program.A is None else program.A.shape[0]
        fh.write(f"{program.variable_dim} {rows} {eq}\n")
        for c in program.cones:
            fh.write(f"{type(c).__name__} {c.dim if not isinstance(c, PSD) else c.side}\n")
        fh.write("c\n" + " ".join(repr(float(v)) for v in program.objective) + "\n")
        fh.write("G\n")
        for row in program.G:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")
        fh.write("h\n" + " ".join(repr(float(v)) for v in program.h) + "\n")
        if program.A is not None:
            fh.write("A\n")
            for row in program.A:
                fh.write(" ".join(repr(float(v)) for v in row) + "\n")
            fh.write("b\n" + " ".join(repr(float(v)) for v in program.b) + "\n")


def sym_basis(n):
    """Map the n(n+1)/2 lower-triangle entries of a symmetric matrix to its column-major vec."""
    rows, cols = np.tril_indices(n)
    B = np.zeros((n * n, rows.size))
    for j, (r, c) in enumerate(zip(rows, cols)):
        B[r + c * n, j] = 1.0
        B[c + r * n, j] = 1.0
    return B
