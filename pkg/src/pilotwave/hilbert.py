"""Finite-dimensional operator algebra and value-map impossibility checks.

A value map would assign every observable an eigenvalue, multiplicatively
and additively consistent on commuting pairs.  Two machine-checkable
obstructions are built here: the spin-1 triad coloring problem over rays in
R^3 (each orthogonal triple of squared spin components must take the values
1, 1, 0 in some order -- unsatisfiable over the 33-ray Peres configuration)
and the nine two-qubit observables of the magic square, whose six product
constraints admit none of the 512 sign assignments.
"""

from __future__ import annotations

import itertools
import json
import time
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

HERMITIAN_TOL = 1e-12
ORTHO_TOL = 1e-10


class FiniteState:
    """Unit vector in C^N."""

    def __init__(self, amplitudes):
        v = np.asarray(amplitudes, complex).ravel()
        n = np.linalg.norm(v)
        if abs(n - 1.0) > 1e-12:
            raise ConfigError(f"state norm {n} is not 1 within 1e-12")
        self.amplitudes = v

    @property
    def dim(self):
        return len(self.amplitudes)

    def overlap(self, other):
        return complex(np.vdot(self.amplitudes, other.amplitudes))


class HermitianOperator:
    """Dense Hermitian matrix with a deterministic eigendecomposition."""

    def __init__(self, matrix):
        m = np.asarray(matrix, complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ConfigError("operator must be a square matrix")
        if np.max(np.abs(m - m.conj().T)) > HERMITIAN_TOL:
            raise ConfigError("matrix is not Hermitian within 1e-12")
        self.matrix = m

    @property
    def dim(self):
        return self.matrix.shape[0]

    def eigendecompose(self):
        """Ascending eigenvalues and phase-fixed orthonormal eigenvectors.

        Phase convention: the first component of each eigenvector larger than
        1e-8 in magnitude is made real positive, so repeated runs (and equal
        matrices) decompose identically.
        """
        vals, vecs = np.linalg.eigh(self.matrix)
        for j in range(vecs.shape[1]):
            col = vecs[:, j]
            nz = np.flatnonzero(np.abs(col) > 1e-8)
            if len(nz):
                phase = col[nz[0]] / abs(col[nz[0]])
                vecs[:, j] = col / phase
        recon = (vecs * vals) @ vecs.conj().T
        if np.max(np.abs(recon - self.matrix)) > 1e-10:
            raise ConfigError("eigendecomposition failed to reconstruct the matrix")
        return vals, vecs

    def expectation(self, state):
        return float(np.real(np.vdot(state.amplitudes, self.matrix @ state.amplitudes)))

    def commutes_with(self, other, tol=HERMITIAN_TOL):
        c = self.matrix @ other.matrix - other.matrix @ self.matrix
        return float(np.max(np.abs(c))) <= tol

    def __matmul__(self, other):
        return self.matrix @ other.matrix


def eigendecompose(op):
    """Module-level convenience wrapper."""
    return op.eigendecompose()


# ---------------------------------------------------------------------------
# Spin-1 machinery


def spin1_matrices():
    """Standard spin-1 generators in the S_z eigenbasis (m = +1, 0, -1)."""
    s = 1 / np.sqrt(2)
    sx = np.array([[0, s, 0], [s, 0, s], [0, s, 0]], complex)
    sy = np.array([[0, -1j * s, 0], [1j * s, 0, -1j * s], [0, 1j * s, 0]], complex)
    sz = np.diag([1.0, 0.0, -1.0]).astype(complex)
    return sx, sy, sz


def spin1_squares(frame):
    """Squared spin components along an orthonormal frame (u, v, w) in R^3.

    Each square has eigenvalues {0, 1, 1}; squares along orthogonal
    directions commute; the three sum to twice the identity.
    """
    frame = np.asarray(frame, float)
    if frame.shape != (3, 3):
        raise ConfigError("frame must be three vectors in R^3")
    gram = frame @ frame.T
    if np.max(np.abs(gram - np.eye(3))) > ORTHO_TOL:
        raise ConfigError("frame is not orthonormal within 1e-10")
    sx, sy, sz = spin1_matrices()
    out = []
    for direction in frame:
        s_dir = direction[0] * sx + direction[1] * sy + direction[2] * sz
        out.append(HermitianOperator(s_dir @ s_dir))
    return tuple(out)


# ---------------------------------------------------------------------------
# Ray hypergraphs and value assignments


@dataclass
class ContextHypergraph:
    """Rays in R^3 with their orthogonality contexts.

    Contexts are the complete orthogonal triads found within the ray set plus
    the orthogonal pairs not contained in any such triad.  A pair is a
    context because any two orthogonal rays extend to a full triad in R^3
    (the completing direction exists whether or not it is listed), which
    forbids assigning 0 to both.
    """

    rays: np.ndarray
    triads: list
    pairs: list

    @classmethod
    def from_rays(cls, rays, tol=ORTHO_TOL):
        rays = np.asarray(rays, float)
        if rays.ndim != 2 or rays.shape[1] != 3:
            raise ConfigError("rays must be an (m, 3) array")
        norms = np.linalg.norm(rays, axis=1)
        if np.any(norms == 0):
            raise ConfigError("zero ray")
        rays = rays / norms[:, None]
        # identify rays equal up to sign
        for i, j in itertools.combinations(range(len(rays)), 2):
            if min(np.linalg.norm(rays[i] - rays[j]),
                   np.linalg.norm(rays[i] + rays[j])) < tol:
                raise ConfigError(f"rays {i} and {j} coincide up to sign")
        dots = np.abs(rays @ rays.T)
        ortho = dots < tol
        triads = [
            (a, b, c)
            for a, b, c in itertools.combinations(range(len(rays)), 3)
            if ortho[a, b] and ortho[a, c] and ortho[b, c]
        ]
        in_triad = set()
        for t in triads:
            in_triad.update(itertools.combinations(t, 2))
        pairs = [
            p
            for p in itertools.combinations(range(len(rays)), 2)
            if ortho[p] and p not in in_triad
        ]
        return cls(rays=rays, triads=triads, pairs=pairs)

    @property
    def size(self):
        return len(self.rays)

    def contexts(self):
        return [tuple(t) for t in self.triads] + [tuple(p) for p in self.pairs]


@dataclass
class ValueAssignment:
    """Candidate map ray index -> {0, 1} (value of the squared spin component)."""

    values: dict

    def value(self, ray_index):
        return self.values[ray_index]

    def covers(self, hypergraph):
        return all(i in self.values for i in range(hypergraph.size))


def check_value_map(assignment, hypergraph):
    """All triad/pair constraint violations of a complete assignment.

    A triad must carry the values (1, 1, 0) in some order (the squares sum
    to 2); an orthogonal pair must not be (0, 0).  Returns a list of
    (context, values, reason) tuples, empty when the assignment is valid.
    """
    if not assignment.covers(hypergraph):
        raise ConfigError("assignment does not cover every ray")
    violations = []
    for t in hypergraph.triads:
        vals = tuple(assignment.value(i) for i in t)
        if sorted(vals) != [0, 1, 1]:
            violations.append((t, vals, "triad values must be a permutation of (1, 1, 0)"))
    for p in hypergraph.pairs:
        vals = tuple(assignment.value(i) for i in p)
        if vals == (0, 0):
            violations.append((p, vals, "orthogonal rays cannot both take value 0"))
    return violations


def check_operator_value_map(values, operators, commuting_pairs):
    """Eigenvalue + product/sum rule checks for operator-keyed value maps.

    ``values`` maps operator keys to assigned reals; for a commuting pair
    (a, b), product and sum rules are checked whenever keys "a*b" or "a+b"
    are present in both ``values`` and ``operators``.
    """
    violations = []
    for key, val in values.items():
        if key not in operators:
            continue
        vals, _ = operators[key].eigendecompose()
        if np.min(np.abs(vals - val)) > 1e-9:
            violations.append((key, val, "assigned value is not an eigenvalue"))
    for a, b in commuting_pairs:
        if not operators[a].commutes_with(operators[b]):
            violations.append(((a, b), None, "pair does not commute"))
            continue
        prod_key, sum_key = f"{a}*{b}", f"{a}+{b}"
        if prod_key in values:
            if abs(values[prod_key] - values[a] * values[b]) > 1e-9:
                violations.append((prod_key, values[prod_key], "product rule violated"))
        if sum_key in values:
            if abs(values[sum_key] - (values[a] + values[b])) > 1e-9:
                violations.append((sum_key, values[sum_key], "sum rule violated"))
    return violations


# ---------------------------------------------------------------------------
# Exhaustive coloring search


@dataclass
class SearchResult:
    satisfiable: bool
    witness: dict = None
    nodes_visited: int = 0
    elapsed: float = 0.0
    witness_count: int = None

    def to_dict(self):
        return {
            "verdict": "Satisfiable" if self.satisfiable else "Unsatisfiable",
            "witness": None if self.witness is None
            else {str(k): v for k, v in sorted(self.witness.items())},
            "nodes_visited": self.nodes_visited,
            "elapsed_seconds": self.elapsed,
            "witness_count": self.witness_count,
        }

    def save_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def ks_search(hypergraph, count_all=False, parallel=False):
    """Complete backtracking search for a valid {0,1} coloring.

    Rays are ordered most-constrained-first (by context membership); a ray
    shared between contexts receives a single value.  Unsatisfiable is
    returned only after the whole tree is exhausted.  ``count_all``
    enumerates every witness instead of stopping at the first.
    ``parallel`` splits the root branch over a thread pool; the verdict is
    identical by construction.
    """
    m = hypergraph.size
    triads_of = [[] for _ in range(m)]
    for t in hypergraph.triads:
        for r in t:
            triads_of[r].append(t)
    pairs_of = [[] for _ in range(m)]
    for p in hypergraph.pairs:
        for r in p:
            pairs_of[r].append(p)
    order = sorted(range(m), key=lambda r: -(len(triads_of[r]) + len(pairs_of[r])))
    start = time.perf_counter()

    def run_branch(first_value):
        values = {}
        stats = {"nodes": 0, "count": 0}
        witness = [None]

        def consistent(r):
            v = values
            for t in triads_of[r]:
                assigned = [v[x] for x in t if x in v]
                zeros = assigned.count(0)
                if zeros > 1:
                    return False
                if len(assigned) == 3 and zeros != 1:
                    return False
            for p in pairs_of[r]:
                assigned = [v[x] for x in p if x in v]
                if len(assigned) == 2 and assigned == [0, 0]:
                    return False
            return True

        def rec(i):
            stats["nodes"] += 1
            if i == m:
                stats["count"] += 1
                if witness[0] is None:
                    witness[0] = dict(values)
                return not count_all
            r = order[i]
            for v in (first_value,) if i == 0 else (1, 0):
                values[r] = v
                if consistent(r) and rec(i + 1):
                    return True
                del values[r]
            return False

        rec(0)
        return stats, witness[0]

    if parallel:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=2) as pool:
            branches = list(pool.map(run_branch, (1, 0)))
    else:
        branches = [run_branch(1), run_branch(0)]

    nodes = sum(b[0]["nodes"] for b in branches)
    count = sum(b[0]["count"] for b in branches)
    witness = next((b[1] for b in branches if b[1] is not None), None)
    elapsed = time.perf_counter() - start
    return SearchResult(
        satisfiable=witness is not None,
        witness=witness,
        nodes_visited=nodes,
        elapsed=elapsed,
        witness_count=count if count_all else None,
    )


# ---------------------------------------------------------------------------
# The 33-ray configuration


def peres_33_rays():
    """The 33 directions with components from {0, +-1, +-sqrt(2)}.

    Up to sign and normalization these are the permutations of (0, 0, 1),
    (0, 1, +-1), (0, 1, +-sqrt 2) and (1, +-1, +-sqrt 2): 3 + 6 + 12 + 12
    rays whose triad and orthogonal-pair constraints admit no coloring.
    """
    r2 = np.sqrt(2.0)
    rays = []
    seen = set()
    for family in [(0, 0, 1), (0, 1, 1), (0, 1, r2), (1, 1, r2)]:
        for perm in set(itertools.permutations(family)):
            for signs in itertools.product((1, -1), repeat=3):
                v = np.array([s * c for s, c in zip(signs, perm)], float)
                u = v / np.linalg.norm(v)
                for comp in u:
                    if abs(comp) > 1e-12:
                        if comp < 0:
                            u = -u
                        break
                key = tuple(np.round(u, 9))
                if key not in seen:
                    seen.add(key)
                    rays.append(u)
    out = np.array(rays)
    assert out.shape == (33, 3)
    return out


def parse_ray_file(text):
    """Ray-set file: one ray per line (three reals), '#' comments, and an
    optional [contexts] section listing contexts by ray line indices."""
    rays = []
    contexts = []
    section = "rays"
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.lower() == "[contexts]":
            section = "contexts"
            continue
        parts = line.split()
        if section == "rays":
            if len(parts) != 3:
                raise ConfigError(f"ray line needs three components: {raw!r}")
            rays.append([float(p) for p in parts])
        else:
            idx = [int(p) for p in parts]
            if len(idx) not in (2, 3):
                raise ConfigError(f"context line needs 2 or 3 indices: {raw!r}")
            contexts.append(tuple(idx))
    if not rays:
        raise ConfigError("no rays in file")
    rays = np.asarray(rays, float)
    if not contexts:
        return ContextHypergraph.from_rays(rays)
    rays = rays / np.linalg.norm(rays, axis=1)[:, None]
    triads = [c for c in contexts if len(c) == 3]
    pairs = [c for c in contexts if len(c) == 2]
    for c in contexts:
        if max(c) >= len(rays) or min(c) < 0:
            raise ConfigError(f"context {c} references a missing ray")
    return ContextHypergraph(rays=rays, triads=triads, pairs=pairs)


def load_ray_file(path):
    with open(path) as fh:
        return parse_ray_file(fh.read())


# ---------------------------------------------------------------------------
# The two-qubit magic square


def _pauli():
    i2 = np.eye(2, dtype=complex)
    x = np.array([[0, 1], [1, 0]], complex)
    y = np.array([[0, -1j], [1j, 0]], complex)
    z = np.array([[1, 0], [0, -1]], complex)
    return i2, x, y, z


def mermin_square():
    """The 3x3 grid of two-qubit observables with product constraints.

    Rows multiply to +1; columns to +1, +1, -1.  Every row and column is a
    commuting triple, so a value map would have to respect all six signs at
    once -- and no assignment of +-1 to the nine observables does.
    """
    i2, x, y, z = _pauli()
    grid = [
        [np.kron(x, i2), np.kron(i2, x), np.kron(x, x)],
        [np.kron(i2, y), np.kron(y, i2), np.kron(y, y)],
        [np.kron(x, y), np.kron(y, x), np.kron(z, z)],
    ]
    names = [
        ["X1", "X2", "XX"],
        ["Y2", "Y1", "YY"],
        ["XY", "YX", "ZZ"],
    ]
    ops = [[HermitianOperator(m) for m in row] for row in grid]
    return ops, names


@dataclass
class MerminReport:
    commuting_ok: bool
    identity_residual: float
    row_signs: tuple
    col_signs: tuple
    satisfying_assignments: int
    total_assignments: int
    max_satisfiable_constraints: int

    def to_dict(self):
        return {
            "commuting_ok": self.commuting_ok,
            "identity_residual": self.identity_residual,
            "row_signs": list(self.row_signs),
            "col_signs": list(self.col_signs),
            "satisfying_assignments": self.satisfying_assignments,
            "total_assignments": self.total_assignments,
            "max_satisfiable_constraints": self.max_satisfiable_constraints,
        }


def count_sign_assignments(row_signs, col_signs, drop=()):
    """Brute-force count of +-1 grids matching the given product signs.

    ``drop`` skips constraint indices (0-2 rows, 3-5 columns), used to show
    that any five of the six constraints are satisfiable.
    """
    count = 0
    for bits in itertools.product((1, -1), repeat=9):
        v = np.array(bits).reshape(3, 3)
        ok = True
        for r in range(3):
            if r in drop:
                continue
            if v[r, 0] * v[r, 1] * v[r, 2] != row_signs[r]:
                ok = False
                break
        if ok:
            for c in range(3):
                if 3 + c in drop:
                    continue
                if v[0, c] * v[1, c] * v[2, c] != col_signs[c]:
                    ok = False
                    break
        if ok:
            count += 1
    return count


def mermin_square_check():
    """Verify the square's operator identities, then exhaust all 512 sign maps."""
    ops, _ = mermin_square()
    eye = np.eye(4)
    residual = 0.0
    commuting = True
    row_signs, col_signs = [], []
    for r in range(3):
        a, b, c = ops[r]
        commuting &= a.commutes_with(b) and b.commutes_with(c) and a.commutes_with(c)
        prod = a.matrix @ b.matrix @ c.matrix
        sign = int(np.sign(np.real(prod[0, 0])))
        residual = max(residual, float(np.max(np.abs(prod - sign * eye))))
        row_signs.append(sign)
    for col in range(3):
        a, b, c = (ops[0][col], ops[1][col], ops[2][col])
        commuting &= a.commutes_with(b) and b.commutes_with(c) and a.commutes_with(c)
        prod = a.matrix @ b.matrix @ c.matrix
        sign = int(np.sign(np.real(prod[0, 0])))
        residual = max(residual, float(np.max(np.abs(prod - sign * eye))))
        col_signs.append(sign)
    if residual > 1e-12 or not commuting:
        raise ConfigError("magic square operator identities failed verification")

    satisfying = count_sign_assignments(row_signs, col_signs)
    best_five = max(
        count_sign_assignments(row_signs, col_signs, drop=(k,)) for k in range(6)
    )
    return MerminReport(
        commuting_ok=commuting,
        identity_residual=residual,
        row_signs=tuple(row_signs),
        col_signs=tuple(col_signs),
        satisfying_assignments=satisfying,
        total_assignments=512,
        max_satisfiable_constraints=5 if satisfying == 0 and best_five > 0 else 6,
    )
