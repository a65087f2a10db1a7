"""Maximally entangled states, mirrored observables, and the composed
perfect-correlation argument.

On a Schmidt-uniform state, every observable O on factor 1 owns a partner
observable on factor 2 with the same eigenvalues whose measured outcomes
agree with O's in every single trial.  Assuming locality, those
pre-correlated outcomes would constitute a value map over all observables
of the factor space; the magic-square obstruction rules such a map out in
dimension four, leaving nonlocality as the only standing option.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .hilbert import HermitianOperator, mermin_square, mermin_square_check

ORTHO_TOL = 1e-12
EIGEN_TOL = 1e-10


class MaxEntangledState:
    """(1/sqrt N) sum_n psi_n (x) phi_n for orthonormal bases psi, phi.

    Bases are stored as matrices whose columns are the basis states.  The
    reduced density matrix on either factor is I/N, which is what makes the
    observable correspondence below exist for every O at once.
    """

    def __init__(self, basis_1, basis_2):
        b1 = np.asarray(basis_1, complex)
        b2 = np.asarray(basis_2, complex)
        if b1.shape != b2.shape or b1.ndim != 2 or b1.shape[0] != b1.shape[1]:
            raise ConfigError("bases must be square matrices of equal dimension")
        n = b1.shape[0]
        for name, b in (("basis_1", b1), ("basis_2", b2)):
            gram = b.conj().T @ b
            if np.max(np.abs(gram - np.eye(n))) > ORTHO_TOL:
                raise ConfigError(f"{name} is not orthonormal within 1e-12")
        self.basis_1 = b1
        self.basis_2 = b2
        self.dim = n
        rho = self.reduced_density(1)
        if np.max(np.abs(rho - np.eye(n) / n)) > EIGEN_TOL:
            raise ConfigError("reduced density matrix is not I/N")

    @classmethod
    def from_computational(cls, n):
        return cls(np.eye(n), np.eye(n))

    @classmethod
    def singlet(cls):
        """The two-spin antisymmetric state via its Schmidt-form bases:
        psi = (|up>, -|down>), phi = (|down>, |up>)."""
        up = np.array([1.0, 0.0])
        down = np.array([0.0, 1.0])
        basis_1 = np.column_stack([up, -down])
        basis_2 = np.column_stack([down, up])
        return cls(basis_1, basis_2)

    def vector(self):
        """The state in C^(N^2), factor-1-major ordering."""
        v = np.zeros(self.dim**2, complex)
        for k in range(self.dim):
            v += np.kron(self.basis_1[:, k], self.basis_2[:, k])
        return v / np.sqrt(self.dim)

    def reduced_density(self, side):
        psi = np.zeros((self.dim, self.dim), complex)
        for k in range(self.dim):
            psi += np.outer(self.basis_1[:, k], self.basis_2[:, k])
        psi /= np.sqrt(self.dim)
        if side == 1:
            return psi @ psi.conj().T
        return psi.T @ psi.conj()

    def norm(self):
        return float(np.linalg.norm(self.vector()))


@dataclass
class CorrespondencePair:
    """O on factor 1 and its equal-spectrum partner on factor 2.

    ``aligned_1``/``aligned_2`` hold the paired eigenbases: column k of each
    is an eigenvector at eigenvalues[k], and the state expands Schmidt-wise
    over exactly these columns.
    """

    o: HermitianOperator
    o_tilde: HermitianOperator
    eigenvalues: np.ndarray
    aligned_1: np.ndarray
    aligned_2: np.ndarray

    def verify(self):
        for op, basis in ((self.o, self.aligned_1), (self.o_tilde, self.aligned_2)):
            resid = op.matrix @ basis - basis * self.eigenvalues
            if np.max(np.abs(resid)) > EIGEN_TOL:
                raise ConfigError("correspondence eigenpair residual exceeds 1e-10")
        return True


def correspond(op, state, side=1):
    """The partner observable on the other factor (same eigenvalues).

    Expanding the state over O's eigenbasis u_k rotates the partner basis to
    w_k = sum_n conj(U_nk) phi_n with U the basis-change matrix; the partner
    operator is sum_k lambda_k |w_k><w_k|.  The construction is well defined
    for degenerate O too: the conjugation map sends eigenspaces to
    eigenspaces whole, so the partner does not depend on the basis chosen
    inside a degenerate block (the block's projector is what transfers).
    """
    if op.dim != state.dim:
        raise ConfigError("operator dimension does not match the state")
    vals, vecs = op.eigendecompose()
    if side == 1:
        u = state.basis_1.conj().T @ vecs       # coordinates of u_k in basis_1
        partner_basis = state.basis_2 @ u.conj()
        o_tilde = HermitianOperator((partner_basis * vals) @ partner_basis.conj().T)
        pair = CorrespondencePair(
            o=op, o_tilde=o_tilde, eigenvalues=vals,
            aligned_1=vecs, aligned_2=partner_basis,
        )
    elif side == 2:
        u = state.basis_2.conj().T @ vecs
        partner_basis = state.basis_1 @ u.conj()
        partner = HermitianOperator((partner_basis * vals) @ partner_basis.conj().T)
        pair = CorrespondencePair(
            o=partner, o_tilde=op, eigenvalues=vals,
            aligned_1=partner_basis, aligned_2=vecs,
        )
    else:
        raise ConfigError("side must be 1 or 2")
    pair.verify()
    return pair


# ---------------------------------------------------------------------------
# Sampled joint measurements


@dataclass
class MeasurementRecord:
    trial: int
    first_side: int
    outcome_side1: float
    outcome_side2: float
    post_state: str

    def csv_row(self):
        return (f"{self.trial},{self.first_side},{self.outcome_side1!r},"
                f"{self.outcome_side2!r},{self.post_state}")


def save_records_csv(records, path):
    with open(path, "w") as fh:
        fh.write("trial,first_side,outcome_side1,outcome_side2,post_state\n")
        for r in records:
            fh.write(r.csv_row() + "\n")


def _distinct_eigenvalues(vals, tol=1e-9):
    levels = []
    for v in vals:
        if not levels or abs(v - levels[-1]) > tol:
            levels.append(float(v))
    return levels


def _measurement_tables(state, pair, order):
    """Exact Born tables: first-outcome probabilities, conditioned second
    outcomes, and post-measurement product states per outcome level."""
    psi = state.vector()
    n = state.dim
    vals = pair.eigenvalues
    levels = _distinct_eigenvalues(vals)
    first_side = 2 if order == "second_first" else 1

    tables = []
    for level in levels:
        members = np.flatnonzero(np.abs(vals - level) <= 1e-9)
        if first_side == 2:
            basis = pair.aligned_2[:, members]
            proj = basis @ basis.conj().T
            big = np.kron(np.eye(n), proj)
        else:
            basis = pair.aligned_1[:, members]
            proj = basis @ basis.conj().T
            big = np.kron(proj, np.eye(n))
        collapsed = big @ psi
        p = float(np.real(np.vdot(psi, collapsed)))
        post = collapsed / np.linalg.norm(collapsed) if p > 1e-15 else None

        # second measurement on the collapsed state
        if post is not None:
            second = {}
            for level2 in levels:
                members2 = np.flatnonzero(np.abs(vals - level2) <= 1e-9)
                if first_side == 2:
                    basis2 = pair.aligned_1[:, members2]
                    big2 = np.kron(basis2 @ basis2.conj().T, np.eye(n))
                else:
                    basis2 = pair.aligned_2[:, members2]
                    big2 = np.kron(np.eye(n), basis2 @ basis2.conj().T)
                second[level2] = float(np.real(np.vdot(post, big2 @ post)))
        else:
            second = {lev: 0.0 for lev in levels}
        post_label = (
            f"psi_{members[0]} x phi_{members[0]}" if len(members) == 1
            else f"subspace(lambda={level:g})"
        )
        tables.append({
            "level": level, "probability": p, "second": second,
            "post_label": post_label, "post": post, "members": members,
        })
    total = sum(t["probability"] for t in tables)
    if abs(total - 1.0) > 1e-9:
        raise ConfigError(f"Born probabilities sum to {total}, not 1")
    return tables, first_side


def exact_joint_distribution(state, op, order="second_first"):
    """Joint outcome probabilities P(side1 value, side2 value), exact."""
    pair = correspond(op, state)
    tables, first_side = _measurement_tables(state, pair, order)
    joint = {}
    for t in tables:
        for level2, q in t["second"].items():
            if first_side == 2:
                key = (level2, t["level"])
            else:
                key = (t["level"], level2)
            joint[key] = joint.get(key, 0.0) + t["probability"] * q
    return joint


def sample_epr(state, op, trials, seed, order="second_first"):
    """Measure the pair observable then the original, trial by trial.

    The first side's outcome is Born-sampled; the second side's outcome is
    computed from the collapsed state (it concentrates on the same
    eigenvalue -- perfect correlation -- which the sampler verifies rather
    than assumes).
    """
    if order not in ("second_first", "first_first"):
        raise ConfigError("order must be 'second_first' or 'first_first'")
    trials = int(trials)
    if trials < 1:
        raise ConfigError("need at least one trial")
    pair = correspond(op, state)
    tables, first_side = _measurement_tables(state, pair, order)

    rng = np.random.default_rng(int(seed))
    probs = np.array([t["probability"] for t in tables])
    probs = probs / probs.sum()
    draws = rng.choice(len(tables), size=trials, p=probs)

    records = []
    for i, d in enumerate(draws):
        t = tables[d]
        second_probs = t["second"]
        level2 = max(second_probs, key=second_probs.get)
        if second_probs[level2] < 1.0 - 1e-9:
            raise ConfigError(
                f"perfect correlation violated: P(second={level2}) = "
                f"{second_probs[level2]}"
            )
        first_val, second_val = t["level"], level2
        side1 = second_val if first_side == 2 else first_val
        side2 = first_val if first_side == 2 else second_val
        records.append(MeasurementRecord(
            trial=i, first_side=first_side,
            outcome_side1=side1, outcome_side2=side2,
            post_state=t["post_label"],
        ))
    return records


def collapse_product_state(state, op, outcome_index):
    """Post-measurement product state psi_k (x) phi_k for a nondegenerate level."""
    pair = correspond(op, state)
    return np.kron(pair.aligned_1[:, outcome_index], pair.aligned_2[:, outcome_index])


# ---------------------------------------------------------------------------
# CHSH


def spin_projection(theta):
    """Spin along an angle in the x-z plane: cos(theta) sigma_z + sin(theta) sigma_x."""
    return HermitianOperator(np.array(
        [[np.cos(theta), np.sin(theta)], [np.sin(theta), -np.cos(theta)]], complex
    ))


@dataclass
class CHSHResult:
    angles: tuple
    correlations: dict
    exact_S: float
    sampled_S: float = None
    sampled_stderr: float = None
    trials: int = 0

    def to_dict(self):
        return {
            "angles": list(self.angles),
            "correlations": dict(self.correlations),
            "exact_S": self.exact_S,
            "sampled_S": self.sampled_S,
            "sampled_stderr": self.sampled_stderr,
            "trials": self.trials,
        }


def _joint_spin_probs(state, theta_a, theta_b):
    psi = state.vector()
    a = spin_projection(theta_a).matrix
    b = spin_projection(theta_b).matrix
    eye = np.eye(2)
    probs = {}
    for s in (+1, -1):
        pa = (eye + s * a) / 2
        for t in (+1, -1):
            pb = (eye + t * b) / 2
            probs[(s, t)] = float(np.real(np.vdot(psi, np.kron(pa, pb) @ psi)))
    return probs


def chsh_quantum(state, angles, trials=0, seed=None):
    """CHSH combination S = E(a,b) - E(a,b') + E(a',b) + E(a',b').

    Correlations come from exact Born probabilities of joint spin
    projections; a sampled estimate at ``trials`` per setting pair is
    appended when requested.
    """
    if state.dim != 2:
        raise ConfigError("CHSH needs a two-dimensional (qubit) state")
    if len(angles) != 4:
        raise ConfigError("angles must be (a, b, a_prime, b_prime)")
    a, b, ap, bp = (float(x) for x in angles)
    pairs = {"ab": (a, b), "ab'": (a, bp), "a'b": (ap, b), "a'b'": (ap, bp)}
    e = {}
    probs = {}
    for key, (ta, tb) in pairs.items():
        p = _joint_spin_probs(state, ta, tb)
        probs[key] = p
        e[key] = sum(s * t * v for (s, t), v in p.items())
    exact = e["ab"] - e["ab'"] + e["a'b"] + e["a'b'"]


    sampled = stderr = None
    if trials:
        rng = np.random.default_rng(int(seed) if seed is not None else 0)
        est, var = {}, 0.0
        for key, p in probs.items():
            cells = list(p)
            weights = np.array([p[c] for c in cells])
            weights = weights / weights.sum()
            draws = rng.choice(len(cells), size=trials, p=weights)
            vals = np.array([cells[d][0] * cells[d][1] for d in draws], float)
            est[key] = float(vals.mean())
            var += (1.0 - e[key] ** 2) / trials
        sampled = est["ab"] - est["ab'"] + est["a'b"] + est["a'b'"]
        stderr = float(np.sqrt(var))

    return CHSHResult(
        angles=(a, b, ap, bp),
        correlations={k: float(v) for k, v in e.items()},
        exact_S=float(exact),
        sampled_S=sampled,
        sampled_stderr=stderr,
        trials=int(trials),
    )


def enumerate_local_strategies():
    """All 16 deterministic two-setting response pairs and their S values.

    Realizes the pre-determined-results hypothesis exhaustively; the maximum
    of |S| over every strategy is exactly 2.
    """
    table = []
    best = None
    for a1 in (+1, -1):
        for a2 in (+1, -1):
            for b1 in (+1, -1):
                for b2 in (+1, -1):
                    s = a1 * b1 - a1 * b2 + a2 * b1 + a2 * b2
                    entry = {"a": (a1, a2), "b": (b1, b2), "S": s}
                    table.append(entry)
                    if best is None or abs(s) > abs(best["S"]):
                        best = entry
    return {"max_abs_S": max(abs(t["S"]) for t in table),
            "witness": best, "strategies": table}


def evaluate_strategy(strategy):
    a1, a2 = strategy["a"]
    b1, b2 = strategy["b"]
    return a1 * b1 - a1 * b2 + a2 * b1 + a2 * b2


# ---------------------------------------------------------------------------
# The composed argument


@dataclass
class StructuredReport:
    dim: int
    seed: int
    steps: list = field(default_factory=list)
    conclusion: str = ""

    @property
    def all_passed(self):
        return all(s["pass"] for s in self.steps)

    def to_dict(self):
        return {
            "dim": self.dim,
            "seed": self.seed,
            "steps": self.steps,
            "conclusion": self.conclusion,
            "all_passed": self.all_passed,
        }

    def save_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def schroedinger_theorem_demo(dim=4, trials=1000, seed=0):
    """Perfect correlations + locality would yield a value map; none exists.

    Steps: (i) build the Schmidt-uniform state at the given dimension;
    (ii) verify sampled perfect correlation for each magic-square observable
    through its factor-2 partner; (iii) record the conditional: locality
    plus those correlations imply a value map over the family; (iv) exhaust
    the 512 sign assignments to show no such map exists; (v) conclude that
    the locality premise fails.  The value-map obstruction machinery lives
    at dimension four, so only dim == 4 is runnable; smaller spaces are
    rejected outright.
    """
    if dim < 4:
        raise ConfigError(
            "the value-map obstruction needs dimension at least 4; "
            f"dim={dim} cannot carry the argument"
        )
    if dim != 4:
        raise ConfigError("the observable family used here is defined at dim = 4")

    report = StructuredReport(dim=dim, seed=int(seed))
    state = MaxEntangledState.from_computational(dim)
    rho = state.reduced_density(1)
    step1_ok = bool(np.max(np.abs(rho - np.eye(dim) / dim)) < EIGEN_TOL)
    report.steps.append({
        "step": 1,
        "title": "maximally entangled state",
        "detail": f"dim {dim}, reduced density = I/{dim}",
        "pass": step1_ok,
    })

    ops, names = mermin_square()
    correlated = 0
    total = 0
    rng = np.random.default_rng(int(seed))
    for row, row_names in zip(ops, names):
        for op, name in zip(row, row_names):
            total += 1
            records = sample_epr(state, op, trials, seed=int(rng.integers(2**63)))
            equal = all(r.outcome_side1 == r.outcome_side2 for r in records)
            if equal:
                correlated += 1
    step2_ok = correlated == total
    report.steps.append({
        "step": 2,
        "title": "sampled perfect correlations",
        "detail": f"{correlated}/{total} observables agreed on both sides in "
                  f"{trials} trials each",
        "pass": step2_ok,
    })

    report.steps.append({
        "step": 3,
        "title": "conditional",
        "detail": "locality + perfect correlations imply a value map "
                  "assigning every observable its pre-determined outcome",
        "pass": True,
    })

    mermin = mermin_square_check()
    step4_ok = mermin.satisfying_assignments == 0
    report.steps.append({
        "step": 4,
        "title": "value-map exhaustion",
        "detail": f"{mermin.satisfying_assignments}/{mermin.total_assignments} "
                  "sign assignments satisfy all six product constraints",
        "pass": step4_ok,
    })

    report.steps.append({
        "step": 5,
        "title": "modus tollens",
        "detail": "no value map exists, so the conjunction fails; the "
                  "correlations are verified, so locality is the premise "
                  "that falls",
        "pass": step2_ok and step4_ok,
    })
    report.conclusion = (
        "locality refuted under stated premises"
        if report.all_passed else "argument incomplete: a step failed"
    )
    return report
