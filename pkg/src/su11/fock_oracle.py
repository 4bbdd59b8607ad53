"""Brute-force Fock-space reference simulator for one or two modes.

Density matrices live on the truncated basis ``|n_0, n_1>`` with
``n_k < cutoff`` (mode 0 is the slow index).  Nothing here touches the
phase-space machinery: states are built from Fock amplitudes, unitaries
from their generators, and statistics from operator matrices.  The oracle
is meant for small gain and seed only; every result should be accepted
only after :meth:`FockState.leakage` confirms the cutoff was large enough.
"""
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import sparse
from scipy.linalg import expm
from scipy.special import gammaln

from ._validation import DomainError, check_mode, check_transmission
from .circuit import NLO, Detector, Loss, Observable, Phase, Seed

LEAKAGE_TOL = 1e-6
TRACE_TOL = 1e-9
HERMITIAN_TOL = 1e-10
EIGEN_TOL = 1e-8
MAX_CUTOFF = 30
# extra levels used when building a displacement operator, then cropped
_DISPLACE_PAD = 40


class LeakageError(DomainError):
    """Population reached the top Fock level: the cutoff is too small."""


@dataclass(frozen=True)
class FockState:
    """Density matrix of ``n_modes`` (1 or 2) truncated modes."""

    cutoff: int
    n_modes: int
    density: np.ndarray

    def __post_init__(self):
        if int(self.cutoff) != self.cutoff or self.cutoff < 2:
            raise DomainError(f"cutoff must be an integer >= 2, got {self.cutoff}")
        if self.n_modes not in (1, 2):
            raise DomainError("the oracle handles one or two modes")
        rho = np.asarray(self.density, dtype=complex)
        dim = self.cutoff ** self.n_modes
        if rho.shape != (dim, dim):
            raise DomainError(f"density must be {dim}x{dim}, got {rho.shape}")
        object.__setattr__(self, "density", rho)

    @property
    def dim(self):
        return self.density.shape[0]

    def trace(self):
        return float(np.trace(self.density).real)

    def populations(self, mode):
        """Photon-number distribution of one mode."""
        mode = check_mode(mode, self.n_modes)
        diag = np.diag(self.density).real.reshape((self.cutoff,) * self.n_modes)
        other = tuple(k for k in range(self.n_modes) if k != mode)
        return diag.sum(axis=other) if other else diag

    def leakage(self):
        """Largest top-level population over the modes."""
        return max(float(self.populations(m)[-1]) for m in range(self.n_modes))

    def check(self, leakage_tol=LEAKAGE_TOL):
        """Raise unless trace, hermiticity, positivity and leakage are all fine."""
        if abs(self.trace() - 1.0) > TRACE_TOL:
            raise DomainError(f"trace {self.trace():.12g} differs from 1")
        herm = np.max(np.abs(self.density - self.density.conj().T))
        if herm > HERMITIAN_TOL:
            raise DomainError(f"density is not Hermitian (defect {herm:.3g})")
        # Cholesky of rho + tol*I exists iff every eigenvalue exceeds -tol
        try:
            np.linalg.cholesky(self.density + EIGEN_TOL * np.eye(self.dim))
        except np.linalg.LinAlgError:
            raise DomainError(f"density has an eigenvalue below {-EIGEN_TOL:g}") from None
        leak = self.leakage()
        if leak >= leakage_tol:
            raise LeakageError(f"top Fock level holds {leak:.3g} >= {leakage_tol:g}; raise the cutoff")
        return self


def _check_cutoff(cutoff, n_modes):
    if int(cutoff) != cutoff or cutoff < 2:
        raise DomainError(f"cutoff must be an integer >= 2, got {cutoff}")
    if cutoff > MAX_CUTOFF:
        raise DomainError(f"cutoff {cutoff} exceeds the oracle budget {MAX_CUTOFF}")
    return int(cutoff)


def annihilation(cutoff):
    return np.diag(np.sqrt(np.arange(1, cutoff, dtype=float)), 1)


def fock_vacuum(n_modes, cutoff):
    cutoff = _check_cutoff(cutoff, n_modes)
    rho = np.zeros((cutoff ** n_modes,) * 2, dtype=complex)
    rho[0, 0] = 1.0
    return FockState(cutoff, n_modes, rho)


def coherent_amplitudes(alpha, cutoff):
    """``<n|alpha>`` for ``n < cutoff``."""
    alpha = complex(alpha)
    n = np.arange(cutoff)
    if alpha == 0:
        return (n == 0).astype(complex)
    logmag = -abs(alpha) ** 2 / 2 + n * math.log(abs(alpha)) - 0.5 * gammaln(n + 1)
    return np.exp(logmag) * np.exp(1j * n * np.angle(alpha))


# -- local operators ---------------------------------------------------------

def _local(state, mode, op):
    """``op`` on ``mode`` tensored with identity on the other mode (sparse)."""
    mode = check_mode(mode, state.n_modes)
    op = sparse.csr_matrix(op)
    if state.n_modes == 1:
        return op
    eye = sparse.identity(state.cutoff, format="csr")
    return sparse.kron(op, eye, format="csr") if mode == 0 else sparse.kron(eye, op, format="csr")


def _conjugate(state, U):
    # written as U (U rho)^dag so a sparse U never needs a dense product
    A = U @ state.density
    rho = (U @ A.conj().T).conj().T
    return FockState(state.cutoff, state.n_modes, 0.5 * (rho + rho.conj().T))


@lru_cache(maxsize=64)
def _displacement(cutoff, alpha):
    big = cutoff + _DISPLACE_PAD
    a = annihilation(big)
    D = expm(alpha * a.conj().T - np.conj(alpha) * a)
    return D[:cutoff, :cutoff]


def fock_displace(state, mode, alpha):
    """Apply ``D(alpha)`` to ``mode``.

    The operator is exponentiated in a padded basis and cropped, so its
    low-lying matrix elements are those of the untruncated displacement.
    """
    return _conjugate(state, _local(state, mode, _displacement(state.cutoff, complex(alpha))))


def two_mode_squeeze_unitary(cutoff, r, pump_phase):
    """Dense ``exp(xi a^dag b^dag - xi^* a b)``; see :func:`_squeeze_sparse`."""
    return _squeeze_sparse(int(cutoff), float(r), float(pump_phase)).toarray()


@lru_cache(maxsize=32)
def _squeeze_sparse(cutoff, r, pump_phase):
    """``exp(xi a^dag b^dag - xi^* a b)`` with ``xi = r exp(i pump_phase)``.

    The generator conserves ``n_a - n_b``; each sector is a small
    tridiagonal block exponentiated on its own.
    """
    xi = r * np.exp(1j * pump_phase)
    dim = cutoff * cutoff
    rows, cols, vals = [], [], []
    for diff in range(-(cutoff - 1), cutoff):
        ns = [n for n in range(cutoff) if 0 <= n - diff < cutoff]
        idx = [n * cutoff + (n - diff) for n in ns]
        K = np.zeros((len(ns), len(ns)), dtype=complex)
        for k in range(len(ns) - 1):
            n, m = ns[k], ns[k] - diff
            amp = math.sqrt((n + 1) * (m + 1))
            K[k + 1, k] = xi * amp
            K[k, k + 1] = -np.conj(xi) * amp
        block = expm(K)
        rows.extend(np.repeat(idx, len(idx)))
        cols.extend(np.tile(idx, len(idx)))
        vals.extend(block.reshape(-1))
    return sparse.csr_matrix((vals, (rows, cols)), shape=(dim, dim))


def fock_two_mode_squeeze(state, r, pump_phase=0.0, check=True):
    """Two-mode squeezer ``a -> cosh(r) a + exp(i pump_phase) sinh(r) b^dag``.

    Raises :class:`LeakageError` afterwards when ``check`` is set and the
    cutoff truncated a visible part of the state.
    """
    if state.n_modes != 2:
        raise DomainError("two-mode squeezing needs a two-mode state")
    if r < 0:
        raise DomainError(f"r must be >= 0, got {r}")
    if r == 0:
        return state
    out = _conjugate(state, _squeeze_sparse(state.cutoff, float(r), float(pump_phase)))
    if check and out.leakage() >= LEAKAGE_TOL:
        raise LeakageError(f"cutoff {state.cutoff} too small after squeezing (leakage {out.leakage():.3g})")
    return out


def fock_phase(state, mode, phi):
    """``a -> exp(i phi) a`` on ``mode``."""
    mode = check_mode(mode, state.n_modes)
    n = np.arange(state.cutoff)
    if state.n_modes == 2:
        n = np.repeat(n, state.cutoff) if mode == 0 else np.tile(n, state.cutoff)
    u = np.exp(1j * phi * n)
    return FockState(state.cutoff, state.n_modes, u[:, None] * state.density * u.conj()[None, :])


def loss_kraus(cutoff, eta):
    """Kraus operators ``E_k`` of a beamsplitter to vacuum, ``k < cutoff``."""
    eta = check_transmission(eta)
    ops = []
    for k in range(cutoff):
        E = np.zeros((cutoff, cutoff))
        for n in range(k, cutoff):
            # binomial amplitude for losing k of n photons
            if eta == 0.0:
                amp = 1.0 if n == k else 0.0
            elif eta == 1.0:
                amp = 1.0 if k == 0 else 0.0
            else:
                amp = math.exp(0.5 * (gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)
                                      + (n - k) * math.log(eta) + k * math.log1p(-eta)))
            E[n - k, n] = amp
        ops.append(E)
    return ops


def fock_loss(state, mode, eta):
    """Transmission ``eta`` on ``mode``: vacuum beamsplitter and ancilla trace.

    Implemented with the equivalent Kraus decomposition of that channel.
    """
    eta = check_transmission(eta)
    mode = check_mode(mode, state.n_modes)
    if eta == 1.0:
        return state
    c = state.cutoff
    # superoperator S[(i, j), (k, l)] = sum_k E[i, k] E[j, l]
    S = sparse.csr_matrix(sum(np.einsum("ik,jl->ijkl", E, E)
                              for E in loss_kraus(c, eta)).reshape(c * c, c * c))
    if state.n_modes == 1:
        rho = (S @ state.density.reshape(-1)).reshape(c, c)
    else:
        t = state.density.reshape(c, c, c, c)
        if mode == 0:
            # (a, b, a', b') -> ((a, a'), (b, b'))
            m = (S @ t.transpose(0, 2, 1, 3).reshape(c * c, c * c)).reshape(c, c, c, c)
            rho = m.transpose(0, 2, 1, 3).reshape(c * c, c * c)
        else:
            m = (S @ t.transpose(1, 3, 0, 2).reshape(c * c, c * c)).reshape(c, c, c, c)
            rho = m.transpose(2, 0, 3, 1).reshape(c * c, c * c)
    return FockState(c, state.n_modes, 0.5 * (rho + rho.conj().T))


def beamsplitter_loss(state, mode, eta):
    """Reference loss channel built literally: mix with an ancilla vacuum, trace it out.

    Single-mode states only; used to cross-check :func:`fock_loss`.
    """
    if state.n_modes != 1:
        raise DomainError("reference beamsplitter loss is implemented for one mode")
    eta = check_transmission(eta)
    c = state.cutoff
    big = 2 * c
    a = annihilation(big)
    eye = np.eye(big)
    A, B = np.kron(a, eye), np.kron(eye, a)
    theta = math.acos(math.sqrt(eta))
    U = expm(theta * (A.conj().T @ B - B.conj().T @ A))
    embed = np.zeros((big, c))
    embed[:c, :c] = np.eye(c)
    anc = np.zeros(big)
    anc[0] = 1.0
    V = U @ np.kron(embed, anc[:, None])
    joint = V @ state.density @ V.conj().T
    reduced = np.einsum("iaja->ij", joint.reshape(big, big, big, big))
    return FockState(c, 1, reduced[:c, :c])


# -- observables -------------------------------------------------------------

def _number(state, mode):
    return _local(state, mode, np.diag(np.arange(state.cutoff, dtype=float)))


def _quadrature(state, weights):
    a = annihilation(state.cutoff)
    q = sparse.csr_matrix((state.dim, state.dim), dtype=complex)
    for mode, (theta, lam) in weights.items():
        op = np.exp(1j * theta) * a
        q = q + lam * _local(state, mode, op + op.conj().T)
    return q


def observable_operator(state, detector):
    """Matrix of the detector's observable in the truncated basis."""
    kind = detector.kind
    if kind.is_intensity:
        return sum(_number(state, m) for m in detector.modes)
    q = _quadrature(state, detector.weights())
    return q @ q if kind == Observable.M_Q2 else q


def fock_observable_stats(state, observable, **detector_kw):
    """``(tr(rho M), tr(rho M^2) - tr(rho M)^2)``.

    ``observable`` is a :class:`~su11.circuit.Detector`, or an observable
    kind plus ``Detector`` keyword arguments (``modes``, ``theta_a``,
    ``theta_b``, ``lam``).
    """
    det = observable if isinstance(observable, Detector) else Detector(observable, **detector_kw)
    for m in det.modes:
        check_mode(m, state.n_modes)
    if det.kind.is_intensity:
        p = np.diag(state.density).real
        n = observable_operator(state, det).diagonal().real
        mean = float(p @ n)
        return mean, float(p @ n ** 2) - mean ** 2
    M = observable_operator(state, det)
    # tr(A B) = sum(A * B^T) saves a matrix product
    rhoM = (M.T @ state.density.T).T
    mean = np.trace(rhoM).real
    second = np.sum(rhoM * M.T.toarray()).real
    return float(mean), float(second - mean ** 2)


# -- pipelines ---------------------------------------------------------------

def _apply_element(state, el, check):
    if isinstance(el, Seed):
        return fock_displace(state, el.mode, el.alpha)
    if isinstance(el, NLO):
        return fock_two_mode_squeeze(state, el.params.r, el.pump_phase, check=check)
    if isinstance(el, Loss):
        return fock_loss(state, el.mode, el.eta)
    if isinstance(el, Phase):
        return fock_phase(state, el.mode, el.phi)
    raise DomainError(f"oracle cannot simulate {type(el).__name__}")


def fock_run(circuit, cutoff=25, phi=None, check=True):
    """Run a :class:`~su11.circuit.Circuit` from vacuum in the Fock basis."""
    if phi is not None:
        circuit = circuit.with_phi(phi)
    state = fock_vacuum(circuit.n_modes, cutoff)
    for el in circuit.elements:
        state = _apply_element(state, el, check)
    if check:
        state.check()
    return state


def _run_ket(circuit, cutoff, phi):
    """Pure-state version of :func:`fock_run` for lossless circuits."""
    circuit = circuit.with_phi(phi)
    c = cutoff
    psi = np.zeros(c ** circuit.n_modes, dtype=complex)
    psi[0] = 1.0
    tmp = fock_vacuum(circuit.n_modes, c)
    for el in circuit.elements:
        if isinstance(el, Seed):
            U = _local(tmp, el.mode, _displacement(c, complex(el.alpha)))
        elif isinstance(el, NLO):
            U = _squeeze_sparse(c, el.params.r, float(el.pump_phase))
        elif isinstance(el, Phase):
            U = _local(tmp, el.mode, np.diag(np.exp(1j * el.phi * np.arange(c))))
        else:
            raise DomainError("fidelity QFI needs a lossless configuration")
        psi = U @ psi
    probs = (np.abs(psi) ** 2).reshape((c,) * circuit.n_modes)
    for m in range(circuit.n_modes):
        other = tuple(k for k in range(circuit.n_modes) if k != m)
        top = (probs.sum(axis=other) if other else probs)[-1]
        if top >= LEAKAGE_TOL:
            raise LeakageError(f"cutoff {c} too small (top-level population {top:.3g})")
    return psi


def fock_fidelity_qfi(config, phi=None, delta=1e-2, cutoff=25):
    """QFI from the decay of ``|<psi(phi)|psi(phi + d)>|``.

    ``F(d) = 8 (1 - |overlap|) / d^2`` is evaluated at ``d = delta,
    delta/2, delta/4`` and Richardson-extrapolated twice (errors go as
    ``d^2``, ``d^4``).  Lossy configurations are refused.
    """
    from .interferometer import to_circuit  # deferred: interferometer is heavier

    if any(getattr(config, k) != 1.0 for k in ("eta_ai", "eta_bi", "eta_ae", "eta_be")):
        raise DomainError("fidelity QFI is only defined here for lossless (pure) configurations")
    phi = config.phi if phi is None else float(phi)
    circ = to_circuit(config, Observable.M_Q if not config.topology.value.endswith("Intensity")
                      else Observable.M_N)
    psi0 = _run_ket(circ, cutoff, phi)

    def f(d):
        ov = abs(np.vdot(psi0, _run_ket(circ, cutoff, phi + d)))
        return 8 * (1 - ov) / d ** 2

    f1, f2, f3 = f(delta), f(delta / 2), f(delta / 4)
    r1, r2 = (4 * f2 - f1) / 3, (4 * f3 - f2) / 3
    return (16 * r2 - r1) / 15


# -- cross-validation grid ---------------------------------------------------

ORACLE_GRID = {
    "r": (0.1, 0.3, 0.5),
    "alpha_sq": (0.0, 0.5, 1.0, 2.0),
    "eta": (0.6, 1.0),
    "phi": (0.0, 0.3, 1.2),
}
MOMENT_RTOL = 1e-6
QFI_RTOL = 1e-3
# LO settings used for every homodyne point of the grid
_GRID_ANGLES = {"theta_a": np.pi / 2, "theta_b": 0.4, "lambda_weight": 0.7}


def _agree(a, b, rtol, scale=0.0):
    return abs(a - b) <= rtol * max(abs(b), scale) + 1e-12


def oracle_check(cutoff=25, grid=None):
    """Compare the Gaussian engine with this oracle over a parameter grid.

    Moments of every observable are compared on the conventional pipeline
    (internal loss ``eta`` on both arms) and, for the homodyne observables,
    also on the truncated one.  The QFI from :mod:`su11.fisher` is compared
    with :func:`fock_fidelity_qfi` on the lossless points.  Returns a
    JSON-ready dict with one row per comparison and an overall ``pass``.
    """
    from .fisher import qfi
    from .interferometer import InterferometerConfig, Topology, evaluate, to_circuit

    grid = {**ORACLE_GRID, **(grid or {})}
    homodyne = (Observable.M_Q, Observable.M_lambdaQ, Observable.M_Q2)
    plan = [(Topology.CONVENTIONAL_INTENSITY, (Observable.M_N, Observable.M_Nb)),
            (Topology.CONVENTIONAL_HOMODYNE, homodyne),
            (Topology.TRUNCATED_HOMODYNE, homodyne)]
    rows = []
    for r in grid["r"]:
        for a2 in grid["alpha_sq"]:
            for eta in grid["eta"]:
                base = InterferometerConfig(Topology.CONVENTIONAL_INTENSITY, math.sqrt(a2),
                                            math.cosh(r) ** 2, eta_ai=eta, eta_bi=eta,
                                            **_GRID_ANGLES)
                cache = {}
                for phi in grid["phi"]:
                    for topology, observables in plan:
                        cfg = base.replace(topology=topology, phi=phi)
                        circ = to_circuit(cfg, observables[0])
                        # every element before the phase is shared across phi and topology
                        key = circ.elements[:circ.phase_index]
                        if key not in cache:
                            state = fock_vacuum(circ.n_modes, cutoff)
                            for el in key:
                                state = _apply_element(state, el, check=False)
                            cache[key] = state
                        if circ.elements not in cache:
                            state = cache[key]
                            for el in circ.elements[circ.phase_index:]:
                                state = _apply_element(state, el, check=False)
                            try:
                                state.check()
                                valid = True
                            except DomainError:
                                valid = False
                            cache[circ.elements] = (state, valid)
                        state, valid = cache[circ.elements]
                        leak = state.leakage()
                        for obs in observables:
                            det = to_circuit(cfg, obs).detector
                            fm, fv = fock_observable_stats(state, det)
                            gm, gv = evaluate(cfg, obs)[:2]
                            # a mean is judged against its own spread, so zero means are testable
                            ok = (valid and _agree(fm, gm, MOMENT_RTOL, math.sqrt(max(gv, 0.0)))
                                  and _agree(fv, gv, MOMENT_RTOL))
                            rows.append({"check": "moments", "topology": topology.value,
                                         "observable": obs.value, "r": r, "alpha_sq": a2,
                                         "eta": eta, "phi": phi, "fock_mean": fm,
                                         "gauss_mean": gm, "fock_var": fv, "gauss_var": gv,
                                         "leakage": leak, "pass": bool(ok)})
    for r in grid["r"]:
        for a2 in grid["alpha_sq"]:
            cfg = InterferometerConfig(Topology.TRUNCATED_HOMODYNE, math.sqrt(a2),
                                       math.cosh(r) ** 2, phi=0.3)
            gq = qfi(cfg)
            try:
                fq = fock_fidelity_qfi(cfg, cutoff=cutoff)
            except LeakageError:
                fq = None
            rows.append({"check": "qfi", "r": r, "alpha_sq": a2, "fock_qfi": fq,
                         "gauss_qfi": gq, "pass": fq is not None and bool(_agree(fq, gq, QFI_RTOL))})
    n_fail = sum(not row["pass"] for row in rows)
    return {"cutoff": cutoff, "moment_rtol": MOMENT_RTOL, "qfi_rtol": QFI_RTOL,
            "n_checks": len(rows), "n_failed": n_fail, "pass": n_fail == 0, "rows": rows}
