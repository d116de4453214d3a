"""Minimal noiseless state-vector simulator for small groups of entangled qubits.

Qubits live in independent *groups*. A group holds the joint amplitudes of
every qubit entangled so far, indexed most-significant-qubit-first in the
group's qubit order. Two-qubit gates across groups merge them by tensor
product; measurement factors the measured qubit back out into a singleton
group, so state vectors stay as small as the live entanglement requires.

Amplitudes are plain Python complex lists: the protocol never entangles more
than a handful of qubits at once, and at 2..16 amplitudes scalar arithmetic
beats array dispatch by a wide margin. Numpy appears only at the API edges
(state inspection, equality checks, RNG).

Measurement in the X basis is realised as H, Z-measure, H: outcome 0 maps to
the |+> eigenstate and 1 to |->, and the qubit is left in that eigenstate so
an immediate re-measurement in the same basis repeats the outcome.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

MAX_GROUP_QUBITS = 16
NORM_TOL = 1e-9

_SQRT2_INV = 1.0 / math.sqrt(2.0)
_MASK64 = (1 << 64) - 1


class SimulationError(Exception):
    """Base class for simulator failures."""


class DeadQubitError(SimulationError):
    """A released or consumed qubit handle was used."""


class CapacityError(SimulationError):
    """Qubit registry or per-group size limit exceeded."""


class EntanglementError(SimulationError):
    """An operation's entanglement precondition does not hold."""


class Basis(Enum):
    Z = "Z"
    X = "X"


@dataclass(frozen=True)
class QubitRef:
    """Opaque handle to a live qubit in a :class:`Simulator` registry."""

    id: int


NAMED_STATES = {
    "0": np.array([1, 0], dtype=complex),
    "1": np.array([0, 1], dtype=complex),
    "+": np.array([_SQRT2_INV, _SQRT2_INV], dtype=complex),
    "-": np.array([_SQRT2_INV, -_SQRT2_INV], dtype=complex),
}

GATE_MATRICES = {
    "X": ((0, 1), (1, 0)),
    "Z": ((1, 0), (0, -1)),
    "H": ((_SQRT2_INV, _SQRT2_INV), (_SQRT2_INV, -_SQRT2_INV)),
}


def derive_seed(seed: int, index: int) -> int:
    """Derive an independent 64-bit child seed from (seed, index).

    Splitmix64-style: add a multiple of the golden-ratio increment, then run
    the avalanche finalizer. Identical inputs always give identical outputs.
    """
    z = (seed + 0x9E3779B97F4A7C15 * (index + 1)) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def make_rng(seed: int) -> np.random.Generator:
    """Deterministic random stream: same seed, same outcome sequence."""
    return np.random.default_rng(seed & _MASK64)


def states_equal(a, b, tol: float = NORM_TOL) -> bool:
    """Whether two normalized state vectors are equal up to global phase."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != b.shape:
        return False
    return abs(abs(np.vdot(a, b)) - 1.0) <= tol


class _Group:
    __slots__ = ("qubits", "amps")

    def __init__(self, qubits: list[int], amps: list[complex]):
        self.qubits = qubits
        self.amps = amps


class Simulator:
    """Registry of live qubits and their entanglement groups."""

    def __init__(self, max_qubits: int = 4096):
        self.max_qubits = max_qubits
        self._groups: dict[int, _Group] = {}  # qubit id -> its group (shared object)
        self._next_id = 0

    # -- allocation / bookkeeping ------------------------------------------

    def allocate_qubit(self, state=None) -> QubitRef:
        """Allocate a fresh qubit, in |0> or in the given 2-amplitude state."""
        if len(self._groups) >= self.max_qubits:
            raise CapacityError(f"registry full ({self.max_qubits} live qubits)")
        if state is None:
            amps = [1 + 0j, 0j]
        else:
            amps = [complex(x) for x in state]
            if len(amps) != 2:
                raise ValueError("single-qubit state needs exactly 2 amplitudes")
            norm = math.sqrt(abs(amps[0]) ** 2 + abs(amps[1]) ** 2)
            if not math.isfinite(norm) or norm < 1e-12:
                raise ValueError("state amplitudes must be finite and non-zero")
            amps = [a / norm for a in amps]
        qid = self._next_id
        self._next_id += 1
        self._groups[qid] = _Group([qid], amps)
        return QubitRef(qid)

    def allocate_named(self, label: str) -> QubitRef:
        return self.allocate_qubit(NAMED_STATES[label])

    def is_live(self, q: QubitRef) -> bool:
        return q.id in self._groups

    def release(self, q: QubitRef) -> None:
        """Discard a qubit. Only unentangled (singleton-group) qubits qualify."""
        group = self._require(q)
        if len(group.qubits) != 1:
            raise SimulationError(f"qubit {q.id} is still entangled; measure it first")
        del self._groups[q.id]

    def group_members(self, q: QubitRef) -> tuple[int, ...]:
        return tuple(self._require(q).qubits)

    def state_of(self, q: QubitRef) -> np.ndarray:
        """Copy of the amplitude vector of the group holding this qubit."""
        return np.array(self._require(q).amps, dtype=complex)

    def dump_state(self, q: QubitRef) -> dict:
        """JSON-friendly debug dump: ordered qubit ids plus [re, im] pairs."""
        group = self._require(q)
        return {
            "qubits": list(group.qubits),
            "amplitudes": [[a.real, a.imag] for a in group.amps],
        }

    def _require(self, q: QubitRef) -> _Group:
        group = self._groups.get(q.id)
        if group is None:
            raise DeadQubitError(f"qubit {q.id} is not live")
        return group

    # -- gates --------------------------------------------------------------
    #
    # ``weight`` is the index bit of the target qubit: qubit at position p of
    # an n-qubit group owns bit 2^(n-1-p). Indices with that bit clear pair
    # with index | weight.

    def _weight(self, group: _Group, q: QubitRef) -> int:
        return 1 << (len(group.qubits) - 1 - group.qubits.index(q.id))

    def apply_x(self, q: QubitRef) -> None:
        group = self._require(q)
        w = self._weight(group, q)
        amps = group.amps
        for i in range(len(amps)):
            if not i & w:
                amps[i], amps[i | w] = amps[i | w], amps[i]

    def apply_z(self, q: QubitRef) -> None:
        group = self._require(q)
        w = self._weight(group, q)
        amps = group.amps
        for i in range(len(amps)):
            if i & w:
                amps[i] = -amps[i]

    def apply_h(self, q: QubitRef) -> None:
        group = self._require(q)
        w = self._weight(group, q)
        amps = group.amps
        for i in range(len(amps)):
            if not i & w:
                a0, a1 = amps[i], amps[i | w]
                amps[i] = (a0 + a1) * _SQRT2_INV
                amps[i | w] = (a0 - a1) * _SQRT2_INV
        self._check_norm(group)

    def apply_gate(self, name: str, *targets: QubitRef) -> None:
        """Apply a gate by name: X, Z, H (one target) or CNOT (control, target)."""
        if name == "CNOT":
            if len(targets) != 2:
                raise ValueError("CNOT takes (control, target)")
            self.apply_cnot(*targets)
            return
        if len(targets) != 1:
            raise ValueError(f"{name} takes exactly one target")
        if name not in GATE_MATRICES:
            raise ValueError(f"unknown gate {name!r}")
        getattr(self, f"apply_{name.lower()}")(targets[0])

    def apply_cnot(self, control: QubitRef, target: QubitRef) -> None:
        if control.id == target.id:
            raise ValueError("CNOT control and target must differ")
        cg = self._require(control)
        tg = self._require(target)
        group = cg if cg is tg else self._merge(cg, tg)
        cw = self._weight(group, control)
        tw = self._weight(group, target)
        amps = group.amps
        for i in range(len(amps)):
            if i & cw and not i & tw:
                amps[i], amps[i | tw] = amps[i | tw], amps[i]

    def _merge(self, g1: _Group, g2: _Group) -> _Group:
        if len(g1.qubits) + len(g2.qubits) > MAX_GROUP_QUBITS:
            raise CapacityError(f"group would exceed {MAX_GROUP_QUBITS} qubits")
        merged = _Group(
            g1.qubits + g2.qubits, [x * y for x in g1.amps for y in g2.amps]
        )
        for qid in merged.qubits:
            self._groups[qid] = merged
        return merged

    def _check_norm(self, group: _Group) -> None:
        s = sum(a.real * a.real + a.imag * a.imag for a in group.amps)
        if not math.isfinite(s) or abs(s - 1.0) > NORM_TOL:
            raise SimulationError(f"state norm drifted to {s!r}")

    # -- measurement ---------------------------------------------------------

    def measure(self, q: QubitRef, basis: Basis, rng: np.random.Generator) -> int:
        """Born-rule measurement. Collapses, renormalizes, and factors the
        measured qubit out of its group; the qubit stays live in the
        post-measurement eigenstate of the requested basis.
        """
        if basis is Basis.X:
            self.apply_h(q)
        outcome = self._measure_z(q, rng)
        if basis is Basis.X:
            self.apply_h(q)  # restore |+>/|-> so the outcome is repeatable
        return outcome

    def _measure_z(self, q: QubitRef, rng: np.random.Generator) -> int:
        group = self._require(q)
        w = self._weight(group, q)
        amps = group.amps
        p1 = sum(
            a.real * a.real + a.imag * a.imag for i, a in enumerate(amps) if i & w
        )
        outcome = int(rng.random() < p1)
        if len(group.qubits) > 1:
            scale = 1.0 / math.sqrt(p1 if outcome else 1.0 - p1)
            want = w if outcome else 0
            branch = [a * scale for i, a in enumerate(amps) if i & w == want]
            rest = _Group([qid for qid in group.qubits if qid != q.id], branch)
            for qid in rest.qubits:
                self._groups[qid] = rest
            self._check_norm(rest)
        self._groups[q.id] = _Group(
            [q.id], [0j, 1 + 0j] if outcome else [1 + 0j, 0j]
        )
        return outcome

    # -- entanglement primitives ---------------------------------------------

    def make_bell_pair(self) -> tuple[QubitRef, QubitRef]:
        """Two fresh qubits in (|00> + |11>)/sqrt(2), one shared group."""
        a = self.allocate_qubit()
        b = self.allocate_qubit()
        # Same result as H on a then CNOT(a, b); built directly for speed.
        pair = _Group([a.id, b.id], [_SQRT2_INV + 0j, 0j, 0j, _SQRT2_INV + 0j])
        self._groups[a.id] = pair
        self._groups[b.id] = pair
        return a, b

    def bell_measure(
        self, a: QubitRef, b: QubitRef, rng: np.random.Generator
    ) -> tuple[int, int]:
        """Bell-basis measurement of (a, b): CNOT(a->b), H on a, measure both
        in Z. Returns (m_a, m_b); both qubits are consumed.
        """
        self.apply_cnot(a, b)
        self.apply_h(a)
        m_a = self.measure(a, Basis.Z, rng)
        m_b = self.measure(b, Basis.Z, rng)
        self.release(a)
        self.release(b)
        return m_a, m_b

    def teleport(
        self,
        payload: QubitRef,
        epr_local: QubitRef,
        epr_remote: QubitRef,
        rng: np.random.Generator,
    ) -> "TeleportResult":
        """One-shot teleportation of ``payload`` onto ``epr_remote``.

        Bell-measures (payload, epr_local), then applies X^(m_b) Z^(m_a) to
        epr_remote. The correction bits are returned so a classical channel
        can carry them.
        """
        self.assert_bell_pair(epr_local, epr_remote)
        self._require(payload)
        m_a, m_b = self.bell_measure(payload, epr_local, rng)
        apply_pauli_corrections(self, epr_remote, m_a, m_b)
        return TeleportResult(epr_remote, (m_a, m_b))

    def entanglement_swap(
        self, left: QubitRef, right: QubitRef, rng: np.random.Generator
    ) -> tuple[int, int]:
        """Bell measurement joining two adjacent pairs into one longer pair.

        ``left`` is this node's half of the pair toward one endpoint, ``right``
        the half toward the other. The caller must apply X^(m_b) Z^(m_a) to the
        surviving qubit at the designated far endpoint to land on
        (|00> + |11>)/sqrt(2).
        """
        return self.bell_measure(left, right, rng)

    def assert_bell_pair(self, a: QubitRef, b: QubitRef) -> None:
        """Require that a and b form a maximally entangled two-qubit pair."""
        ga = self._require(a)
        gb = self._require(b)
        if ga is not gb or len(ga.qubits) != 2:
            raise EntanglementError(
                f"qubits {a.id} and {b.id} are not an isolated entangled pair"
            )
        t = np.array(ga.amps, dtype=complex).reshape(2, 2)
        if ga.qubits[0] != a.id:
            t = t.T
        rho = t @ t.conj().T
        purity = float(np.trace(rho @ rho).real)
        if abs(purity - 0.5) > 1e-9:
            raise EntanglementError(
                f"qubits {a.id} and {b.id} are not maximally entangled"
                f" (reduced purity {purity:.6f})"
            )


@dataclass(frozen=True)
class TeleportResult:
    qubit: QubitRef
    correction_bits: tuple[int, int]


def apply_pauli_corrections(
    sim: Simulator, q: QubitRef, m_a: int, m_b: int
) -> None:
    """Recovery step X^(m_b) Z^(m_a) for teleportation/swap correction bits."""
    if m_b:
        sim.apply_x(q)
    if m_a:
        sim.apply_z(q)
