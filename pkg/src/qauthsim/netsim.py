"""Topology, entanglement distribution, classical corrections, and the
deterministic per-trial event loop.

One trial is one isolated world: its own simulator, endpoint machines,
repeater state, and random streams, all derived from the trial seed, so a
trial is a pure function of (topology, behavior, session config, seed).

Entangled pairs are provisioned on demand, one per path edge per transfer.
Intermediate nodes then either swap (corrections applied at the pair end
farther from the initiator) or, under intercept-resend, retain both halves,
splitting the channel into segments that each require their own teleport.
The scheduler is a fixed round-robin sweep over the two endpoint machines
with FIFO inboxes; a sweep in which nothing moves closes the trial, which is
how the responder's wait resolves after the initiator terminates silently.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, replace

from . import adversary as adv
from . import protocol as proto
from .keyschedule import KeyMaterial
from .qsim import (
    QubitRef,
    SimulationError,
    Simulator,
    apply_pauli_corrections,
    derive_seed,
    make_rng,
    states_equal,
)


@dataclass(frozen=True)
class Topology:
    """Node graph plus the fixed initiator-to-responder path."""

    nodes: tuple[str, ...]
    edges: tuple[tuple[str, str], ...]
    path: tuple[str, ...]

    def __post_init__(self):
        if len(self.path) < 2:
            raise ValueError("path needs at least two nodes")
        if len(set(self.path)) != len(self.path):
            raise ValueError("path must not revisit a node")
        known = set(self.nodes)
        if not set(self.path) <= known:
            raise ValueError("path mentions unknown nodes")
        edge_set = {frozenset(e) for e in self.edges}
        for u, v in zip(self.path, self.path[1:]):
            if frozenset((u, v)) not in edge_set:
                raise ValueError(f"path hop ({u}, {v}) is not an edge")

    @property
    def initiator_node(self) -> str:
        return self.path[0]

    @property
    def responder_node(self) -> str:
        return self.path[-1]

    @property
    def intermediates(self) -> tuple[str, ...]:
        return self.path[1:-1]

    @classmethod
    def chain(cls, num_intermediates: int = 1) -> "Topology":
        """Line topology alice - r1 - ... - rm - bob."""
        if num_intermediates < 0:
            raise ValueError("need a non-negative intermediate count")
        middle = tuple(f"r{i + 1}" for i in range(num_intermediates))
        path = ("alice",) + middle + ("bob",)
        edges = tuple(zip(path, path[1:]))
        return cls(nodes=path, edges=edges, path=path)


def topology_from_json(obj: dict) -> Topology:
    if not obj:
        return Topology.chain(1)
    return Topology(
        nodes=tuple(obj["nodes"]),
        edges=tuple((u, v) for u, v in obj["edges"]),
        path=tuple(obj["path"]),
    )


@dataclass(frozen=True)
class ClassicalMessage:
    sender: str
    receiver: str
    kind: str  # teleport_correction | swap_correction | session_control
    bits: tuple[int, int] | None
    seq: int

    def to_json(self) -> dict:
        return {
            "sender": self.sender,
            "receiver": self.receiver,
            "kind": self.kind,
            "bits": list(self.bits) if self.bits is not None else None,
            "seq": self.seq,
        }


@dataclass(frozen=True)
class _Segment:
    left_node: str
    left_q: QubitRef
    right_node: str
    right_q: QubitRef


class EntanglementFabric:
    """Provisioning of end-to-end entanglement plus correction-bit routing."""

    def __init__(
        self,
        sim: Simulator,
        topology: Topology,
        repeater: adv.RepeaterState,
        rng_world,
        trace: list | None = None,
    ):
        self.sim = sim
        self.topology = topology
        self.repeater = repeater
        self.rng = rng_world
        self.trace = trace
        self.messages: list[ClassicalMessage] = []
        self.pairs_created = 0
        self.segments_consumed = 0
        self.teleports = 0
        self.swaps = 0
        self._seq = 0

    def _message(self, sender, receiver, kind, bits) -> ClassicalMessage:
        msg = ClassicalMessage(sender, receiver, kind, bits, self._seq)
        self._seq += 1
        self.messages.append(msg)
        return msg

    def provision(self) -> list[_Segment]:
        """Distribute one Bell pair per path edge and run the swap policy.

        Honest nodes swap immediately (corrections applied at the pair end
        farther from the initiator); a retaining node ends the current
        segment instead, so the result is one segment per stretch of the
        path between non-swapping boundaries.
        """
        path = self.topology.path
        segments: list[_Segment] = []
        left_node, left_q, right_q = None, None, None
        for i in range(len(path) - 1):
            a, b = self.sim.make_bell_pair()
            self.pairs_created += 1
            if left_q is None:
                left_node, left_q, right_q = path[i], a, b
                continue
            node = path[i]
            if self.repeater.swaps_at(node):
                bits = self.sim.entanglement_swap(right_q, a, self.rng)
                self.swaps += 1
                self._message(node, path[i + 1], "swap_correction", bits)
                apply_pauli_corrections(self.sim, b, *bits)
                if self.trace is not None:
                    self.trace.append(
                        {
                            "event": "swap",
                            "node": node,
                            "applied_at": path[i + 1],
                            "bits": list(bits),
                            "seq": self._seq - 1,
                        }
                    )
                right_q = b
            else:
                segments.append(_Segment(left_node, left_q, node, right_q))
                left_node, left_q, right_q = node, a, b
        segments.append(_Segment(left_node, left_q, path[-1], right_q))
        return segments

    def transfer(self, payload: QubitRef, direction: str) -> QubitRef:
        """Move one qubit end to end; returns the handle at the destination.

        Each segment costs one teleport: a Bell measurement at its near end
        and one correction message to its far end. At a non-swapping boundary
        the qubit materializes on the repeater's own half and is handed to
        the behavior, whose resend continues over the next segment.
        """
        segments = self.provision()
        if direction == "reverse":
            hops = [
                _Segment(s.right_node, s.right_q, s.left_node, s.left_q)
                for s in reversed(segments)
            ]
        elif direction == "forward":
            hops = segments
        else:
            raise ValueError("direction must be 'forward' or 'reverse'")

        qubit = payload
        for i, hop in enumerate(hops):
            bits = self.sim.bell_measure(qubit, hop.left_q, self.rng)
            self.teleports += 1
            self.segments_consumed += 1
            self._message(hop.left_node, hop.right_node, "teleport_correction", bits)
            if self.trace is not None:
                self.trace.append(
                    {
                        "event": "teleport",
                        "from": hop.left_node,
                        "to": hop.right_node,
                        "bits": list(bits),
                        "seq": self._seq - 1,
                    }
                )
            apply_pauli_corrections(self.sim, hop.right_q, *bits)
            qubit = hop.right_q
            if i + 1 < len(hops):
                qubit = adv.handle_arrival(
                    self.repeater, self.sim, qubit, direction, self.rng
                )
        return qubit


@dataclass(frozen=True)
class TrialRecord:
    seed: int
    transfer_length: int
    behavior: str
    detected: bool
    rounds_to_detect: int | None
    data_qubits_delivered: int
    auth_qubits_sent: int
    data_qubit_target: int
    completed: bool
    data_qubits_intact: int
    bell_pairs_created: int
    teleports: int
    swap_corrections: int

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "transfer_length": self.transfer_length,
            "behavior": self.behavior,
            "detected": self.detected,
            "rounds_to_detect": self.rounds_to_detect,
            "data_qubits_delivered": self.data_qubits_delivered,
            "auth_qubits_sent": self.auth_qubits_sent,
            "data_qubit_target": self.data_qubit_target,
            "completed": self.completed,
            "data_qubits_intact": self.data_qubits_intact,
            "bell_pairs_created": self.bell_pairs_created,
            "teleports": self.teleports,
            "swap_corrections": self.swap_corrections,
        }


def default_malicious_node(topology: Topology) -> str:
    mids = topology.intermediates
    if not mids:
        raise ValueError("intercept-resend needs at least one intermediate node")
    return mids[len(mids) // 2]


def run_trial(
    topology: Topology,
    behavior: adv.Behavior,
    config: proto.SessionConfig,
    seed: int,
    *,
    malicious_node: str | None = None,
    trace: list | None = None,
    intercept_log: list | None = None,
    max_sweeps: int | None = None,
) -> TrialRecord:
    """Drive one session end to end and summarize it.

    Deterministic: the world, repeater, and key streams are all derived from
    ``seed``, so identical arguments give an identical record (and trace).
    """
    rng_world = make_rng(derive_seed(seed, 0))
    eve_seed = derive_seed(seed, 1)
    if config.key is None:
        key = KeyMaterial.random(config.key_length, make_rng(derive_seed(seed, 2)))
        config = replace(config, key=key)
    if config.data_qubit_target > 0 and not any(config.key.bits):
        raise ValueError("all-zero key never schedules a data window")

    node = None
    if isinstance(behavior, adv.InterceptResend):
        node = malicious_node or default_malicious_node(topology)
        if node not in topology.intermediates:
            raise ValueError(f"malicious node {node!r} is not on the path interior")
    repeater = adv.RepeaterState(behavior, node, eve_seed)

    sim = Simulator()
    fabric = EntanglementFabric(sim, topology, repeater, rng_world, trace)
    alice = proto.Initiator(config, sim, rng_world, trace)
    bob = proto.Responder(config, sim, rng_world, trace)
    inboxes = {alice: deque(), bob: deque()}
    peers = {alice: bob, bob: alice}

    data_delivered = 0
    data_intact = 0
    sweeps = 0
    while not (alice.absorbing and bob.absorbing):
        progressed = False
        for machine in (alice, bob):
            inbox = inboxes[machine]
            if machine.absorbing:
                while inbox:  # a terminated endpoint ignores late arrivals
                    sim.release(inbox.popleft().qubit)
                continue
            if inbox and machine.wants_qubit:
                event = inbox.popleft()
            else:
                event = proto.Tick()
            st = machine.state
            before = (st.phase, st.sent_count, st.qubits_delivered, st.rounds_completed)
            actions = machine.step(event)
            after = (st.phase, st.sent_count, st.qubits_delivered, st.rounds_completed)
            if actions or after != before or not isinstance(event, proto.Tick):
                progressed = True
            for action in actions:
                direction = "forward" if machine is alice else "reverse"
                arrived = fabric.transfer(action.qubit, direction)
                truth = alice.payload_truth.pop(action.qubit.id, None)
                if truth is not None:
                    data_delivered += 1
                    if states_equal(sim.state_of(arrived), truth):
                        data_intact += 1
                inboxes[peers[machine]].append(proto.QubitArrived(arrived))
        if not progressed:
            # Nothing moved in a full sweep: a peer stopped talking. Close
            # out whoever is still waiting.
            for machine in (alice, bob):
                if not machine.absorbing:
                    machine.terminate("timeout")
            break
        sweeps += 1
        if max_sweeps is not None and sweeps > max_sweeps:
            raise SimulationError(f"trial exceeded {max_sweeps} scheduler sweeps")

    if intercept_log is not None:
        intercept_log.extend(repeater.log)
    failing = next(
        (v for v in alice.verdicts + bob.verdicts if not v.passed), None
    )
    return TrialRecord(
        seed=seed,
        transfer_length=config.sched.transfer_length,
        behavior=behavior.name,
        detected=failing is not None,
        rounds_to_detect=failing.round_index if failing else None,
        data_qubits_delivered=data_delivered,
        auth_qubits_sent=alice.auth_qubits_sent + bob.auth_qubits_sent,
        data_qubit_target=config.data_qubit_target,
        completed=alice.state.phase is proto.Phase.COMPLETE
        and bob.state.phase is proto.Phase.COMPLETE,
        data_qubits_intact=data_intact,
        bell_pairs_created=fabric.pairs_created,
        teleports=fabric.teleports,
        swap_corrections=fabric.swaps,
    )


def write_trace(path, trace: list[dict]) -> None:
    """Dump a trial trace as JSON lines."""
    with open(path, "w", encoding="utf-8") as fh:
        for record in trace:
            fh.write(json.dumps(record) + "\n")
