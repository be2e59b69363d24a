"""Message protocol between the central and device engines.

At-least-once delivery with acknowledgment and timeout retry; receivers make
projection application idempotent, so the pair gives exactly-once effect.
A scripted fault plan can drop, delay, or duplicate individual transmissions.
Frames are single-line JSON objects (newline-delimited on the socket path).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from typing import Callable, Optional

from .simclock import PRIORITY_CHANNEL, EventLoop

MESSAGE_KINDS = (
    "projection",
    "ack",
    "nack",
    "callback",
    "dataNotification",
    "recommendation",
    "enroll",
    "crashRecoveryRequest",
)

_TS = "%Y-%m-%d %H:%M:%S"


@dataclass(frozen=True)
class Message:
    msg_id: str
    kind: str
    patient_id: str
    payload: dict
    sent_at: datetime

    def __post_init__(self):
        if self.kind not in MESSAGE_KINDS:
            raise ValueError(f"unknown message kind {self.kind!r}")

    def to_frame(self) -> str:
        return json.dumps(
            {
                "msgId": self.msg_id,
                "kind": self.kind,
                "patientId": self.patient_id,
                "payload": self.payload,
                "sentAt": self.sent_at.strftime(_TS),
            },
            sort_keys=True,
        )

    @classmethod
    def from_frame(cls, frame: str) -> "Message":
        data = json.loads(frame)
        return cls(
            data["msgId"],
            data["kind"],
            data["patientId"],
            data["payload"],
            datetime.strptime(data["sentAt"], _TS),
        )


@dataclass(frozen=True)
class FaultRule:
    action: str  # drop | delay | duplicate
    kind: Optional[str] = None
    attempt: Optional[int] = None  # 1-based transmission attempt
    nth: Optional[int] = None  # 1-based index among rule matches
    delay_seconds: float = 0.0

    def matches(self, msg: Message, attempt: int) -> bool:
        if self.kind is not None and msg.kind != self.kind:
            return False
        if self.attempt is not None and attempt != self.attempt:
            return False
        return True


def load_fault_plan(text: str) -> list[FaultRule]:
    doc = json.loads(text)
    rules = []
    for raw in doc.get("rules", []):
        rules.append(
            FaultRule(
                action=raw["action"],
                kind=raw.get("kind"),
                attempt=raw.get("attempt"),
                nth=raw.get("nth"),
                delay_seconds=float(raw.get("delaySeconds", 0.0)),
            )
        )
    return rules


@dataclass
class ChannelConfig:
    ack_timeout_seconds: float = 30.0
    max_retries: int = 3
    transmission_delay_seconds: float = 1.0
    fault_rules: list[FaultRule] = field(default_factory=list)

    def __post_init__(self):
        if self.max_retries < 0:
            raise ValueError("maxRetries must be >= 0")


@dataclass
class _Pending:
    message: Message
    to_side: str
    attempt: int
    timer: object = None


class Channel:
    """Bidirectional per-patient transport. Sides are 'central' and 'device'."""

    def __init__(self, loop: EventLoop, config: Optional[ChannelConfig] = None,
                 trace: Optional[Callable[[str, dict], None]] = None):
        self.loop = loop
        self.config = config or ChannelConfig()
        self.trace = trace or (lambda kind, detail: None)
        self._handlers: dict[str, Callable[[Message], None]] = {}
        self._failure_handlers: dict[str, Callable[[Message], None]] = {}
        self._crashed: set[str] = set()
        self._pending: dict[str, _Pending] = {}
        self._rule_hits: dict[int, int] = {}
        self._next_msg = 1

    # -- wiring ------------------------------------------------------------

    def register(self, side: str, handler, on_delivery_failure=None) -> None:
        self._handlers[side] = handler
        if on_delivery_failure is not None:
            self._failure_handlers[side] = on_delivery_failure

    def next_msg_id(self) -> str:
        msg_id = f"m{self._next_msg:05d}"
        self._next_msg += 1
        return msg_id

    def make_message(self, kind: str, patient_id: str, payload: dict) -> Message:
        return Message(self.next_msg_id(), kind, patient_id, payload, self.loop.now)

    # -- crash signalling -----------------------------------------------------

    def crash_device(self, patient_id: str) -> None:
        self._crashed.add(patient_id)
        self.trace("deviceCrash", {"patientId": patient_id})

    def restart_device(self, patient_id: str) -> None:
        self._crashed.discard(patient_id)
        self.trace("deviceRestart", {"patientId": patient_id})

    def device_crashed(self, patient_id: str) -> bool:
        return patient_id in self._crashed

    # -- sending ---------------------------------------------------------------

    def send(self, from_side: str, msg: Message) -> None:
        to_side = "device" if from_side == "central" else "central"
        self.trace("send", {"from": from_side, "frame": msg.to_frame()})
        if msg.kind in ("ack", "nack"):
            self._transmit(msg, to_side, attempt=1, tracked=False)
            return
        pending = _Pending(msg, to_side, attempt=1)
        self._pending[msg.msg_id] = pending
        self._transmit(msg, to_side, attempt=1, tracked=True)

    def _transmit(self, msg: Message, to_side: str, attempt: int, tracked: bool) -> None:
        if tracked:
            self._arm_timer(msg.msg_id)
        deliveries = 1
        extra_delay = 0.0
        for index, rule in enumerate(self.config.fault_rules):
            if not rule.matches(msg, attempt):
                continue
            hits = self._rule_hits.get(index, 0) + 1
            self._rule_hits[index] = hits
            if rule.nth is not None and hits != rule.nth:
                continue
            if rule.action == "drop":
                deliveries = 0
                self.trace("fault", {"action": "drop", "msgId": msg.msg_id,
                                     "attempt": attempt})
            elif rule.action == "delay":
                extra_delay += rule.delay_seconds
                self.trace("fault", {"action": "delay", "msgId": msg.msg_id,
                                     "attempt": attempt, "seconds": rule.delay_seconds})
            elif rule.action == "duplicate":
                deliveries += 1
                self.trace("fault", {"action": "duplicate", "msgId": msg.msg_id,
                                     "attempt": attempt})
        delay = timedelta(seconds=self.config.transmission_delay_seconds + extra_delay)
        for _ in range(deliveries):
            self.loop.schedule_after(
                delay, PRIORITY_CHANNEL, lambda m=msg, s=to_side: self._deliver(m, s)
            )

    def _arm_timer(self, msg_id: str) -> None:
        pending = self._pending.get(msg_id)
        if pending is None:
            return
        pending.timer = self.loop.schedule_after(
            timedelta(seconds=self.config.ack_timeout_seconds),
            PRIORITY_CHANNEL,
            lambda: self._on_timeout(msg_id),
        )

    def _on_timeout(self, msg_id: str) -> None:
        pending = self._pending.get(msg_id)
        if pending is None:
            return
        if pending.attempt >= 1 + self.config.max_retries:
            del self._pending[msg_id]
            self.trace("deliveryFailure", {"msgId": msg_id,
                                           "attempts": pending.attempt})
            sender = "central" if pending.to_side == "device" else "device"
            handler = self._failure_handlers.get(sender)
            if handler is not None:
                handler(pending.message)
            return
        pending.attempt += 1
        self.trace("retransmit", {"msgId": msg_id, "attempt": pending.attempt})
        self._transmit(pending.message, pending.to_side, pending.attempt, tracked=True)

    def _deliver(self, msg: Message, to_side: str) -> None:
        if to_side == "device" and msg.patient_id in self._crashed:
            self.trace("droppedAtCrashedDevice", {"msgId": msg.msg_id})
            return
        if msg.kind in ("ack", "nack"):
            answered = msg.payload.get("ackFor")
            pending = self._pending.pop(answered, None)
            if pending is not None and pending.timer is not None:
                self.loop.cancel(pending.timer)
        self.trace("deliver", {"to": to_side, "frame": msg.to_frame()})
        handler = self._handlers.get(to_side)
        if handler is not None:
            handler(msg)

    # -- helpers --------------------------------------------------------------

    def ack(self, from_side: str, answered: Message, ok: bool = True,
            error: str = "") -> None:
        payload = {"ackFor": answered.msg_id, "ok": ok}
        if error:
            payload["error"] = error
        self.send(
            from_side,
            self.make_message("ack" if ok else "nack", answered.patient_id, payload),
        )
