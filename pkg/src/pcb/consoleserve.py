"""Bridges a running session to the browser console over a web socket.

The console is a pure view/controller: every command it sends maps onto the
same session interface the scenario harness drives, and disconnecting never
changes session state.
"""

from __future__ import annotations

import json
from datetime import datetime, timedelta

from .harness import Session
from .simclock import schedule_daily_rollovers
from .wsserver import WebSocketServer, WsClosed

_TS = "%Y-%m-%d %H:%M:%S"

CONSOLE_EVENT_KINDS = {
    "reminder": "reminder",
    "prompt": "prompt",
    "notification": "notification",
    "recommendation": "recommendation",
    "projectionApplied": "projectionApplied",
    "callback": "callbackSent",
}


def console_event(entry: dict):
    kind = CONSOLE_EVENT_KINDS.get(entry.get("kind", ""))
    if kind is None or entry.get("actor") != "mDSS":
        return None
    payload = {k: v for k, v in entry.items() if k not in ("actor", "kind", "seq", "t")}
    return {"kind": kind, "receivedAt": entry["t"], "payload": payload}


class _RolloverPlanner:
    def __init__(self, session: Session):
        self.session = session
        self.planned_until = session.loop.now

    def ensure(self, until: datetime) -> None:
        if until <= self.planned_until:
            return
        saved = self.session.loop.now
        # schedule_daily_rollovers walks forward from loop.now; plan the gap only
        base = max(saved, self.planned_until)
        day = base.date() + timedelta(days=1)
        while datetime.combine(day, datetime.min.time()) <= until:
            midnight = datetime.combine(day, datetime.min.time())
            if midnight > self.planned_until:
                self.session.loop.schedule(
                    midnight, 0, lambda t=midnight: self.session.rollover(t)
                )
            day += timedelta(days=1)
        self.planned_until = until


class ConsoleBridge:
    def __init__(self, session: Session, port: int, allow_clock: bool = True):
        self.session = session
        self.allow_clock = allow_clock
        self.backlog: list[dict] = []
        self.ws = WebSocketServer(port)
        self.rollovers = _RolloverPlanner(session)
        session.listeners.append(self._on_entry)

    # -- event side ---------------------------------------------------------

    def _on_entry(self, entry: dict) -> None:
        event = console_event(entry)
        if event is None:
            return
        self.backlog.append(event)
        if self.ws.connected:
            self.ws.send_text(json.dumps({"type": "event", "event": event},
                                         sort_keys=True))

    def _send(self, frame: dict) -> None:
        self.ws.send_text(json.dumps(frame, sort_keys=True))

    def _send_clock(self) -> None:
        self._send({"type": "clock", "now": self.session.loop.now.strftime(_TS)})

    # -- command side ----------------------------------------------------------

    def wait_for_client(self, timeout=None) -> bool:
        if not self.ws.accept(timeout):
            return False
        self._send({
            "type": "hello",
            "patientId": self.session.profile.patient_id,
            "guideline": self.session.gl.name,
            "clock": self.session.loop.now.strftime(_TS),
            "clockControl": self.allow_clock,
            "backlog": self.backlog,
        })
        return True

    def handle_command(self, raw: str) -> None:
        try:
            frame = json.loads(raw)
        except json.JSONDecodeError:
            self._send({"type": "commandResult", "status": "badFrame"})
            return
        command = frame.get("command", "")
        mdss = self.session.mdss
        status = "ok"
        if command == "submitValue":
            status = mdss.patient_input(frame.get("promptId", ""), frame.get("value"))
        elif command in ("accept", "decline"):
            status = mdss.patient_input(frame.get("promptId", ""), command)
        elif command == "switchContext":
            mdss.switch_context(frame.get("personalEvent", ""))
        elif command == "advanceClock":
            if not self.allow_clock:
                status = "clockDrivenByScenario"
            else:
                minutes = int(frame.get("minutes", 0))
                target = self.session.loop.now + timedelta(minutes=minutes)
                self.rollovers.ensure(target)
                self.session.loop.run_until(target)
        else:
            status = f"unknownCommand {command!r}"
        self._send({"type": "commandResult", "command": command, "status": status})
        self._send_clock()

    def serve_forever(self) -> None:
        """Console mode: the client drives the clock. Disconnecting never
        alters the session; a reconnecting client replays the backlog."""
        while True:
            if not self.ws.connected:
                if not self.wait_for_client(timeout=1.0):
                    continue
            try:
                raw = self.ws.recv_text(timeout=0.2)
            except WsClosed:
                self.ws.close_client()
                continue
            if raw is not None:
                self.handle_command(raw)
