// Session client: one web socket, an ordered event feed, pending prompt
// tracking against the simulated clock, and sequential commands.
//
// The console is a pure view/controller: everything it can do travels as a
// command frame the scenario harness could equally send.

import {
  Command,
  CommandResultFrame,
  ConsoleEvent,
  HelloFrame,
  ServerFrame,
  parseFrame,
  parseStamp,
} from "./protocol.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

export interface PendingPromptView {
  promptId: string;
  conceptId: string;
  label: string;
  valueType: string;
  deadline: string;
  kind: "prompt" | "recommendation";
  remainingMinutes: number;
}

interface Waiter {
  predicate: (event: ConsoleEvent) => boolean;
  resolve: (event: ConsoleEvent) => void;
}

export class ConsoleClient {
  events: ConsoleEvent[] = [];
  clock = "";
  patientId = "";
  guideline = "";
  clockControl = false;
  closed = false;
  unknownFrames = 0; // version skew: frames this client does not understand

  private socket: SocketLike;
  private helloResolvers: ((hello: HelloFrame) => void)[] = [];
  private resultQueue: ((result: CommandResultFrame) => void)[] = [];
  private waiters: Waiter[] = [];
  private answered = new Set<string>();
  private listeners: ((event: ConsoleEvent) => void)[] = [];
  private clockListeners: ((now: string) => void)[] = [];

  constructor(socket: SocketLike) {
    this.socket = socket;
    socket.onmessage = (ev) => this.onFrame(String(ev.data));
    socket.onclose = () => {
      this.closed = true;
    };
  }

  static url(host: string, port: number, patientId: string): string {
    return `ws://${host}:${port}/session/${patientId}`;
  }

  onEvent(listener: (event: ConsoleEvent) => void): void {
    this.listeners.push(listener);
  }

  onClock(listener: (now: string) => void): void {
    this.clockListeners.push(listener);
  }

  hello(): Promise<HelloFrame> {
    return new Promise((resolve) => this.helloResolvers.push(resolve));
  }

  private onFrame(text: string): void {
    let frame: ServerFrame;
    try {
      frame = parseFrame(text);
    } catch {
      this.unknownFrames += 1;
      return;
    }
    if (frame.type === "hello") {
      this.patientId = frame.patientId;
      this.guideline = frame.guideline;
      this.clock = frame.clock;
      this.clockControl = frame.clockControl;
      for (const event of frame.backlog) this.pushEvent(event);
      for (const resolve of this.helloResolvers.splice(0)) resolve(frame);
    } else if (frame.type === "event") {
      this.pushEvent(frame.event);
    } else if (frame.type === "clock") {
      this.clock = frame.now;
      for (const listener of this.clockListeners) listener(frame.now);
    } else if (frame.type === "commandResult") {
      const resolve = this.resultQueue.shift();
      if (resolve) resolve(frame);
    }
  }

  private pushEvent(event: ConsoleEvent): void {
    this.events.push(event);
    if (event.receivedAt > this.clock) this.clock = event.receivedAt;
    for (const listener of this.listeners) listener(event);
    this.waiters = this.waiters.filter((waiter) => {
      if (waiter.predicate(event)) {
        waiter.resolve(event);
        return false;
      }
      return true;
    });
  }

  send(command: Command): Promise<CommandResultFrame> {
    return new Promise((resolve) => {
      this.resultQueue.push(resolve);
      this.socket.send(JSON.stringify({ type: "command", ...command }));
    });
  }

  submitValue(promptId: string, value: number | string | boolean) {
    this.answered.add(promptId);
    return this.send({ command: "submitValue", promptId, value });
  }

  accept(promptId: string) {
    this.answered.add(promptId);
    return this.send({ command: "accept", promptId });
  }

  decline(promptId: string) {
    this.answered.add(promptId);
    return this.send({ command: "decline", promptId });
  }

  switchContext(personalEvent: string) {
    return this.send({ command: "switchContext", personalEvent });
  }

  advanceClock(minutes: number) {
    return this.send({ command: "advanceClock", minutes });
  }

  pendingPrompts(): PendingPromptView[] {
    const now = parseStamp(this.clock);
    const out: PendingPromptView[] = [];
    for (const event of this.events) {
      if (event.kind !== "prompt" && event.kind !== "recommendation") continue;
      const payload = event.payload as {
        promptId?: string;
        conceptId?: string;
        messageId?: string;
        label?: string;
        text?: string;
        valueType?: string;
        deadline?: string;
      };
      const promptId = payload.promptId ?? "";
      if (!promptId || this.answered.has(promptId)) continue;
      const deadline = payload.deadline ?? "9999-12-31 00:00:00";
      const remaining = Math.floor((parseStamp(deadline) - now) / 60000);
      if (remaining < 0) continue;
      out.push({
        promptId,
        conceptId: payload.conceptId ?? payload.messageId ?? "",
        label: payload.label ?? payload.text ?? "",
        valueType: payload.valueType ?? "boolean",
        deadline,
        kind: event.kind === "prompt" ? "prompt" : "recommendation",
        remainingMinutes: remaining,
      });
    }
    return out;
  }

  waitForEvent(
    predicate: (event: ConsoleEvent) => boolean,
    timeoutMs = 5000,
  ): Promise<ConsoleEvent> {
    const already = this.events.find(predicate);
    if (already) return Promise.resolve(already);
    return new Promise((resolve, reject) => {
      const timer = setTimeout(
        () => reject(new Error("timed out waiting for console event")),
        timeoutMs,
      );
      this.waiters.push({
        predicate,
        resolve: (event) => {
          clearTimeout(timer);
          resolve(event);
        },
      });
    });
  }

  close(): void {
    this.socket.close();
  }
}
