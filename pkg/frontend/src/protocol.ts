// Frame schema shared with the engine side (docs/message_schema.md).

export type ConsoleEventKind =
  | "reminder"
  | "prompt"
  | "notification"
  | "recommendation"
  | "projectionApplied"
  | "callbackSent";

export interface ConsoleEvent {
  kind: ConsoleEventKind;
  receivedAt: string;
  payload: Record<string, unknown>;
}

export interface HelloFrame {
  type: "hello";
  patientId: string;
  guideline: string;
  clock: string;
  clockControl: boolean;
  backlog: ConsoleEvent[];
}

export interface EventFrame {
  type: "event";
  event: ConsoleEvent;
}

export interface ClockFrame {
  type: "clock";
  now: string;
}

export interface CommandResultFrame {
  type: "commandResult";
  command: string;
  status: string;
}

export interface RunCompleteFrame {
  type: "runComplete";
}

export type ServerFrame =
  | HelloFrame
  | EventFrame
  | ClockFrame
  | CommandResultFrame
  | RunCompleteFrame;

export type Command =
  | { command: "submitValue"; promptId: string; value: number | string | boolean }
  | { command: "accept"; promptId: string }
  | { command: "decline"; promptId: string }
  | { command: "switchContext"; personalEvent: string }
  | { command: "advanceClock"; minutes: number };

const EVENT_KINDS: ReadonlySet<string> = new Set([
  "reminder",
  "prompt",
  "notification",
  "recommendation",
  "projectionApplied",
  "callbackSent",
]);

export function parseFrame(text: string): ServerFrame {
  const raw = JSON.parse(text) as Record<string, unknown>;
  const type = raw["type"];
  if (type === "hello" || type === "clock" || type === "commandResult" ||
      type === "runComplete") {
    return raw as unknown as ServerFrame;
  }
  if (type === "event") {
    const event = raw["event"] as ConsoleEvent | undefined;
    if (!event || !EVENT_KINDS.has(event.kind)) {
      throw new Error(`unknown console event in frame: ${text}`);
    }
    return raw as unknown as EventFrame;
  }
  throw new Error(`unknown frame type: ${String(type)}`);
}

// session timestamps are "YYYY-MM-DD HH:MM:SS" in simulated local time
export function parseStamp(stamp: string): number {
  return new Date(stamp.replace(" ", "T") + "Z").getTime();
}

export function minutesBetween(earlier: string, later: string): number {
  return Math.round((parseStamp(later) - parseStamp(earlier)) / 60000);
}
