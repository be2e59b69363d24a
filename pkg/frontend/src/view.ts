// DOM rendering for the patient console: arrival-ordered feed, prompt cards
// with a validity countdown against the session clock, context switching,
// and clock stepping.

import { ConsoleClient } from "./client.js";
import { ConsoleEvent } from "./protocol.js";

const FEED_LABELS: Record<string, string> = {
  reminder: "Reminder",
  prompt: "Please enter",
  notification: "Notification",
  recommendation: "Recommendation",
  projectionApplied: "Care plan updated",
  callbackSent: "Asked the care center",
};

function el(tag: string, className: string, text = ""): HTMLElement {
  const node = document.createElement(tag);
  node.className = className;
  if (text) node.textContent = text;
  return node;
}

export class ConsoleView {
  private client: ConsoleClient;
  private feed: HTMLElement;
  private prompts: HTMLElement;
  private clockLabel: HTMLElement;

  constructor(client: ConsoleClient, root: HTMLElement) {
    this.client = client;
    root.innerHTML = "";

    const header = el("div", "console-header");
    this.clockLabel = el("span", "clock");
    header.appendChild(this.clockLabel);

    const controls = el("div", "controls");
    for (const [label, minutes] of [["+1h", 60], ["+8h", 480], ["+1d", 1440]] as const) {
      const button = el("button", "advance", label) as HTMLButtonElement;
      button.onclick = () => void this.client.advanceClock(minutes);
      controls.appendChild(button);
    }
    const contextInput = el("input", "context-input") as HTMLInputElement;
    contextInput.placeholder = "personal event (e.g. Festivo)";
    const contextButton = el("button", "context", "switch context") as HTMLButtonElement;
    contextButton.onclick = () => {
      if (contextInput.value) void this.client.switchContext(contextInput.value);
    };
    controls.append(contextInput, contextButton);
    header.appendChild(controls);

    this.prompts = el("div", "prompts");
    this.feed = el("div", "feed");
    root.append(header, this.prompts, this.feed);

    client.onEvent((event) => this.onEvent(event));
    client.onClock(() => this.refresh());
  }

  private onEvent(event: ConsoleEvent): void {
    const line = el("div", `feed-item kind-${event.kind}`);
    line.appendChild(el("span", "stamp", event.receivedAt));
    line.appendChild(el("span", "label", FEED_LABELS[event.kind] ?? event.kind));
    line.appendChild(el("span", "detail", summarize(event)));
    this.feed.prepend(line);
    this.refresh();
  }

  refresh(): void {
    this.clockLabel.textContent = `session clock: ${this.client.clock}`;
    const skew = document.querySelector(".skew-banner");
    if (this.client.unknownFrames > 0 && !skew) {
      const banner = el("div", "skew-banner",
        "schema mismatch: the session sent frames this console does not " +
        "understand; update the console");
      this.prompts.parentElement?.insertBefore(banner, this.prompts);
    }
    this.prompts.innerHTML = "";
    for (const prompt of this.client.pendingPrompts()) {
      const card = el("div", "prompt-card");
      card.appendChild(el("div", "prompt-label", prompt.label));
      card.appendChild(
        el("div", "countdown", `${prompt.remainingMinutes} min left`),
      );
      if (prompt.kind === "recommendation") {
        const yes = el("button", "accept", "accept") as HTMLButtonElement;
        yes.onclick = () => void this.client.accept(prompt.promptId).then(() => this.refresh());
        const no = el("button", "decline", "decline") as HTMLButtonElement;
        no.onclick = () => void this.client.decline(prompt.promptId).then(() => this.refresh());
        card.append(yes, no);
      } else {
        const input = el("input", "value-input") as HTMLInputElement;
        input.placeholder = prompt.valueType;
        const send = el("button", "submit", "submit") as HTMLButtonElement;
        send.onclick = () => {
          const value =
            prompt.valueType === "numeric" ? Number(input.value) : input.value;
          void this.client.submitValue(prompt.promptId, value).then(() => this.refresh());
        };
        card.append(input, send);
      }
      this.prompts.appendChild(card);
    }
  }
}

function summarize(event: ConsoleEvent): string {
  const payload = event.payload as Record<string, unknown>;
  switch (event.kind) {
    case "prompt":
      return String(payload["label"] ?? "");
    case "recommendation":
      return String(payload["text"] ?? "");
    case "notification":
      return String(payload["text"] ?? payload["messageId"] ?? "");
    case "callbackSent":
      return `callback ${String(payload["callbackId"] ?? "")}`;
    case "projectionApplied": {
      const started = (payload["started"] as string[]) ?? [];
      const stopped = (payload["stopped"] as string[]) ?? [];
      return `start ${started.join(",") || "-"} stop ${stopped.join(",") || "-"}`;
    }
    default:
      return String(payload["unitId"] ?? "");
  }
}
