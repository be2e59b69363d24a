// Browser entry point: ?port=8765&patient=molly against a running
// `pcb console --port 8765 ...` (or `pcb run --serve 8765 ...`).

import { ConsoleClient } from "./client.js";
import { ConsoleView } from "./view.js";

const params = new URLSearchParams(window.location.search);
const port = Number(params.get("port") ?? "8765");
const patient = params.get("patient") ?? "patient";

const socket = new WebSocket(ConsoleClient.url(window.location.hostname || "127.0.0.1", port, patient));
const client = new ConsoleClient(socket as unknown as import("./client.js").SocketLike);
const root = document.getElementById("console");
if (root) {
  const view = new ConsoleView(client, root);
  void client.hello().then(() => view.refresh());
}
