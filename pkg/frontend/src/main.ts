// Browser entry point. The gateway listens on plain TCP, so a browser needs a
// byte-level TCP<->WebSocket bridge in front of it, e.g.:
//     websockify 8788 127.0.0.1:8787
// then open index.html?ws=ws://localhost:8788

import { OperatorApp } from "./app.js";
import { ReconnectingClient, WebSocketTransport } from "./transport.js";

const params = new URLSearchParams(window.location.search);
const url = params.get("ws") ?? "ws://localhost:8788";

const client = new ReconnectingClient(
  () => {
    const transport = new WebSocketTransport(url);
    transport.connect();
    return transport;
  },
  { type: "hello", role: "controller" },
);

const mount = document.getElementById("app");
if (!mount) {
  throw new Error("missing #app mount point");
}
const app = new OperatorApp(client, mount, (q) => window.confirm(q));
void app.start();
