import { ServiceClient } from "./api.js";
import { ControlPanel } from "./controlPanel.js";
import { FrameStore } from "./frames.js";
import { NetworkPanel } from "./networkPanel.js";
import { PricePanel } from "./pricePanel.js";
import { Frame } from "./types.js";

const SERVICE_URL =
  new URLSearchParams(location.search).get("service") ?? "http://127.0.0.1:8000";

const client = new ServiceClient(SERVICE_URL);
const store = new FrameStore(10_000);
const priceCanvas = document.getElementById("price-panel") as HTMLCanvasElement;
const networkCanvas = document.getElementById("network-panel") as HTMLCanvasElement;
const statusEl = document.getElementById("status") as HTMLElement;
const pricePanel = new PricePanel(store, priceCanvas);
const networkPanel = new NetworkPanel(networkCanvas);

let stream: WebSocket | null = null;
let redrawQueued = false;

function queueRedraw() {
  if (redrawQueued) return;
  redrawQueued = true;
  requestAnimationFrame(() => {
    redrawQueued = false;
    pricePanel.draw();
    networkPanel.draw();
  });
}

async function refreshNetwork(sessionId: string) {
  networkPanel.setNetwork(await client.network(sessionId));
  queueRedraw();
}

const controls = new ControlPanel(
  client,
  {
    onSessionCreated(sessionId) {
      store.clear();
      pricePanel.markers.length = 0;
      stream?.close();
      stream = client.openStream(
        sessionId,
        (frame: Frame) => {
          store.push(frame);
          networkPanel.setFrame(frame);
          queueRedraw();
        },
        (connected) => {
          controls.setConnected(connected);
          statusEl.textContent = connected
            ? `session ${sessionId} connected`
            : "disconnected";
        },
      );
      void refreshNetwork(sessionId);
    },
    onAck(ack) {
      pricePanel.noteAck(ack.verb, ack.effective_tick);
      void refreshNetwork(ack.session_id);
      queueRedraw();
    },
    onError(message) {
      statusEl.textContent = message;
    },
  },
  document.getElementById("controls") as HTMLElement,
);
