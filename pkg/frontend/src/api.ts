// Thin HTTP/WebSocket client for the control service.

import {
  CommandAck,
  CommandDoc,
  Frame,
  NetworkDoc,
  SessionParams,
  SessionSummary,
} from "./types.js";

export class ServiceClient {
  constructor(readonly baseUrl: string) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await fetch(`${this.baseUrl}${path}`, init);
    if (!response.ok) {
      const body = await response.text();
      throw new Error(`${response.status} ${path}: ${body}`);
    }
    return (await response.json()) as T;
  }

  createSession(params: Partial<SessionParams>): Promise<{ session_id: string; tick: number }> {
    return this.request("/sessions", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ config: params }),
    });
  }

  summary(sessionId: string): Promise<SessionSummary> {
    return this.request(`/sessions/${sessionId}`);
  }

  command(sessionId: string, doc: CommandDoc): Promise<CommandAck> {
    return this.request(`/sessions/${sessionId}/command`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(doc),
    });
  }

  network(sessionId: string): Promise<NetworkDoc> {
    return this.request(`/sessions/${sessionId}/network`);
  }

  openStream(
    sessionId: string,
    onFrame: (frame: Frame) => void,
    onState?: (connected: boolean) => void,
    decimation = 1,
  ): WebSocket {
    const ws = new WebSocket(
      `${this.baseUrl.replace(/^http/, "ws")}/sessions/${sessionId}/stream?decimation=${decimation}`,
    );
    ws.onopen = () => onState?.(true);
    ws.onclose = () => onState?.(false);
    ws.onmessage = (event) => onFrame(JSON.parse(event.data) as Frame);
    return ws;
  }
}
