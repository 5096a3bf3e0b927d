// Thin session client: one websocket, latest-telemetry snapshot semantics.

import { ControlMessage, Hello, MapGeometry, Mode, Telemetry } from "./types.js";

export interface SessionEvents {
  onHello?: (h: Hello) => void;
  onTelemetry?: (t: Telemetry, receivedAt: number) => void;
  onError?: (detail: string) => void;
  onClose?: () => void;
}

export class SessionClient {
  private ws: WebSocket;
  latest: Telemetry | null = null;
  hello: Hello | null = null;

  constructor(url: string, events: SessionEvents = {}) {
    this.ws = new WebSocket(url);
    this.ws.onmessage = (ev) => {
      const msg = JSON.parse(ev.data as string);
      if (msg.type === "telemetry") {
        this.latest = msg as Telemetry;
        events.onTelemetry?.(this.latest, performance.now());
      } else if (msg.type === "hello") {
        this.hello = msg as Hello;
        events.onHello?.(this.hello);
      } else if (msg.type === "error") {
        events.onError?.(msg.detail ?? "unknown error");
      }
    };
    this.ws.onclose = () => events.onClose?.();
  }

  start(): void {
    this.ws.send(JSON.stringify({ type: "start" }));
  }

  sendControl(msg: ControlMessage): void {
    if (this.ws.readyState === WebSocket.OPEN) {
      this.ws.send(JSON.stringify(msg));
    }
  }

  close(): void {
    this.ws.close();
  }
}

export function sessionUrl(
  base: string,
  scenario: string,
  mode: Mode,
  seed: number
): string {
  const ws = base.replace(/^http/, "ws").replace(/\/$/, "");
  return `${ws}/session?scenario=${encodeURIComponent(scenario)}&mode=${mode}&seed=${seed}`;
}

export async function fetchMap(base: string, name: string): Promise<MapGeometry> {
  const res = await fetch(`${base.replace(/\/$/, "")}/map/${encodeURIComponent(name)}`);
  if (!res.ok) throw new Error(`map fetch failed: ${res.status}`);
  return (await res.json()) as MapGeometry;
}
