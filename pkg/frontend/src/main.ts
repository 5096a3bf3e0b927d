// Browser shell: setup form, canvas render loop, 20 Hz control sender.

import { InputState } from "./input.js";
import { SessionClient, fetchMap, sessionUrl } from "./net.js";
import { DrawOp, buildFrame } from "./view.js";
import { MapGeometry, Mode } from "./types.js";

function executeOps(ctx: CanvasRenderingContext2D, ops: DrawOp[]): void {
  for (const op of ops) {
    if (op.kind === "rect") {
      ctx.fillStyle = op.color;
      ctx.fillRect(op.x, op.y, op.w, op.h);
    } else {
      ctx.fillStyle = op.color;
      ctx.font = `bold ${op.size}px monospace`;
      ctx.fillText(op.text, op.x, op.y);
    }
  }
}

function start(): void {
  const form = document.getElementById("setup") as HTMLFormElement;
  const canvas = document.getElementById("view") as HTMLCanvasElement;
  const statusEl = document.getElementById("status") as HTMLDivElement;
  const ctx = canvas.getContext("2d")!;
  let client: SessionClient | null = null;
  let map: MapGeometry | null = null;
  let mode: Mode = "vdoa";
  const input = new InputState();

  document.addEventListener("keydown", (e) => input.keyDown(e.code));
  document.addEventListener("keyup", (e) => input.keyUp(e.code));
  window.addEventListener("blur", () => input.clear());

  form.onsubmit = async (ev) => {
    ev.preventDefault();
    const base = (document.getElementById("server") as HTMLInputElement).value;
    const scenario = (document.getElementById("scenario") as HTMLInputElement).value;
    mode = (document.getElementById("mode") as HTMLSelectElement).value as Mode;
    const seed = parseInt((document.getElementById("seed") as HTMLInputElement).value, 10) || 0;

    try {
      map = await fetchMap(base, scenario);
    } catch (err) {
      map = null;
      statusEl.textContent = `map unavailable (${err})`;
    }
    client?.close();
    client = new SessionClient(sessionUrl(base, scenario, mode, seed), {
      onHello: () => {
        statusEl.textContent = "connected - driving";
        client!.start();
      },
      onError: (d) => (statusEl.textContent = `server error: ${d}`),
      onClose: () => (statusEl.textContent += " [closed]"),
    });
    form.classList.add("running");
  };

  setInterval(() => {
    if (!client) return;
    const pads = navigator.getGamepads ? navigator.getGamepads() : [];
    const pad = pads && pads[0] ? { axes: pads[0].axes } : null;
    const msg = input.control(undefined, pad);
    if (input.markRequested) {
      input.markRequested = false;
      msg.mark_found = nearestSymbolGuess();
    }
    client.sendControl(msg);
  }, 50);

  function nearestSymbolGuess(): string | null {
    // the operator marks whatever is centered; the log records the claim
    return null;
  }

  function frame(): void {
    const ops = buildFrame(client?.latest ?? null, map, mode, canvas.width, canvas.height);
    executeOps(ctx, ops);
    requestAnimationFrame(frame);
  }
  requestAnimationFrame(frame);
}

window.addEventListener("DOMContentLoaded", start);
