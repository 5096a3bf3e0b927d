// Pure frame model: telemetry + map geometry in, a list of draw operations
// out. The canvas shell just executes the ops, so tests can assert on
// rendered output without a DOM.

import { castColumns, projectSymbols, wrapAngle } from "./raycast.js";
import { MapGeometry, Mode, Telemetry } from "./types.js";

export type DrawOp =
  | {
      kind: "rect";
      x: number;
      y: number;
      w: number;
      h: number;
      color: string;
      tag: string;
      seg?: number;
    }
  | { kind: "text"; x: number; y: number; text: string; size: number; color: string; tag: string };

export const FOV_RAD = Math.PI / 2; // matches the simulator's detection FOV
export const BORDER_PX = 16;
const WALL_HEIGHT_M = 2.2;
const SYMBOL_COLORS: Record<string, string> = {};

function symbolColor(id: string): string {
  if (!(id in SYMBOL_COLORS)) {
    let h = 0;
    for (const ch of id) h = (h * 31 + ch.charCodeAt(0)) % 360;
    SYMBOL_COLORS[id] = `hsl(${h}, 80%, 60%)`;
  }
  return SYMBOL_COLORS[id];
}

export function segmentCenters(k: number): number[] {
  const out: number[] = [];
  for (let i = 0; i < k; i++) out.push(wrapAngle((2 * Math.PI * i) / k));
  return out;
}

interface PerimeterPoint {
  x: number;
  y: number;
  edge: "top-left" | "left" | "bottom" | "right" | "top-right";
}

/** Walk the border counterclockwise (in camera terms: to the left) starting
 * from top-center; s in [0, P). Screen y grows downward. */
function perimeterPoint(s: number, w: number, h: number): PerimeterPoint {
  const half = w / 2;
  if (s < half) return { x: half - s, y: 0, edge: "top-left" };
  s -= half;
  if (s < h) return { x: 0, y: s, edge: "left" };
  s -= h;
  if (s < w) return { x: s, y: h, edge: "bottom" };
  s -= w;
  if (s < h) return { x: w, y: h - s, edge: "right" };
  s -= h;
  return { x: w - s, y: 0, edge: "top-right" };
}

/** Axis-aligned strips covering the perimeter interval [s0, s1]. */
function borderStrips(
  s0: number,
  s1: number,
  w: number,
  h: number
): { x: number; y: number; w: number; h: number }[] {
  const P = 2 * (w + h);
  const out: { x: number; y: number; w: number; h: number }[] = [];
  let s = ((s0 % P) + P) % P;
  let remaining = s1 - s0;
  while (remaining > 1e-9) {
    const p = perimeterPoint(s, w, h);
    const edgeEnd =
      p.edge === "top-left"
        ? w / 2
        : p.edge === "left"
          ? w / 2 + h
          : p.edge === "bottom"
            ? w / 2 + h + w
            : p.edge === "right"
              ? w / 2 + 2 * h + w
              : P;
    const span = Math.min(remaining, edgeEnd - s);
    const q = perimeterPoint(Math.min(s + span, edgeEnd - 1e-9), w, h);
    if (p.edge === "top-left" || p.edge === "top-right") {
      out.push({ x: Math.min(p.x, q.x), y: 0, w: Math.abs(p.x - q.x), h: BORDER_PX });
    } else if (p.edge === "bottom") {
      out.push({ x: Math.min(p.x, q.x), y: h - BORDER_PX, w: Math.abs(p.x - q.x), h: BORDER_PX });
    } else if (p.edge === "left") {
      out.push({ x: 0, y: Math.min(p.y, q.y), w: BORDER_PX, h: Math.abs(p.y - q.y) });
    } else {
      out.push({ x: w - BORDER_PX, y: Math.min(p.y, q.y), w: BORDER_PX, h: Math.abs(p.y - q.y) });
    }
    s = (s + span) % P;
    remaining -= span;
  }
  return out;
}

export function segmentColor(value: number, brightness: number): string {
  const intensity = 0.35 + 0.65 * Math.min(Math.max(brightness, 0), 1);
  if (value > 0) {
    const g = Math.round(255 * Math.min(value, 1) * intensity);
    return `rgb(0,${g},0)`;
  }
  if (value < 0) {
    const r = Math.round(255 * Math.min(-value, 1) * intensity);
    return `rgb(${r},0,0)`;
  }
  return "rgb(70,70,70)";
}

function sceneOps(t: Telemetry, map: MapGeometry, w: number, h: number): DrawOp[] {
  const ops: DrawOp[] = [
    { kind: "rect", x: 0, y: 0, w, h: h / 2, color: "rgb(38,42,52)", tag: "bg" },
    { kind: "rect", x: 0, y: h / 2, w, h: h / 2, color: "rgb(52,48,44)", tag: "bg" },
  ];
  const cam = t.odometry.heading + t.camera_yaw + Math.PI / 2;
  const columns = Math.floor(w / 2);
  const hits = castColumns(t.odometry.x, t.odometry.y, cam, FOV_RAD, columns, map.walls);
  const focal = 1 / Math.tan(FOV_RAD / 2);
  for (let i = 0; i < columns; i++) {
    const hit = hits[i];
    if (!isFinite(hit.perp) || hit.perp <= 0.01) continue;
    const colH = Math.min(((WALL_HEIGHT_M / hit.perp) * focal * h) / 2, h);
    const shade = Math.max(40, Math.round(200 - hit.perp * 16));
    ops.push({
      kind: "rect",
      x: (i * w) / columns,
      y: (h - colH) / 2,
      w: w / columns + 1,
      h: colH,
      color: `rgb(${shade},${shade},${Math.round(shade * 1.08)})`,
      tag: "wall",
    });
  }
  const sprites = projectSymbols(
    t.odometry.x, t.odometry.y, cam, FOV_RAD, columns, w, map
  );
  sprites.sort((a, b) => b.perp - a.perp);
  for (const s of sprites) {
    if (!s.visible || s.column < 0 || s.column >= columns) continue;
    const wallHit = hits[Math.floor(s.column)];
    if (wallHit && wallHit.perp < s.perp - 0.05) continue; // behind a nearer wall
    const size = Math.max(s.sizePx, 5);
    ops.push({
      kind: "rect",
      x: (s.column * w) / columns - size / 2,
      y: h / 2 - size / 2,
      w: size,
      h: size,
      color: symbolColor(s.id),
      tag: "symbol",
    });
  }
  return ops;
}

function hudOps(t: Telemetry, w: number, h: number): DrawOp[] {
  const ops: DrawOp[] = [];
  const pct = Math.round(t.rss_percent);
  ops.push({
    kind: "text",
    x: w - 120,
    y: 40,
    text: `${pct}%`,
    size: 22,
    color: "rgb(255,255,255)",
    tag: "hud-percent",
  });
  for (let i = 0; i < 5; i++) {
    const filled = i < t.rss_bars;
    ops.push({
      kind: "rect",
      x: w - 120 + i * 14,
      y: 60 - (6 + i * 4),
      w: 10,
      h: 6 + i * 4,
      color: filled ? "rgb(90,220,90)" : "rgb(80,80,80)",
      tag: `hud-bar-${filled ? "on" : "off"}`,
    });
  }
  ops.push({
    kind: "text",
    x: 30,
    y: 40,
    text: `T-${Math.ceil(t.time_remaining)}s`,
    size: 18,
    color: "rgb(255,255,255)",
    tag: "hud-time",
  });
  ops.push({
    kind: "text",
    x: 30,
    y: 66,
    text: `found: ${t.symbols_found.length}`,
    size: 16,
    color: "rgb(220,220,160)",
    tag: "hud-found",
  });
  if (t.collision) {
    ops.push({
      kind: "rect",
      x: BORDER_PX,
      y: BORDER_PX,
      w: w - 2 * BORDER_PX,
      h: 6,
      color: "rgb(255,120,0)",
      tag: "hud-collision",
    });
  }
  return ops;
}

function barBorderOps(t: Telemetry, w: number, h: number): DrawOp[] {
  const segs = t.bar_segments ?? [];
  const k = segs.length;
  if (k === 0) return [];
  const brightness = t.bar_brightness ?? 0;
  const P = 2 * (w + h);
  const ops: DrawOp[] = [];
  const centers = segmentCenters(k);
  for (let i = 0; i < k; i++) {
    const sCenter = (((centers[i] / (2 * Math.PI)) * P) % P + P) % P;
    const color = segmentColor(segs[i], brightness);
    for (const r of borderStrips(sCenter - P / (2 * k), sCenter + P / (2 * k), w, h)) {
      ops.push({ kind: "rect", ...r, color, tag: "bar-seg", seg: i });
    }
  }
  return ops;
}

function bannerOps(t: Telemetry, w: number, h: number): DrawOp[] {
  if (t.status === "SIGNAL_LOST") {
    return [
      { kind: "rect", x: 0, y: 0, w, h, color: "rgba(30,0,0,0.82)", tag: "banner-bg" },
      {
        kind: "text",
        x: w / 2 - 150,
        y: h / 2,
        text: "SIGNAL LOST",
        size: 48,
        color: "rgb(255,60,60)",
        tag: "banner",
      },
    ];
  }
  if (t.status === "TIMEOUT") {
    return [
      { kind: "rect", x: 0, y: 0, w, h, color: "rgba(0,0,20,0.75)", tag: "banner-bg" },
      {
        kind: "text",
        x: w / 2 - 120,
        y: h / 2,
        text: "TIME UP",
        size: 42,
        color: "rgb(220,220,255)",
        tag: "banner",
      },
      {
        kind: "text",
        x: w / 2 - 120,
        y: h / 2 + 40,
        text: `symbols found: ${t.symbols_found.length}`,
        size: 20,
        color: "rgb(220,220,255)",
        tag: "banner-summary",
      },
    ];
  }
  return [];
}

const PLACEHOLDER_GRID = 8;

export function buildFrame(
  t: Telemetry | null,
  map: MapGeometry | null,
  mode: Mode,
  w: number,
  h: number
): DrawOp[] {
  if (t === null) {
    return [
      { kind: "rect", x: 0, y: 0, w, h, color: "rgb(20,20,24)", tag: "bg" },
      { kind: "text", x: 30, y: 40, text: "waiting for telemetry...", size: 18, color: "rgb(200,200,200)", tag: "status" },
    ];
  }
  const ops: DrawOp[] = [];
  if (map === null) {
    ops.push({ kind: "rect", x: 0, y: 0, w, h, color: "rgb(24,24,28)", tag: "bg" });
    for (let i = 1; i < PLACEHOLDER_GRID; i++) {
      ops.push({ kind: "rect", x: (i * w) / PLACEHOLDER_GRID, y: 0, w: 1, h, color: "rgb(60,60,70)", tag: "placeholder-grid" });
      ops.push({ kind: "rect", x: 0, y: (i * h) / PLACEHOLDER_GRID, w, h: 1, color: "rgb(60,60,70)", tag: "placeholder-grid" });
    }
    ops.push({ kind: "text", x: 30, y: 40, text: "map unavailable", size: 20, color: "rgb(255,180,0)", tag: "warning" });
  } else {
    ops.push(...sceneOps(t, map, w, h));
  }
  if (mode === "vdoa") {
    ops.push(...barBorderOps(t, w, h));
  }
  ops.push(...hudOps(t, w, h));
  ops.push(...bannerOps(t, w, h));
  return ops;
}
