import { describe, expect, it } from "vitest";

import { buildFrame, segmentCenters, segmentColor, DrawOp } from "../src/view.js";
import { MapGeometry, Telemetry } from "../src/types.js";

const W = 960;
const H = 600;

function telemetry(partial: Partial<Telemetry> = {}): Telemetry {
  return {
    type: "telemetry",
    t: 10.0,
    status: "RUNNING",
    time_remaining: 170.0,
    odometry: { x: 6.0, y: 1.2, heading: Math.PI / 2 },
    camera_yaw: 0,
    rss_percent: 50,
    rss_bars: 3,
    symbols_found: [],
    collision: false,
    collisions_total: 0,
    applied_control: { v_forward: 0, v_lateral: 0, camera_yaw_rate: 0 },
    bar_segments: new Array(16).fill(0),
    bar_brightness: 0.5,
    ...partial,
  };
}

const MAP: MapGeometry = {
  name: "t",
  bounds: [
    [0, 0],
    [12, 9],
  ],
  walls: [
    { p1: [0, 0], p2: [12, 0] },
    { p1: [12, 0], p2: [12, 9] },
    { p1: [12, 9], p2: [0, 9] },
    { p1: [0, 9], p2: [0, 0] },
  ],
  symbols: [{ id: "star", position: [6, 9], normal: [0, -1], size_cm2: 40 }],
  spawn: { position: [6, 1.2], heading: Math.PI / 2 },
  time_limit_s: 180,
  interface_mode: "vdoa",
};

function wrap(a: number): number {
  let x = a % (2 * Math.PI);
  if (x <= -Math.PI) x += 2 * Math.PI;
  else if (x > Math.PI) x -= 2 * Math.PI;
  return x;
}

function greenOf(color: string): number {
  const m = color.match(/^rgb\((\d+),(\d+),(\d+)\)$/);
  return m ? parseInt(m[2], 10) : 0;
}

describe("color bar border", () => {
  it("greenest segment lands within one segment width of the DoA", () => {
    // acceptance: 100 random screen-angle DoAs on the 16-segment bar
    const k = 16;
    const centers = segmentCenters(k);
    let rngState = 12345;
    const rand = () => {
      rngState = (rngState * 1103515245 + 12345) % 2147483648;
      return rngState / 2147483648;
    };
    for (let trial = 0; trial < 100; trial++) {
      const theta = rand() * 2 * Math.PI - Math.PI;
      const segs = centers.map((c) => Math.cos(c - theta));
      const t = telemetry({ bar_segments: segs, bar_brightness: 1.0 });
      const ops = buildFrame(t, MAP, "vdoa", W, H);
      const barOps = ops.filter(
        (o): o is Extract<DrawOp, { kind: "rect" }> => o.kind === "rect" && o.tag === "bar-seg"
      );
      expect(barOps.length).toBeGreaterThan(0);
      let best = barOps[0];
      for (const op of barOps) if (greenOf(op.color) > greenOf(best.color)) best = op;
      const err = Math.abs(wrap(centers[best.seg!] - theta));
      expect(err).toBeLessThanOrEqual((2 * Math.PI) / 16 + 1e-9);
    }
  });

  it("bar mode renders pixel-identically with and without gradient data", () => {
    const withData = telemetry({
      bar_segments: segmentCenters(16).map((c) => Math.cos(c - 0.7)),
      bar_brightness: 0.9,
    });
    const zeroed = telemetry({ bar_segments: new Array(16).fill(0), bar_brightness: 0 });
    const a = buildFrame(withData, MAP, "bar", W, H);
    const b = buildFrame(zeroed, MAP, "bar", W, H);
    expect(a).toEqual(b);
    // sanity: the same diff in vdoa mode is visible
    const c = buildFrame(withData, MAP, "vdoa", W, H);
    const d = buildFrame(zeroed, MAP, "vdoa", W, H);
    expect(c).not.toEqual(d);
  });

  it("neutral segments render gray", () => {
    expect(segmentColor(0, 0.5)).toBe("rgb(70,70,70)");
    const ops = buildFrame(telemetry(), MAP, "vdoa", W, H);
    const bar = ops.filter((o) => o.kind === "rect" && o.tag === "bar-seg");
    expect(new Set(bar.map((o) => (o as { color: string }).color))).toEqual(
      new Set(["rgb(70,70,70)"])
    );
  });

  it("brightness scales intensity", () => {
    const dim = segmentColor(1.0, 0.0);
    const bright = segmentColor(1.0, 1.0);
    expect(greenOf(bright)).toBeGreaterThan(greenOf(dim));
    expect(greenOf(bright)).toBe(255);
  });
});

describe("hud", () => {
  it("shows percent text and matching filled bars", () => {
    const ops = buildFrame(telemetry({ rss_percent: 73, rss_bars: 4 }), MAP, "bar", W, H);
    const pct = ops.find((o) => o.kind === "text" && o.tag === "hud-percent");
    expect(pct && (pct as { text: string }).text).toBe("73%");
    const on = ops.filter((o) => o.tag === "hud-bar-on");
    const off = ops.filter((o) => o.tag === "hud-bar-off");
    expect(on.length).toBe(4);
    expect(off.length).toBe(1);
  });
});

describe("terminal banners", () => {
  it("shows the SIGNAL LOST banner", () => {
    const ops = buildFrame(telemetry({ status: "SIGNAL_LOST" }), MAP, "vdoa", W, H);
    const banner = ops.find((o) => o.kind === "text" && o.tag === "banner");
    expect(banner && (banner as { text: string }).text).toBe("SIGNAL LOST");
  });

  it("shows a timeout summary", () => {
    const ops = buildFrame(
      telemetry({ status: "TIMEOUT", symbols_found: ["a", "b"] }),
      MAP,
      "vdoa",
      W,
      H
    );
    const banner = ops.find((o) => o.kind === "text" && o.tag === "banner");
    expect(banner && (banner as { text: string }).text).toBe("TIME UP");
    const summary = ops.find((o) => o.tag === "banner-summary");
    expect(summary && (summary as { text: string }).text).toContain("2");
  });
});

describe("scene", () => {
  it("renders a placeholder grid and warning without a map", () => {
    const ops = buildFrame(telemetry(), null, "vdoa", W, H);
    expect(ops.some((o) => o.tag === "placeholder-grid")).toBe(true);
    expect(ops.some((o) => o.tag === "warning")).toBe(true);
  });

  it("is deterministic for identical inputs", () => {
    const t = telemetry();
    expect(buildFrame(t, MAP, "vdoa", W, H)).toEqual(buildFrame(t, MAP, "vdoa", W, H));
  });
});
