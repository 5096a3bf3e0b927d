import { describe, expect, it } from "vitest";

import { castColumns, castRay, projectSymbols } from "../src/raycast.js";
import { MapGeometry } from "../src/types.js";

const FOV = Math.PI / 2;

describe("castRay", () => {
  it("hits a facing wall at the right distance", () => {
    const walls = [{ p1: [2, -5] as [number, number], p2: [2, 5] as [number, number] }];
    const { dist } = castRay(1, 0, 0, walls);
    expect(dist).toBeCloseTo(1.0, 9);
  });

  it("misses walls behind the origin", () => {
    const walls = [{ p1: [0, -5] as [number, number], p2: [0, 5] as [number, number] }];
    const { dist } = castRay(1, 0, 0, walls);
    expect(dist).toBe(Infinity);
  });
});

describe("castColumns pinhole oracle", () => {
  it("a flat facing wall has constant perpendicular distance", () => {
    // standing 1 m from an infinite-ish wall: every column's corrected
    // distance equals 1, so the wall fills a constant-height band
    const walls = [{ p1: [2, -50] as [number, number], p2: [2, 50] as [number, number] }];
    const hits = castColumns(1, 0, 0, FOV, 101, walls);
    for (const h of hits) {
      expect(h.perp).toBeCloseTo(1.0, 6);
    }
    // raw distance at the outermost sampled column (pixel center, not the
    // exact FOV edge): 1 / cos(atan(ndc)) with ndc = 1 - 1/101
    const ndc = 1 - 1 / 101;
    expect(hits[0].dist).toBeCloseTo(1 / Math.cos(Math.atan(ndc)), 6);
  });
});

const MAP: MapGeometry = {
  name: "t",
  bounds: [
    [0, 0],
    [10, 10],
  ],
  walls: [
    { p1: [4, 0], p2: [4, 10] },
    { p1: [7, 2], p2: [7, 8] },
  ],
  symbols: [
    { id: "front", position: [4, 5], normal: [1, 0], size_cm2: 40 },
    { id: "back", position: [7, 5], normal: [-1, 0], size_cm2: 40 },
  ],
  spawn: { position: [5, 5], heading: 0 },
  time_limit_s: 180,
  interface_mode: "vdoa",
};

describe("projectSymbols", () => {
  it("sees a facing symbol ahead and not the one behind", () => {
    // camera at (5,5) looking toward -x (at the x=4 wall)
    const sprites = projectSymbols(5, 5, Math.PI, FOV, 200, 960, MAP);
    const front = sprites.find((s) => s.id === "front")!;
    const back = sprites.find((s) => s.id === "back")!;
    expect(front.visible).toBe(true);
    expect(front.column).toBeCloseTo(100, 0); // dead center
    expect(back.visible).toBe(false);
  });

  it("hides symbols occluded by a nearer wall", () => {
    // looking at the far symbol through the x=7 wall from the west side
    const map2: MapGeometry = {
      ...MAP,
      symbols: [{ id: "hidden", position: [9.99, 5], normal: [-1, 0], size_cm2: 40 }],
      walls: [...MAP.walls, { p1: [10, 0], p2: [10, 10] }],
    };
    const sprites = projectSymbols(5, 5, 0, FOV, 200, 960, map2);
    expect(sprites[0].visible).toBe(false);
  });

  it("projected size shrinks with distance", () => {
    const near = projectSymbols(4.5, 5, Math.PI, FOV, 200, 960, MAP).find(
      (s) => s.id === "front"
    )!;
    const far = projectSymbols(5.5, 5, Math.PI, FOV, 200, 960, MAP).find(
      (s) => s.id === "front"
    )!;
    expect(near.sizePx).toBeGreaterThan(far.sizePx);
    expect(near.sizePx / far.sizePx).toBeCloseTo(3.0, 1); // 0.5 m vs 1.5 m
  });
});
