// Pure ray casting against the wall segments of the map geometry.
// World frame matches the simulator: x right, y up, angles CCW from +x.

import { MapGeometry, SymbolGeom, WallGeom } from "./types.js";

export interface Hit {
  dist: number; // along the ray
  perp: number; // fisheye-corrected distance
  wall: WallGeom | null;
}

function raySegment(
  ox: number,
  oy: number,
  dx: number,
  dy: number,
  w: WallGeom
): number | null {
  const sx = w.p2[0] - w.p1[0];
  const sy = w.p2[1] - w.p1[1];
  const denom = dx * sy - dy * sx;
  if (denom === 0) return null;
  const qx = w.p1[0] - ox;
  const qy = w.p1[1] - oy;
  const t = (qx * sy - qy * sx) / denom; // along the ray
  const u = (qx * dy - qy * dx) / denom; // along the wall
  if (t > 1e-9 && u >= 0 && u <= 1) return t;
  return null;
}

export function castRay(
  ox: number,
  oy: number,
  angle: number,
  walls: WallGeom[]
): { dist: number; wall: WallGeom | null } {
  const dx = Math.cos(angle);
  const dy = Math.sin(angle);
  let best = Infinity;
  let hit: WallGeom | null = null;
  for (const w of walls) {
    const t = raySegment(ox, oy, dx, dy, w);
    if (t !== null && t < best) {
      best = t;
      hit = w;
    }
  }
  return { dist: best, wall: hit };
}

/** One fisheye-corrected hit per screen column. */
export function castColumns(
  ox: number,
  oy: number,
  camAngle: number,
  fovRad: number,
  columns: number,
  walls: WallGeom[]
): Hit[] {
  const out: Hit[] = [];
  const focal = 1 / Math.tan(fovRad / 2);
  for (let i = 0; i < columns; i++) {
    const ndc = (2 * (i + 0.5)) / columns - 1; // -1 .. 1, left to right
    // screen left = positive camera-frame angle offset
    const rel = Math.atan2(-ndc, focal);
    const { dist, wall } = castRay(ox, oy, camAngle + rel, walls);
    out.push({ dist, perp: dist * Math.cos(rel), wall });
  }
  return out;
}

export interface SymbolSprite {
  id: string;
  column: number; // fractional screen column in [0, columns)
  perp: number;
  sizePx: number; // projected square edge for a given screen width
  visible: boolean;
}

export function wrapAngle(a: number): number {
  let x = a % (2 * Math.PI);
  if (x <= -Math.PI) x += 2 * Math.PI;
  else if (x > Math.PI) x -= 2 * Math.PI;
  return x;
}

/** Project wall symbols onto the screen; hidden when occluded, behind, or
 * facing away. sizePx assumes square symbols of the configured area. */
export function projectSymbols(
  ox: number,
  oy: number,
  camAngle: number,
  fovRad: number,
  columns: number,
  screenWidth: number,
  map: MapGeometry
): SymbolSprite[] {
  const out: SymbolSprite[] = [];
  const focal = 1 / Math.tan(fovRad / 2);
  for (const sym of map.symbols) {
    const vx = sym.position[0] - ox;
    const vy = sym.position[1] - oy;
    const dist = Math.hypot(vx, vy);
    const facing = vx * sym.normal[0] + vy * sym.normal[1] < 0;
    const rel = wrapAngle(Math.atan2(vy, vx) - camAngle);
    const inFov = Math.abs(rel) < fovRad / 2 + 0.1;
    let visible = facing && inFov && dist > 0.05;
    if (visible) {
      // occlusion: nudge the test point off its host wall
      const px = sym.position[0] + sym.normal[0] * 0.01;
      const py = sym.position[1] + sym.normal[1] * 0.01;
      const toSym = Math.hypot(px - ox, py - oy);
      const ray = castRay(ox, oy, Math.atan2(py - oy, px - ox), map.walls);
      if (ray.dist < toSym - 1e-6) visible = false;
    }
    const ndc = -Math.tan(rel) * focal;
    const column = ((ndc + 1) / 2) * columns;
    const perp = dist * Math.cos(rel);
    const edgeM = Math.sqrt(sym.size_cm2) / 100; // true size on the wall
    const sizePx = ((edgeM / perp) * focal * screenWidth) / 2;
    out.push({ id: sym.id, column, perp, sizePx, visible });
  }
  return out;
}
