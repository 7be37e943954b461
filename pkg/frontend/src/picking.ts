/** Screen-space point picking.
 *
 * A click selects the point whose projection lands nearest the cursor
 * within a small pixel radius; ties on distance go to the point closer to
 * the camera. Projection is injected as a callback so this stays free of
 * any renderer dependency.
 */

/** Screen position of a projected point. `depth` increases away from the
 * camera; points behind the camera are reported as null. */
export interface Projected {
  readonly x: number;
  readonly y: number;
  readonly depth: number;
}

export type ProjectFn = (x: number, y: number, z: number) => Projected | null;

export const DEFAULT_PICK_RADIUS_PX = 8;

/** Find the loaded-point index nearest to (sx, sy) within `radius` pixels,
 * or null when nothing projects that close. `positions` is a flat xyz
 * buffer of the loaded (strided) points. */
export function pickPoint(
  positions: Float32Array,
  project: ProjectFn,
  sx: number,
  sy: number,
  radius: number = DEFAULT_PICK_RADIUS_PX,
): number | null {
  const r2 = radius * radius;
  let best: number | null = null;
  let bestDist = Infinity;
  let bestDepth = Infinity;
  const count = Math.floor(positions.length / 3);
  for (let i = 0; i < count; i++) {
    const p = project(
      positions[3 * i] as number,
      positions[3 * i + 1] as number,
      positions[3 * i + 2] as number,
    );
    if (p === null) continue;
    const dx = p.x - sx;
    const dy = p.y - sy;
    const d2 = dx * dx + dy * dy;
    if (d2 > r2) continue;
    if (d2 < bestDist || (d2 === bestDist && p.depth < bestDepth)) {
      best = i;
      bestDist = d2;
      bestDepth = p.depth;
    }
  }
  return best;
}
