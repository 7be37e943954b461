/** Score-to-color mapping for query overlays.
 *
 * Heat is normalized per query: the reported threshold (or the score
 * minimum when no threshold was applied) maps to 0 and the score maximum
 * to 1, so the best-matching point is always drawn at full heat no matter
 * how compressed the similarity range is.
 */

export type Rgb = readonly [number, number, number];

/** Normalize raw scores into [0, 1] heat values.
 *
 * A degenerate range (all scores at or below the floor) falls back to an
 * indicator: points at the floor or above get 1, the rest 0.
 */
export function heatValues(scores: readonly number[], threshold: number | null): Float32Array {
  const out = new Float32Array(scores.length);
  if (scores.length === 0) return out;

  let max = -Infinity;
  let min = Infinity;
  for (const s of scores) {
    if (s > max) max = s;
    if (s < min) min = s;
  }
  const floor = threshold === null ? min : threshold;
  const span = max - floor;
  if (span <= 0) {
    for (let i = 0; i < scores.length; i++) {
      out[i] = (scores[i] as number) >= floor ? 1 : 0;
    }
    return out;
  }
  for (let i = 0; i < scores.length; i++) {
    const t = ((scores[i] as number) - floor) / span;
    out[i] = t < 0 ? 0 : t > 1 ? 1 : t;
  }
  return out;
}

const STOPS: readonly (readonly [number, Rgb])[] = [
  [0.0, [0.19, 0.07, 0.23]],
  [0.25, [0.13, 0.37, 0.66]],
  [0.5, [0.1, 0.7, 0.55]],
  [0.75, [0.95, 0.75, 0.15]],
  [1.0, [0.84, 0.15, 0.1]],
];

/** Map a heat value in [0, 1] to a gradient color. Out-of-range inputs
 * clamp to the endpoint stops. */
export function heatColor(t: number): Rgb {
  if (!Number.isFinite(t) || t <= 0) return STOPS[0]![1];
  if (t >= 1) return STOPS[STOPS.length - 1]![1];
  for (let i = 1; i < STOPS.length; i++) {
    const [hi, chi] = STOPS[i]!;
    if (t <= hi) {
      const [lo, clo] = STOPS[i - 1]!;
      const f = (t - lo) / (hi - lo);
      return [
        clo[0] + f * (chi[0] - clo[0]),
        clo[1] + f * (chi[1] - clo[1]),
        clo[2] + f * (chi[2] - clo[2]),
      ];
    }
  }
  return STOPS[STOPS.length - 1]![1];
}

/** Flat RGB buffer (3 per point) for a heat array, ready for a geometry
 * color attribute. */
export function heatColors(heat: Float32Array): Float32Array {
  const out = new Float32Array(heat.length * 3);
  for (let i = 0; i < heat.length; i++) {
    const [r, g, b] = heatColor(heat[i] as number);
    out[3 * i] = r;
    out[3 * i + 1] = g;
    out[3 * i + 2] = b;
  }
  return out;
}
