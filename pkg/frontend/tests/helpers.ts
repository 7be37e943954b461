/** Shared fixtures: a deterministic point cloud, a scripted fetch that
 * stands in for the mapping service, and a fixed orthographic projector
 * for picking tests. */

import type { FetchLike } from "../src/client.js";
import type { Projected } from "../src/picking.js";
import type { Vec3 } from "../src/types.js";

/** Small multiplicative congruential generator so fixtures are stable
 * across runs without pulling in an RNG package. */
export function lcg(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (Math.imul(state, 1664525) + 1013904223) >>> 0;
    return state / 2 ** 32;
  };
}

export interface DemoCloud {
  readonly positions: Vec3[];
  readonly colors: (Vec3 | null)[];
  /** Index ranges of the two planted objects. */
  readonly first: number[];
  readonly second: number[];
}

/** 30 points: two 8-point clumps ("first" near x=-0.4, "second" near
 * x=+0.5) and 14 background points spread wider. */
export function demoCloud(): DemoCloud {
  const rand = lcg(0x5eed);
  const positions: Vec3[] = [];
  const colors: (Vec3 | null)[] = [];
  const jitter = () => (rand() - 0.5) * 0.04;
  const first: number[] = [];
  const second: number[] = [];
  for (let i = 0; i < 8; i++) {
    first.push(positions.length);
    positions.push([-0.4 + jitter(), jitter(), jitter()]);
    colors.push([200, 60, 40]);
  }
  for (let i = 0; i < 8; i++) {
    second.push(positions.length);
    positions.push([0.5 + jitter(), 0.1 + jitter(), jitter()]);
    colors.push([40, 80, 210]);
  }
  for (let i = 0; i < 14; i++) {
    positions.push([(rand() - 0.5) * 2.4, (rand() - 0.5) * 2.4, (rand() - 0.5) * 0.6]);
    colors.push(i % 5 === 0 ? null : [90, 90, 90]);
  }
  return { positions, colors, first, second };
}

export function centroid(points: Vec3[], indices: number[]): Vec3 {
  let x = 0;
  let y = 0;
  let z = 0;
  for (const i of indices) {
    const p = points[i]!;
    x += p[0];
    y += p[1];
    z += p[2];
  }
  const n = indices.length;
  return [x / n, y / n, z / n];
}

/** Build the points-endpoint body for a cloud at a given stride. */
export function pointsBody(cloud: DemoCloud, stride: number): Record<string, unknown> {
  const positions: Vec3[] = [];
  const colors: (Vec3 | null)[] = [];
  for (let i = 0; i < cloud.positions.length; i += stride) {
    positions.push(cloud.positions[i]!);
    colors.push(cloud.colors[i]!);
  }
  return { point_count: cloud.positions.length, stride, positions, colors };
}

/** Heat source used by the mock service: distance-decaying similarity to
 * a seed point, maximal (exactly 1) at the seed itself. */
export function scoresAround(cloud: DemoCloud, seedIndex: number, stride: number): number[] {
  const seed = cloud.positions[seedIndex]!;
  const out: number[] = [];
  for (let i = 0; i < cloud.positions.length; i += stride) {
    const p = cloud.positions[i]!;
    const d = Math.hypot(p[0] - seed[0], p[1] - seed[1], p[2] - seed[2]);
    out.push(1 / (1 + d));
  }
  return out;
}

export function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

export function rawResponse(text: string, status = 200): Response {
  return new Response(text, { status, headers: { "content-type": "application/json" } });
}

export function envelope(code: string, message: string, status: number): Response {
  return jsonResponse({ error: { code, message } }, status);
}

export interface RecordedCall {
  readonly url: string;
  readonly method: string;
  readonly body: unknown;
}

export type Route = (call: RecordedCall) => Response | Promise<Response>;

/** Scripted fetch: dispatches on "METHOD /path" prefix matches and records
 * every call for assertions. Unmatched paths 404 with the service envelope. */
export function scriptedFetch(routes: Record<string, Route>): FetchLike & { calls: RecordedCall[] } {
  const calls: RecordedCall[] = [];
  const fn = (async (url: string, init?: RequestInit) => {
    const method = init?.method ?? "GET";
    const path = url.replace(/^https?:\/\/[^/]+/, "");
    const body = typeof init?.body === "string" ? JSON.parse(init.body) : null;
    const call: RecordedCall = { url: path, method, body };
    calls.push(call);
    for (const [key, route] of Object.entries(routes)) {
      const [routeMethod, routePath] = key.split(" ", 2) as [string, string];
      if (method === routeMethod && path.startsWith(routePath)) return route(call);
    }
    return envelope("map_not_found", `no route for ${method} ${path}`, 404);
  }) as FetchLike & { calls: RecordedCall[] };
  fn.calls = calls;
  return fn;
}

/** Fixed-frame orthographic projector: world x right, y up, 100 px per
 * meter, centered at (400, 300). Depth grows with -z. */
export function orthoProject(x: number, y: number, z: number): Projected | null {
  return { x: 400 + 100 * x, y: 300 - 100 * y, depth: 10 - z };
}

/** Screen coordinates of a cloud point under orthoProject. */
export function screenOf(p: Vec3): { x: number; y: number } {
  return { x: 400 + 100 * p[0], y: 300 - 100 * p[1] };
}

/** Deferred promise for response-ordering tests. */
export function deferred<T>(): { promise: Promise<T>; resolve: (value: T) => void } {
  let resolve!: (value: T) => void;
  const promise = new Promise<T>((r) => {
    resolve = r;
  });
  return { promise, resolve };
}
