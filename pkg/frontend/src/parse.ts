/** Defensive decoding of service JSON.
 *
 * The service is trusted to be well behaved, but the viewer must not be:
 * a truncated proxy response or a version-skewed payload has to surface as
 * an error banner, not an uncaught TypeError mid-render. Every function
 * here returns null on the first violation and never throws.
 */

import type {
  Aabb,
  ClusterPayload,
  ErrorEnvelope,
  ObjectPayload,
  PointsPayload,
  QueryPayload,
  RelationPayload,
  Vec3,
} from "./types.js";

function isRecord(value: unknown): value is Record<string, unknown> {
  return typeof value === "object" && value !== null && !Array.isArray(value);
}

function isFiniteNumber(value: unknown): value is number {
  return typeof value === "number" && Number.isFinite(value);
}

function isCount(value: unknown): value is number {
  return isFiniteNumber(value) && Number.isInteger(value) && value >= 0;
}

function asVec3(value: unknown): Vec3 | null {
  if (!Array.isArray(value) || value.length !== 3) return null;
  const [x, y, z] = value;
  if (!isFiniteNumber(x) || !isFiniteNumber(y) || !isFiniteNumber(z)) return null;
  return [x, y, z];
}

function asAabb(value: unknown): Aabb | null {
  if (!isRecord(value)) return null;
  const min = asVec3(value.min);
  const max = asVec3(value.max);
  if (min === null || max === null) return null;
  return { min, max };
}

function asIndexList(value: unknown, limit: number): number[] | null {
  if (!Array.isArray(value)) return null;
  const out: number[] = [];
  for (const item of value) {
    if (!isCount(item) || item >= limit) return null;
    out.push(item);
  }
  return out;
}

/** Decode a points payload. Enforces that positions and colors are the
 * same length and consistent with the advertised stride and full count. */
export function parsePoints(body: unknown): PointsPayload | null {
  if (!isRecord(body)) return null;
  if (!isCount(body.point_count)) return null;
  if (!isCount(body.stride) || body.stride < 1) return null;
  if (!Array.isArray(body.positions) || !Array.isArray(body.colors)) return null;
  if (body.positions.length !== body.colors.length) return null;

  const expected = Math.ceil(body.point_count / body.stride);
  if (body.positions.length !== expected) return null;

  const positions: Vec3[] = [];
  for (const raw of body.positions) {
    const vec = asVec3(raw);
    if (vec === null) return null;
    positions.push(vec);
  }
  const colors: (Vec3 | null)[] = [];
  for (const raw of body.colors) {
    if (raw === null) {
      colors.push(null);
      continue;
    }
    const vec = asVec3(raw);
    if (vec === null) return null;
    colors.push(vec);
  }
  return { point_count: body.point_count, stride: body.stride, positions, colors };
}

function asCluster(value: unknown, pointCount: number): ClusterPayload | null {
  if (!isRecord(value)) return null;
  const indices = asIndexList(value.indices, pointCount);
  const centroid = asVec3(value.centroid);
  const aabb = asAabb(value.aabb);
  if (indices === null || centroid === null || aabb === null) return null;
  if (!isFiniteNumber(value.peak_score) || !isFiniteNumber(value.mean_score)) return null;
  if (!isCount(value.size) || value.size !== indices.length) return null;
  return {
    indices,
    centroid,
    aabb,
    peak_score: value.peak_score,
    mean_score: value.mean_score,
    size: value.size,
  };
}

/** Decode a query / click-query payload. Scores must cover the strided
 * map exactly; the threshold may be null when no cut was applied. */
export function parseQuery(body: unknown): QueryPayload | null {
  if (!isRecord(body)) return null;
  if (!isCount(body.point_count)) return null;
  if (!isCount(body.score_stride) || body.score_stride < 1) return null;
  if (!Array.isArray(body.scores)) return null;

  const expected = Math.ceil(body.point_count / body.score_stride);
  if (body.scores.length !== expected) return null;
  const scores: number[] = [];
  for (const raw of body.scores) {
    if (!isFiniteNumber(raw)) return null;
    scores.push(raw);
  }

  const threshold = body.threshold === null ? null : body.threshold;
  if (threshold !== null && !isFiniteNumber(threshold)) return null;

  if (!Array.isArray(body.clusters)) return null;
  const clusters: ClusterPayload[] = [];
  for (const raw of body.clusters) {
    const cluster = asCluster(raw, body.point_count);
    if (cluster === null) return null;
    clusters.push(cluster);
  }
  return {
    point_count: body.point_count,
    score_stride: body.score_stride,
    scores,
    threshold,
    clusters,
  };
}

function asObject(value: unknown): ObjectPayload | null {
  if (!isRecord(value)) return null;
  if (typeof value.name !== "string" || value.name.length === 0) return null;
  if (!isCount(value.point_count)) return null;
  const indices = asIndexList(value.indices, Number.MAX_SAFE_INTEGER);
  const centroid = asVec3(value.centroid);
  const aabb = asAabb(value.aabb);
  if (indices === null || centroid === null || aabb === null) return null;
  if (indices.length !== value.point_count) return null;
  return { name: value.name, point_count: value.point_count, indices, centroid, aabb };
}

/** Decode a spatial-relation payload. Exactly two named operands and one
 * resolved object record per operand. */
export function parseRelation(body: unknown): RelationPayload | null {
  if (!isRecord(body)) return null;
  if (typeof body.relation !== "string" || body.relation.length === 0) return null;
  if (!Array.isArray(body.operands) || body.operands.length !== 2) return null;
  const [a, b] = body.operands;
  if (typeof a !== "string" || typeof b !== "string") return null;
  if (!isFiniteNumber(body.value)) return null;
  if (!Array.isArray(body.objects) || body.objects.length !== 2) return null;
  const objects: ObjectPayload[] = [];
  for (const raw of body.objects) {
    const obj = asObject(raw);
    if (obj === null) return null;
    objects.push(obj);
  }
  return {
    relation: body.relation,
    operands: [a, b],
    value: body.value,
    objects,
  };
}

/** Decode the {"error": {"code", "message"}} envelope on non-2xx replies. */
export function parseErrorEnvelope(body: unknown): ErrorEnvelope | null {
  if (!isRecord(body)) return null;
  const error = body.error;
  if (!isRecord(error)) return null;
  if (typeof error.code !== "string" || typeof error.message !== "string") return null;
  return { code: error.code, message: error.message };
}
