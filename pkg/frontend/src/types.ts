/** Wire-level shapes returned by the mapping service, plus the small
 * view-side records derived from them. Everything here mirrors the JSON
 * the HTTP endpoints emit; nothing is computed in the viewer. */

export type Vec3 = readonly [number, number, number];

/** Axis-aligned bounding box, inclusive corners. */
export interface Aabb {
  readonly min: Vec3;
  readonly max: Vec3;
}

/** Body of GET /maps/{id}/points: positions and colors are subsampled by
 * `stride`, while `point_count` stays the full (unstrided) map size. */
export interface PointsPayload {
  readonly point_count: number;
  readonly stride: number;
  readonly positions: readonly Vec3[];
  readonly colors: readonly (Vec3 | null)[];
}

export interface ClusterPayload {
  readonly indices: readonly number[];
  readonly centroid: Vec3;
  readonly aabb: Aabb;
  readonly peak_score: number;
  readonly mean_score: number;
  readonly size: number;
}

/** Body of POST /maps/{id}/query and /maps/{id}/query/click. Scores are
 * subsampled by `score_stride` over the full map ordering. */
export interface QueryPayload {
  readonly point_count: number;
  readonly score_stride: number;
  readonly scores: readonly number[];
  readonly threshold: number | null;
  readonly clusters: readonly ClusterPayload[];
}

export interface ObjectPayload {
  readonly name: string;
  readonly point_count: number;
  readonly indices: readonly number[];
  readonly centroid: Vec3;
  readonly aabb: Aabb;
}

/** Body of POST /maps/{id}/spatial. `value` is a distance in meters for
 * measurement relations and 0/1 for boolean ones. */
export interface RelationPayload {
  readonly relation: string;
  readonly operands: readonly [string, string];
  readonly value: number;
  readonly objects: readonly ObjectPayload[];
}

/** Every non-2xx service response carries this envelope. */
export interface ErrorEnvelope {
  readonly code: string;
  readonly message: string;
}
