import { describe, expect, it } from "vitest";

import {
  parseErrorEnvelope,
  parsePoints,
  parseQuery,
  parseRelation,
} from "../src/parse.js";
import { demoCloud, pointsBody } from "./helpers.js";

const cloud = demoCloud();

function validQuery(): Record<string, unknown> {
  return {
    point_count: 4,
    score_stride: 1,
    scores: [0.1, 0.9, 0.4, 0.2],
    threshold: 0.35,
    clusters: [
      {
        indices: [1, 2],
        centroid: [0.5, 0, 0],
        aabb: { min: [0, 0, 0], max: [1, 0, 0] },
        peak_score: 0.9,
        mean_score: 0.65,
        size: 2,
      },
    ],
  };
}

function validRelation(): Record<string, unknown> {
  return {
    relation: "howFar",
    operands: ["mug", "sink"],
    value: 0.84,
    objects: [
      {
        name: "mug",
        point_count: 2,
        indices: [0, 1],
        centroid: [0, 0, 0],
        aabb: { min: [0, 0, 0], max: [0.1, 0.1, 0.1] },
      },
      {
        name: "sink",
        point_count: 1,
        indices: [5],
        centroid: [1, 0, 0],
        aabb: { min: [1, 0, 0], max: [1, 0, 0] },
      },
    ],
  };
}

describe("parsePoints", () => {
  it("accepts a well-formed strided payload", () => {
    for (const stride of [1, 2, 7]) {
      const parsed = parsePoints(pointsBody(cloud, stride));
      expect(parsed).not.toBeNull();
      expect(parsed!.point_count).toBe(30);
      expect(parsed!.positions.length).toBe(Math.ceil(30 / stride));
      expect(parsed!.colors.length).toBe(parsed!.positions.length);
    }
  });

  it("keeps null color slots", () => {
    const parsed = parsePoints(pointsBody(cloud, 1));
    expect(parsed!.colors.some((c) => c === null)).toBe(true);
  });

  it("rejects length inconsistencies and bad values", () => {
    const good = pointsBody(cloud, 2);
    const cases: unknown[] = [
      null,
      [],
      "points",
      { ...good, point_count: 31 },
      { ...good, stride: 0 },
      { ...good, stride: undefined },
      { ...good, positions: (good.positions as unknown[]).slice(1) },
      { ...good, colors: (good.colors as unknown[]).slice(1) },
      { ...good, positions: [...(good.positions as unknown[]).slice(0, -1), [0, 1]] },
      { ...good, positions: [...(good.positions as unknown[]).slice(0, -1), [0, 1, NaN]] },
      { ...good, colors: [...(good.colors as unknown[]).slice(0, -1), "red"] },
    ];
    for (const body of cases) {
      expect(parsePoints(body)).toBeNull();
    }
  });
});

describe("parseQuery", () => {
  it("accepts a well-formed payload, with and without threshold", () => {
    const parsed = parseQuery(validQuery());
    expect(parsed).not.toBeNull();
    expect(parsed!.scores).toEqual([0.1, 0.9, 0.4, 0.2]);
    expect(parsed!.threshold).toBe(0.35);
    expect(parsed!.clusters[0]!.size).toBe(2);

    const open = parseQuery({ ...validQuery(), threshold: null });
    expect(open!.threshold).toBeNull();
  });

  it("enforces the score stride arithmetic", () => {
    const strided = { ...validQuery(), point_count: 7, score_stride: 3, scores: [1, 2, 3], clusters: [] };
    expect(parseQuery(strided)).not.toBeNull();
    expect(parseQuery({ ...strided, scores: [1, 2] })).toBeNull();
    expect(parseQuery({ ...strided, scores: [1, 2, 3, 4] })).toBeNull();
  });

  it("rejects corrupt score and cluster records", () => {
    const base = validQuery();
    const cluster = (patch: Record<string, unknown>) => ({
      ...base,
      clusters: [{ ...(base.clusters as Record<string, unknown>[])[0]!, ...patch }],
    });
    const cases: unknown[] = [
      { ...base, scores: [0.1, NaN, 0.4, 0.2] },
      { ...base, scores: [0.1, Infinity, 0.4, 0.2] },
      { ...base, scores: "high" },
      { ...base, threshold: "low" },
      { ...base, score_stride: 0 },
      cluster({ indices: [1, 4] }),
      cluster({ indices: [-1] }),
      cluster({ indices: [0.5] }),
      cluster({ size: 3 }),
      cluster({ centroid: [0, 0] }),
      cluster({ aabb: { min: [0, 0, 0] } }),
      cluster({ peak_score: "big" }),
    ];
    for (const body of cases) {
      expect(parseQuery(body)).toBeNull();
    }
  });
});

describe("parseRelation", () => {
  it("accepts a well-formed payload", () => {
    const parsed = parseRelation(validRelation());
    expect(parsed).not.toBeNull();
    expect(parsed!.relation).toBe("howFar");
    expect(parsed!.operands).toEqual(["mug", "sink"]);
    expect(parsed!.objects[1]!.name).toBe("sink");
  });

  it("rejects structural damage", () => {
    const base = validRelation();
    const objects = base.objects as Record<string, unknown>[];
    const cases: unknown[] = [
      { ...base, relation: "" },
      { ...base, operands: ["mug"] },
      { ...base, operands: ["mug", "sink", "tap"] },
      { ...base, value: "close" },
      { ...base, value: NaN },
      { ...base, objects: [objects[0]] },
      { ...base, objects: [objects[0], { ...objects[1], point_count: 2 }] },
      { ...base, objects: [objects[0], { ...objects[1], name: "" }] },
      { ...base, objects: [objects[0], { ...objects[1], centroid: null }] },
    ];
    for (const body of cases) {
      expect(parseRelation(body)).toBeNull();
    }
  });
});

describe("parseErrorEnvelope", () => {
  it("decodes the service envelope and nothing else", () => {
    expect(parseErrorEnvelope({ error: { code: "map_busy", message: "try later" } })).toEqual({
      code: "map_busy",
      message: "try later",
    });
    expect(parseErrorEnvelope({ detail: "not found" })).toBeNull();
    expect(parseErrorEnvelope({ error: "boom" })).toBeNull();
    expect(parseErrorEnvelope({ error: { code: 5, message: "boom" } })).toBeNull();
    expect(parseErrorEnvelope(null)).toBeNull();
  });
});
