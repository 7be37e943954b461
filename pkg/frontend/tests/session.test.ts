import { describe, expect, it } from "vitest";

import { ServiceClient } from "../src/client.js";
import { ViewSession } from "../src/session.js";
import {
  centroid,
  deferred,
  demoCloud,
  envelope,
  jsonResponse,
  pointsBody,
  rawResponse,
  type Route,
  scoresAround,
  screenOf,
  scriptedFetch,
  orthoProject,
} from "./helpers.js";

const STRIDE = 2;

function queryBody(
  scores: number[],
  threshold: number | null = null,
  clusters: unknown[] = [],
): Record<string, unknown> {
  return {
    point_count: 30,
    score_stride: STRIDE,
    scores,
    threshold,
    clusters,
  };
}

function flatScores(value: number): number[] {
  return new Array(15).fill(value);
}

async function readySession(routes: Record<string, Route> = {}) {
  const cloud = demoCloud();
  const fetchFn = scriptedFetch({
    "GET /maps/m1/points": () => jsonResponse(pointsBody(cloud, STRIDE)),
    ...routes,
  });
  const session = new ViewSession(new ServiceClient("http://svc", fetchFn));
  await session.loadMap("m1", STRIDE);
  return { session, fetchFn, cloud };
}

describe("loadMap", () => {
  it("loads the strided cloud and becomes ready", async () => {
    const { session, cloud } = await readySession();
    expect(session.state.status).toBe("ready");
    expect(session.loadedCount).toBe(15);
    expect(session.loadedPositions[0]).toBeCloseTo(cloud.positions[0]![0], 6);
    expect(session.loadedPositions[3]).toBeCloseTo(cloud.positions[2]![0], 6);
    expect(session.loadedColors.length).toBe(15);
  });

  it("turns a service error into the fatal banner", async () => {
    const fetchFn = scriptedFetch({
      "GET /": () => envelope("map_not_found", "no map named 'nope'", 404),
    });
    const session = new ViewSession(new ServiceClient("http://svc", fetchFn));
    await session.loadMap("nope", 1);
    expect(session.state.status).toBe("error");
    expect(session.state.error).toContain("map_not_found");
    expect(session.state.error).toContain("no map named 'nope'");
  });

  it("treats an undecodable body as fatal", async () => {
    const fetchFn = scriptedFetch({ "GET /": () => rawResponse("[1, 2", 200) });
    const session = new ViewSession(new ServiceClient("http://svc", fetchFn));
    await session.loadMap("m1", 1);
    expect(session.state.status).toBe("error");
  });

  it("treats a structurally wrong body as fatal", async () => {
    const cloud = demoCloud();
    const body = pointsBody(cloud, 2) as { positions: unknown[] };
    body.positions = body.positions.slice(1);
    const fetchFn = scriptedFetch({ "GET /": () => jsonResponse(body) });
    const session = new ViewSession(new ServiceClient("http://svc", fetchFn));
    await session.loadMap("m1", 2);
    expect(session.state.status).toBe("error");
    expect(session.state.error).toContain("malformed");
  });
});

describe("text queries", () => {
  it("posts the name with the loaded stride and installs the overlay", async () => {
    const { session, fetchFn } = await readySession({
      "POST /maps/m1/query": () => jsonResponse(queryBody(flatScores(0.5), 0.4)),
    });
    await session.submitText("  mug ");
    const call = fetchFn.calls.find((c) => c.url.endsWith("/query"))!;
    expect(call.body).toEqual({ name: "mug", score_stride: STRIDE });
    expect(session.state.overlay).not.toBeNull();
    expect(session.state.overlay!.label).toBe("mug");
    expect(session.state.overlay!.heat.length).toBe(15);
    expect(session.state.busy).toBe(false);
  });

  it("replaces the previous overlay instead of blending", async () => {
    const scoresByName: Record<string, number[]> = {
      mug: flatScores(0.2),
      sink: flatScores(0.9),
    };
    const { session } = await readySession({
      "POST /maps/m1/query": (call) =>
        jsonResponse(queryBody(scoresByName[(call.body as { name: string }).name]!)),
    });
    await session.submitText("mug");
    const first = session.state.overlay;
    await session.submitText("sink");
    expect(session.state.overlay).not.toBe(first);
    expect(session.state.overlay!.label).toBe("sink");
  });

  it("shows unknown objects as an inline notice and keeps the overlay", async () => {
    let served = 0;
    const { session } = await readySession({
      "POST /maps/m1/query": () => {
        served++;
        return served === 1
          ? jsonResponse(queryBody(flatScores(0.5)))
          : envelope("object_not_found", "no object found for operand 'tap'", 404);
      },
    });
    await session.submitText("mug");
    const overlay = session.state.overlay;
    await session.submitText("tap");
    expect(session.state.status).toBe("ready");
    expect(session.state.notice).toContain("'tap'");
    expect(session.state.overlay).toBe(overlay);
  });

  it("shows a busy map as a toast and keeps the overlay", async () => {
    let served = 0;
    const { session } = await readySession({
      "POST /maps/m1/query": () => {
        served++;
        return served === 1
          ? jsonResponse(queryBody(flatScores(0.5)))
          : envelope("map_busy", "map is fusing a frame, retry shortly", 409);
      },
    });
    await session.submitText("mug");
    const overlay = session.state.overlay;
    await session.submitText("mug");
    expect(session.state.status).toBe("ready");
    expect(session.state.toast).toContain("retry shortly");
    expect(session.state.overlay).toBe(overlay);
    expect(session.state.busy).toBe(false);
  });

  it("degrades to the error state on a mismatched score payload", async () => {
    const { session } = await readySession({
      "POST /maps/m1/query": () => jsonResponse(queryBody([0.1, 0.2])),
    });
    await session.submitText("mug");
    expect(session.state.status).toBe("error");
    expect(session.state.overlay).toBeNull();
  });

  it("ignores blank input entirely", async () => {
    const { session, fetchFn } = await readySession();
    const before = fetchFn.calls.length;
    await session.submitText("   ");
    expect(fetchFn.calls.length).toBe(before);
    expect(session.canSubmit("   ")).toBe(false);
    expect(session.canSubmit("mug")).toBe(true);
  });

  it("discards responses that arrive after a newer request", async () => {
    const slow = deferred<Response>();
    const { session } = await readySession({
      "POST /maps/m1/query": (call) =>
        (call.body as { name: string }).name === "slowpoke"
          ? slow.promise
          : jsonResponse(queryBody(flatScores(0.9))),
    });
    const stale = session.submitText("slowpoke");
    const fresh = session.submitText("fast");
    await fresh;
    expect(session.state.overlay!.label).toBe("fast");

    slow.resolve(jsonResponse(queryBody(flatScores(0.1))));
    await stale;
    expect(session.state.overlay!.label).toBe("fast");
    expect(session.state.busy).toBe(false);
  });
});

describe("click queries", () => {
  it("maps the picked point to its full-map index and queries it", async () => {
    const { session, fetchFn, cloud } = await readySession({
      "POST /maps/m1/query/click": (call) =>
        jsonResponse(queryBody(scoresAround(cloud, (call.body as { index: number }).index, STRIDE))),
    });
    const target = screenOf(cloud.positions[6]!);
    const local = await session.clickAt(target.x, target.y, orthoProject);
    expect(local).toBe(3);

    const call = fetchFn.calls.find((c) => c.url.endsWith("/query/click"))!;
    expect(call.body).toEqual({ index: 6, score_stride: STRIDE });
    expect(session.state.overlay!.label).toBe("point #6");
    expect(session.state.overlay!.heat[3]).toBe(1);
  });

  it("hints on a miss without issuing a request", async () => {
    const { session, fetchFn } = await readySession();
    const before = fetchFn.calls.length;
    const local = await session.clickAt(5, 5, orthoProject);
    expect(local).toBeNull();
    expect(fetchFn.calls.length).toBe(before);
    expect(session.state.notice).toContain("no point");
    expect(session.state.status).toBe("ready");
  });

  it("refuses to pick before a map is loaded", async () => {
    const session = new ViewSession(new ServiceClient("http://svc", scriptedFetch({})));
    expect(await session.clickAt(400, 300, orthoProject)).toBeNull();
  });
});

describe("spatial queries", () => {
  it("routes relation-shaped text to the spatial endpoint", async () => {
    const { session, fetchFn, cloud } = await readySession({
      "POST /maps/m1/spatial": () =>
        jsonResponse({
          relation: "isLeftOf",
          operands: ["first", "second"],
          value: 1,
          objects: [
            {
              name: "first",
              point_count: cloud.first.length,
              indices: cloud.first,
              centroid: centroid(cloud.positions, cloud.first),
              aabb: { min: [-1, -1, -1], max: [1, 1, 1] },
            },
            {
              name: "second",
              point_count: cloud.second.length,
              indices: cloud.second,
              centroid: centroid(cloud.positions, cloud.second),
              aabb: { min: [-1, -1, -1], max: [1, 1, 1] },
            },
          ],
        }),
    });
    await session.submitText("isLeftOf(first, second)");
    const call = fetchFn.calls.find((c) => c.url.endsWith("/spatial"))!;
    expect(call.body).toEqual({ expression: "isLeftOf(first, second)" });

    const state = session.state;
    expect(state.annotation?.kind).toBe("bool");
    expect(state.annotation?.kind === "bool" && state.annotation.value).toBe(true);
    expect(state.overlay).toBeNull();

    // Only even cloud indices are loaded at stride 2, mapped to index/2.
    const expected = [...cloud.first, ...cloud.second]
      .filter((i) => i % STRIDE === 0)
      .map((i) => i / STRIDE);
    expect([...state.highlight!].sort((a, b) => a - b)).toEqual(expected);
  });

  it("keeps parse failures inline, not fatal", async () => {
    const { session } = await readySession({
      "POST /maps/m1/spatial": () =>
        envelope("parse_error", "expression must look like relation(a, b)", 422),
    });
    await session.submitText("howFar(mug, )");
    expect(session.state.status).toBe("ready");
    expect(session.state.notice).toContain("relation(a, b)");
  });
});

describe("state plumbing", () => {
  it("notifies subscribers with detached snapshots", async () => {
    const seen: string[] = [];
    const { session } = await readySession({
      "POST /maps/m1/query": () => jsonResponse(queryBody(flatScores(0.5))),
    });
    const unsubscribe = session.subscribe((s) => seen.push(`${s.status}:${s.busy}`));
    await session.submitText("mug");
    expect(seen).toEqual(["ready:true", "ready:false"]);

    unsubscribe();
    await session.submitText("mug");
    expect(seen.length).toBe(2);

    const snapshot = session.state;
    expect(snapshot).not.toBe(session.state);
  });

  it("tracks a selected cluster within bounds and resets it per query", async () => {
    const cluster = {
      indices: [2, 4],
      centroid: [0, 0, 0],
      aabb: { min: [0, 0, 0], max: [1, 1, 1] },
      peak_score: 0.9,
      mean_score: 0.8,
      size: 2,
    };
    const { session } = await readySession({
      "POST /maps/m1/query": () => jsonResponse(queryBody(flatScores(0.5), 0.4, [cluster])),
    });
    await session.submitText("mug");
    expect(session.state.selectedCluster).toBeNull();

    session.selectCluster(0);
    expect(session.state.selectedCluster).toBe(0);
    session.selectCluster(3);
    expect(session.state.selectedCluster).toBe(0);
    session.selectCluster(null);
    expect(session.state.selectedCluster).toBeNull();

    session.selectCluster(0);
    await session.submitText("mug");
    expect(session.state.selectedCluster).toBeNull();

    // Full-map cluster indices land on loaded points only when they are
    // divisible by the stride.
    expect(session.toLoadedIndices(cluster.indices)).toEqual([1, 2]);
    expect(session.toLoadedIndices([3, 5])).toEqual([]);
  });

  it("clears overlays on demand", async () => {
    const { session } = await readySession({
      "POST /maps/m1/query": () => jsonResponse(queryBody(flatScores(0.5))),
    });
    await session.submitText("mug");
    expect(session.state.overlay).not.toBeNull();
    session.clearOverlay();
    expect(session.state.overlay).toBeNull();
    expect(session.state.annotation).toBeNull();
    expect(session.state.highlight).toBeNull();
  });
});
