/** Viewer session state machine.
 *
 * Owns everything between the HTTP client and the render shell: the loaded
 * point buffer, the active overlay, in-flight request bookkeeping, and the
 * error surfaces (fatal banner, transient toast, inline notice). All
 * methods settle; none throw. The renderer subscribes and redraws from
 * state, so a scripted client is enough to exercise the full behavior.
 *
 * The point buffer is loaded with a stride, and every query is issued with
 * score_stride equal to that same stride, so score j always belongs to
 * loaded point j (full-map index j * stride). Cluster and object indices
 * come back in full-map terms and are mapped down; indices that fall
 * between loaded points are simply not highlightable.
 */

import type { Reply, ServiceClient } from "./client.js";
import { heatValues } from "./colormap.js";
import { type Annotation, annotate } from "./heatline.js";
import { parsePoints, parseQuery, parseRelation } from "./parse.js";
import { DEFAULT_PICK_RADIUS_PX, type ProjectFn, pickPoint } from "./picking.js";
import type { ClusterPayload, Vec3 } from "./types.js";

export type SessionStatus = "empty" | "loading" | "ready" | "error";

export interface Overlay {
  /** What produced this overlay, for the legend. */
  readonly label: string;
  /** One heat value in [0, 1] per loaded point. */
  readonly heat: Float32Array;
  readonly threshold: number | null;
  readonly clusters: readonly ClusterPayload[];
}

export interface SessionState {
  readonly status: SessionStatus;
  /** Fatal message; set exactly when status is "error". */
  readonly error: string | null;
  /** Transient, non-blocking notice (e.g. the map is mid-fusion). */
  readonly toast: string | null;
  /** Inline message tied to the last submission (e.g. unknown object). */
  readonly notice: string | null;
  /** True while the latest query is still in flight. */
  readonly busy: boolean;
  readonly overlay: Overlay | null;
  /** Index into overlay.clusters the user singled out, if any. */
  readonly selectedCluster: number | null;
  readonly annotation: Annotation | null;
  /** Loaded-point indices to accent for boolean relation answers. */
  readonly highlight: ReadonlySet<number> | null;
}

export type Listener = (state: SessionState) => void;

interface MutableState {
  status: SessionStatus;
  error: string | null;
  toast: string | null;
  notice: string | null;
  busy: boolean;
  overlay: Overlay | null;
  selectedCluster: number | null;
  annotation: Annotation | null;
  highlight: ReadonlySet<number> | null;
}

/** Shape test for relation expressions: `name(a, b)` styled input is sent
 * to the spatial endpoint, anything else is treated as an object name. */
const EXPRESSION_SHAPE = /^\s*[A-Za-z][A-Za-z0-9_]*\s*\(.*\)\s*$/;

export class ViewSession {
  private readonly client: ServiceClient;
  private readonly pickRadius: number;
  private readonly listeners: Listener[] = [];

  private mapId: string | null = null;
  private stride = 1;
  private fullCount = 0;
  private positions = new Float32Array(0);
  private colors: (Vec3 | null)[] = [];
  private seq = 0;

  private mutable: MutableState = {
    status: "empty",
    error: null,
    toast: null,
    notice: null,
    busy: false,
    overlay: null,
    selectedCluster: null,
    annotation: null,
    highlight: null,
  };

  constructor(client: ServiceClient, options?: { pickRadius?: number }) {
    this.client = client;
    this.pickRadius = options?.pickRadius ?? DEFAULT_PICK_RADIUS_PX;
  }

  get state(): SessionState {
    return { ...this.mutable };
  }

  /** Flat xyz buffer of the loaded points, for the renderer. */
  get loadedPositions(): Float32Array {
    return this.positions;
  }

  /** Per-loaded-point RGB in 0..255, or null where the map has no color. */
  get loadedColors(): readonly (Vec3 | null)[] {
    return this.colors;
  }

  get loadedCount(): number {
    return Math.floor(this.positions.length / 3);
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      const at = this.listeners.indexOf(listener);
      if (at >= 0) this.listeners.splice(at, 1);
    };
  }

  private emit(): void {
    const snapshot = this.state;
    for (const listener of this.listeners) listener(snapshot);
  }

  private patch(changes: Partial<MutableState>): void {
    Object.assign(this.mutable, changes);
    this.emit();
  }

  /** True when `text` would actually be submitted; drives the button. */
  canSubmit(text: string): boolean {
    return this.mutable.status === "ready" && text.trim().length > 0;
  }

  /** Map full-map indices (the terms clusters and objects are reported
   * in) down to loaded-point indices. Indices falling between loaded
   * points are dropped. */
  toLoadedIndices(indices: readonly number[]): number[] {
    const out: number[] = [];
    for (const index of indices) {
      if (index % this.stride !== 0) continue;
      const local = index / this.stride;
      if (local < this.loadedCount) out.push(local);
    }
    return out;
  }

  /** Fetch the point cloud and enter the ready state. Any failure here is
   * fatal for the view: there is nothing to draw without points. */
  async loadMap(mapId: string, stride: number): Promise<void> {
    const ticket = ++this.seq;
    this.patch({ status: "loading", error: null, toast: null, notice: null });
    const reply = await this.client.getPoints(mapId, stride);
    if (ticket !== this.seq) return;

    if (!reply.ok) {
      this.patch({ status: "error", error: `${reply.code}: ${reply.message}` });
      return;
    }
    const points = parsePoints(reply.body);
    if (points === null) {
      this.patch({ status: "error", error: "malformed points payload from service" });
      return;
    }

    this.mapId = mapId;
    this.stride = points.stride;
    this.fullCount = points.point_count;
    this.positions = new Float32Array(points.positions.length * 3);
    for (let i = 0; i < points.positions.length; i++) {
      const [x, y, z] = points.positions[i]!;
      this.positions[3 * i] = x;
      this.positions[3 * i + 1] = y;
      this.positions[3 * i + 2] = z;
    }
    this.colors = points.colors.slice();
    this.patch({
      status: "ready",
      error: null,
      overlay: null,
      selectedCluster: null,
      annotation: null,
      highlight: null,
    });
  }

  /** Pick the point under a click and query the map by its fused concept.
   * Returns the loaded-point index that was picked, or null for a miss. */
  async clickAt(sx: number, sy: number, project: ProjectFn): Promise<number | null> {
    if (this.mutable.status !== "ready" || this.mapId === null) return null;
    const local = pickPoint(this.positions, project, sx, sy, this.pickRadius);
    if (local === null) {
      this.patch({ notice: "no point close enough to the cursor" });
      return null;
    }

    const ticket = ++this.seq;
    this.patch({ busy: true, toast: null, notice: null });
    const reply = await this.client.postClick(this.mapId, local * this.stride, this.stride);
    if (ticket !== this.seq) return local;
    this.finishQuery(reply, `point #${local * this.stride}`);
    return local;
  }

  /** Route a text submission: relation-shaped input goes to the spatial
   * endpoint, anything else runs as a named-object query. Blank input is
   * ignored. */
  async submitText(text: string): Promise<void> {
    const trimmed = text.trim();
    if (!this.canSubmit(text) || this.mapId === null) return;

    const ticket = ++this.seq;
    this.patch({ busy: true, toast: null, notice: null });
    if (EXPRESSION_SHAPE.test(trimmed)) {
      const reply = await this.client.postSpatial(this.mapId, trimmed);
      if (ticket !== this.seq) return;
      this.finishSpatial(reply);
    } else {
      const reply = await this.client.postQuery(this.mapId, {
        name: trimmed,
        score_stride: this.stride,
      });
      if (ticket !== this.seq) return;
      this.finishQuery(reply, trimmed);
    }
  }

  /** Drop any overlay, annotation, or highlight, keeping the points. */
  clearOverlay(): void {
    this.patch({
      overlay: null,
      selectedCluster: null,
      annotation: null,
      highlight: null,
      notice: null,
    });
  }

  /** Single out one returned cluster (or none) for emphasis. Out-of-range
   * indices are ignored rather than corrupting the selection. */
  selectCluster(index: number | null): void {
    const overlay = this.mutable.overlay;
    if (index !== null) {
      if (overlay === null || !Number.isInteger(index)) return;
      if (index < 0 || index >= overlay.clusters.length) return;
    }
    this.patch({ selectedCluster: index });
  }

  private finishQuery(reply: Reply, label: string): void {
    if (!reply.ok) {
      this.failRequest(reply);
      return;
    }
    const payload = parseQuery(reply.body);
    if (payload === null) {
      this.patch({ busy: false, status: "error", error: "malformed query payload from service" });
      return;
    }
    if (payload.point_count !== this.fullCount || payload.score_stride !== this.stride) {
      this.patch({ busy: false, status: "error", error: "query payload does not match the loaded map" });
      return;
    }
    const overlay: Overlay = {
      label,
      heat: heatValues(payload.scores, payload.threshold),
      threshold: payload.threshold,
      clusters: payload.clusters,
    };
    this.patch({
      busy: false,
      overlay,
      selectedCluster: null,
      annotation: null,
      highlight: null,
    });
  }

  private finishSpatial(reply: Reply): void {
    if (!reply.ok) {
      this.failRequest(reply);
      return;
    }
    const payload = parseRelation(reply.body);
    if (payload === null) {
      this.patch({ busy: false, status: "error", error: "malformed relation payload from service" });
      return;
    }
    const highlight = new Set<number>();
    for (const object of payload.objects) {
      for (const local of this.toLoadedIndices(object.indices)) highlight.add(local);
    }
    this.patch({
      busy: false,
      overlay: null,
      selectedCluster: null,
      annotation: annotate(payload),
      highlight,
    });
  }

  /** Sort a failed reply into the right surface. A busy map and transport
   * blips are transient; unknown names are inline; a body that cannot be
   * decoded at all means the view can no longer trust the service. */
  private failRequest(reply: Reply & { ok: false }): void {
    if (reply.status === 409 || reply.code === "map_busy") {
      this.patch({ busy: false, toast: reply.message });
      return;
    }
    if (reply.code === "malformed") {
      this.patch({ busy: false, status: "error", error: reply.message });
      return;
    }
    if (reply.code === "network") {
      this.patch({ busy: false, toast: `service unreachable: ${reply.message}` });
      return;
    }
    this.patch({ busy: false, notice: reply.message });
  }
}
