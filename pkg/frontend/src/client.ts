/** Thin HTTP client for the mapping service.
 *
 * The fetch implementation is injected so tests can stand in a scripted
 * service. All failure modes are folded into a plain result union: the
 * caller decides how to present them, the client never throws.
 */

import { parseErrorEnvelope } from "./parse.js";

export interface ReplyOk {
  readonly ok: true;
  readonly body: unknown;
}

export interface ReplyErr {
  readonly ok: false;
  /** Service error code, or "network" / "malformed" for transport faults. */
  readonly code: string;
  readonly message: string;
  /** HTTP status, 0 when the request never got a response. */
  readonly status: number;
}

export type Reply = ReplyOk | ReplyErr;

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ServiceClient {
  private readonly base: string;
  private readonly fetchFn: FetchLike;

  constructor(baseUrl: string, fetchFn?: FetchLike) {
    this.base = baseUrl.replace(/\/+$/, "");
    this.fetchFn = fetchFn ?? ((url, init) => fetch(url, init));
  }

  async getPoints(mapId: string, stride: number): Promise<Reply> {
    const path = `/maps/${encodeURIComponent(mapId)}/points?stride=${stride}`;
    return this.request(path, { method: "GET" });
  }

  async postQuery(mapId: string, payload: Record<string, unknown>): Promise<Reply> {
    return this.post(`/maps/${encodeURIComponent(mapId)}/query`, payload);
  }

  async postClick(mapId: string, index: number, scoreStride = 1): Promise<Reply> {
    return this.post(`/maps/${encodeURIComponent(mapId)}/query/click`, {
      index,
      score_stride: scoreStride,
    });
  }

  async postSpatial(mapId: string, expression: string): Promise<Reply> {
    return this.post(`/maps/${encodeURIComponent(mapId)}/spatial`, { expression });
  }

  private post(path: string, payload: Record<string, unknown>): Promise<Reply> {
    return this.request(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  private async request(path: string, init: RequestInit): Promise<Reply> {
    let response: Response;
    try {
      response = await this.fetchFn(this.base + path, init);
    } catch (err) {
      return { ok: false, code: "network", message: String(err), status: 0 };
    }

    let body: unknown = null;
    let decoded = false;
    try {
      body = await response.json();
      decoded = true;
    } catch {
      decoded = false;
    }

    if (!response.ok) {
      const envelope = decoded ? parseErrorEnvelope(body) : null;
      return {
        ok: false,
        code: envelope?.code ?? `http_${response.status}`,
        message: envelope?.message ?? `request failed with status ${response.status}`,
        status: response.status,
      };
    }
    if (!decoded) {
      return {
        ok: false,
        code: "malformed",
        message: "response body was not valid JSON",
        status: response.status,
      };
    }
    return { ok: true, body };
  }
}
