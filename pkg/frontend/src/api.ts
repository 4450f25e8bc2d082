export interface TurnInstruction {
  kind: string;
  node_id: number;
  road_type: string;
}

export interface RoutePayload {
  geometry: { type: "LineString"; coordinates: [number, number][] };
  duration_s: number;
  distance_m: number;
  mean_happiness: number;
  instructions: TurnInstruction[];
  mode: string;
  lambda: number;
  compute_ms: number;
}

export interface ComparePayload {
  fastest: RoutePayload;
  happy: RoutePayload;
  overlap_pct: number;
  duration_delta_s: number;
}

export interface HealthInfo {
  status: string;
  graph_edges: number;
  layer_fingerprint: string | null;
  modes_ready: string[];
}

export interface LayerFeature {
  type: "Feature";
  geometry: { type: "LineString"; coordinates: [number, number][] };
  properties: { edge_id: number; e: number; c: number; road_type: string };
}

export interface LayerCollection {
  type: "FeatureCollection";
  features: LayerFeature[];
}

/** Error body from the service, surfaced verbatim. */
export class ApiError extends Error {
  status: number;

  constructor(status: number, message: string) {
    super(message);
    this.status = status;
  }
}

function fmtPoint(p: { lon: number; lat: number }): string {
  return `${p.lat},${p.lon}`;
}

export interface Api {
  health(): Promise<HealthInfo>;
  route(
    from: { lon: number; lat: number },
    to: { lon: number; lat: number },
    mode: "fastest" | "happy",
    lambda: number,
  ): Promise<RoutePayload>;
  compare(
    from: { lon: number; lat: number },
    to: { lon: number; lat: number },
    lambda: number,
  ): Promise<ComparePayload>;
  layer(bbox: [number, number, number, number]): Promise<LayerCollection>;
}

export class ApiClient implements Api {
  base: string;

  constructor(base = "") {
    this.base = base;
  }

  private async get(path: string, params: Record<string, string>): Promise<unknown> {
    const qs = new URLSearchParams(params).toString();
    const url = this.base + path + (qs ? "?" + qs : "");
    const resp = await fetch(url);
    const body = await resp.json();
    if (!resp.ok) {
      const message =
        body && typeof body.error === "string" ? body.error : `HTTP ${resp.status}`;
      throw new ApiError(resp.status, message);
    }
    return body;
  }

  async health(): Promise<HealthInfo> {
    return (await this.get("/health", {})) as HealthInfo;
  }

  async route(
    from: { lon: number; lat: number },
    to: { lon: number; lat: number },
    mode: "fastest" | "happy",
    lambda: number,
  ): Promise<RoutePayload> {
    return (await this.get("/route", {
      from: fmtPoint(from),
      to: fmtPoint(to),
      mode,
      lambda: String(lambda),
    })) as RoutePayload;
  }

  async compare(
    from: { lon: number; lat: number },
    to: { lon: number; lat: number },
    lambda: number,
  ): Promise<ComparePayload> {
    return (await this.get("/compare", {
      from: fmtPoint(from),
      to: fmtPoint(to),
      lambda: String(lambda),
    })) as ComparePayload;
  }

  async layer(bbox: [number, number, number, number]): Promise<LayerCollection> {
    return (await this.get("/layer", { bbox: bbox.join(",") })) as LayerCollection;
  }
}
