import { vi } from "vitest";
import type {
  Api,
  ComparePayload,
  HealthInfo,
  LayerCollection,
  RoutePayload,
} from "../src/api";

export interface CanvasLog {
  strokes: string[];
  clears: number;
}

/**
 * jsdom has no 2D canvas; this installs a recording stand-in so tests can
 * assert which stroke colors were used without a rasterizer.
 */
export function installCanvasStub(): CanvasLog {
  const log: CanvasLog = { strokes: [], clears: 0 };
  const make = () => {
    let strokeStyle = "";
    return {
      get strokeStyle() {
        return strokeStyle;
      },
      set strokeStyle(v: string) {
        strokeStyle = String(v);
      },
      fillStyle: "",
      lineWidth: 1,
      lineCap: "butt",
      lineJoin: "miter",
      font: "",
      textAlign: "start",
      textBaseline: "alphabetic",
      beginPath() {},
      moveTo() {},
      lineTo() {},
      arc() {},
      stroke() {
        log.strokes.push(strokeStyle);
      },
      fill() {},
      fillRect() {},
      clearRect() {
        log.clears++;
      },
      fillText() {},
    };
  };
  vi.spyOn(HTMLCanvasElement.prototype, "getContext").mockImplementation(
    () => make() as unknown as CanvasRenderingContext2D,
  );
  return log;
}

export async function flush(rounds = 8): Promise<void> {
  for (let i = 0; i < rounds; i++) await Promise.resolve();
}

export function clickAt(canvas: HTMLCanvasElement, x: number, y: number): void {
  canvas.dispatchEvent(
    new MouseEvent("click", { clientX: x, clientY: y, bubbles: true }),
  );
}

export function routePayload(
  mode: string,
  duration: number,
  overrides: Partial<RoutePayload> = {},
): RoutePayload {
  return {
    geometry: {
      type: "LineString",
      coordinates: [
        [11.46, 48.08],
        [11.5, 48.1],
        [11.53, 48.12],
      ],
    },
    duration_s: duration,
    distance_m: duration * 8,
    mean_happiness: 0.4,
    instructions: [],
    mode,
    lambda: 20,
    compute_ms: 0.3,
    ...overrides,
  };
}

export function comparePayload(
  fastestS: number,
  happyS: number,
  overlap: number,
): ComparePayload {
  return {
    fastest: routePayload("fastest", fastestS),
    happy: routePayload("happy", happyS),
    overlap_pct: overlap,
    duration_delta_s: happyS - fastestS,
  };
}

export const HEALTH: HealthInfo = {
  status: "ok",
  graph_edges: 812,
  layer_fingerprint: "abcdef0123456789",
  modes_ready: ["fastest", "happy"],
};

export const LAYER: LayerCollection = {
  type: "FeatureCollection",
  features: [
    {
      type: "Feature",
      geometry: {
        type: "LineString",
        coordinates: [
          [11.45, 48.06],
          [11.5, 48.1],
        ],
      },
      properties: { edge_id: 0, e: 0.2, c: 0.5, road_type: "residential" },
    },
    {
      type: "Feature",
      geometry: {
        type: "LineString",
        coordinates: [
          [11.5, 48.1],
          [11.55, 48.14],
        ],
      },
      properties: { edge_id: 1, e: 0.8, c: 0.6, road_type: "primary" },
    },
  ],
};

export interface FakeApi extends Api {
  calls: { endpoint: string; args: unknown[] }[];
  compareResult: () => Promise<ComparePayload>;
  routeResult: () => Promise<RoutePayload>;
  layerResult: () => Promise<LayerCollection>;
}

export function fakeApi(): FakeApi {
  const api: FakeApi = {
    calls: [],
    compareResult: () => Promise.resolve(comparePayload(100, 130, 62.5)),
    routeResult: () => Promise.resolve(routePayload("fastest", 100)),
    layerResult: () => Promise.resolve(LAYER),
    async health() {
      api.calls.push({ endpoint: "health", args: [] });
      return HEALTH;
    },
    async route(from, to, mode, lambda) {
      api.calls.push({ endpoint: "route", args: [from, to, mode, lambda] });
      return api.routeResult();
    },
    async compare(from, to, lambda) {
      api.calls.push({ endpoint: "compare", args: [from, to, lambda] });
      return api.compareResult();
    },
    async layer(bbox) {
      api.calls.push({ endpoint: "layer", args: [bbox] });
      return api.layerResult();
    },
  };
  return api;
}

export function countCalls(api: FakeApi, endpoint: string): number {
  return api.calls.filter((c) => c.endpoint === endpoint).length;
}
