import { ApiClient, ApiError } from "./api";
import type { Api, LayerFeature } from "./api";
import {
  LAMBDA_GRID,
  applyClick,
  endpointsSet,
  initialState,
} from "./state";
import type { UiState, ViewMode } from "./state";
import { Projection, extentOfLines } from "./project";
import type { Extent } from "./project";
import { debounce, LatestWins } from "./net";
import { drawEdges, drawMarker, drawRoute } from "./render";
import { ROUTE_COLORS } from "./scale";
import { clearPanel, renderComparePanel, renderRoutePanel } from "./panel";

const TEMPLATE = `
  <div class="toolbar">
    <span id="status" class="status"></span>
    <label class="lambda">&lambda; = <span id="lambda-value">20</span>
      <input id="lambda" type="range" min="0" max="${LAMBDA_GRID.length - 1}"
             step="1" value="${LAMBDA_GRID.indexOf(20)}" disabled>
    </label>
    <select id="view">
      <option value="compare">compare</option>
      <option value="fastest">fastest</option>
      <option value="happy">happy</option>
    </select>
    <label class="heatmap-label"><input type="checkbox" id="heatmap"> heatmap</label>
  </div>
  <canvas id="map" width="900" height="620"></canvas>
  <div id="legend" hidden>
    <span>0</span><span class="legend-bar"></span><span>1</span>
    <span class="legend-caption">edge happiness</span>
  </div>
  <div id="panel" class="panel"></div>
  <div id="notice" class="notice"></div>
`;

const PLACE_HINT = "click the map to set origin, then destination";

export interface App {
  state: UiState;
  refreshNow: () => void;
  elements: {
    canvas: HTMLCanvasElement;
    slider: HTMLInputElement;
    view: HTMLSelectElement;
    heatmap: HTMLInputElement;
    panel: HTMLElement;
    notice: HTMLElement;
  };
}

const FALLBACK_EXTENT: Extent = {
  minLon: 11.45,
  minLat: 48.06,
  maxLon: 11.55,
  maxLat: 48.14,
};

export async function boot(root: HTMLElement, api: Api = new ApiClient()): Promise<App> {
  root.innerHTML = TEMPLATE;
  const canvas = root.querySelector("#map") as HTMLCanvasElement;
  const slider = root.querySelector("#lambda") as HTMLInputElement;
  const lambdaValue = root.querySelector("#lambda-value") as HTMLElement;
  const viewSelect = root.querySelector("#view") as HTMLSelectElement;
  const heatmapBox = root.querySelector("#heatmap") as HTMLInputElement;
  const legend = root.querySelector("#legend") as HTMLElement;
  const panel = root.querySelector("#panel") as HTMLElement;
  const notice = root.querySelector("#notice") as HTMLElement;
  const status = root.querySelector("#status") as HTMLElement;

  const ctx = canvas.getContext("2d");
  const state = initialState();
  const pending = new LatestWins();
  const pendingLayer = new LatestWins();
  let baseFeatures: LayerFeature[] = [];
  let layerBlocked = false;

  const health = await api.health();
  status.textContent = `${health.graph_edges} edges`;
  if (health.layer_fingerprint === null) {
    // fastest-only service: nothing to compare against, nothing to color
    state.view = "fastest";
    viewSelect.value = "fastest";
    for (const opt of Array.from(viewSelect.options)) {
      if (opt.value !== "fastest") opt.disabled = true;
    }
  }

  try {
    const collection = await api.layer([-180, -90, 180, 90]);
    baseFeatures = collection.features;
  } catch (err) {
    if (err instanceof ApiError && err.status === 409) {
      layerBlocked = true;
      heatmapBox.disabled = true;
      const label = heatmapBox.parentElement;
      if (label) label.title = err.message;
    } else {
      throw err;
    }
  }

  const extent =
    extentOfLines(baseFeatures.map((f) => f.geometry.coordinates)) ?? FALLBACK_EXTENT;
  const proj = new Projection(extent, canvas.width, canvas.height);

  function redraw(): void {
    if (!ctx) return;
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    ctx.fillStyle = "#f6f7f9";
    ctx.fillRect(0, 0, canvas.width, canvas.height);
    drawEdges(ctx, proj, baseFeatures, state.heatmap);
    if (state.view === "compare" && state.compare) {
      drawRoute(ctx, proj, state.compare.fastest, ROUTE_COLORS.fastest, 6);
      drawRoute(ctx, proj, state.compare.happy, ROUTE_COLORS.happy, 3.5);
    } else if (state.view !== "compare" && state.single) {
      const color =
        state.single.mode === "happy" ? ROUTE_COLORS.happy : ROUTE_COLORS.fastest;
      drawRoute(ctx, proj, state.single, color, 5);
    }
    if (state.origin) drawMarker(ctx, proj, state.origin, "A");
    if (state.destination) drawMarker(ctx, proj, state.destination, "B");
  }

  function showError(err: unknown): void {
    state.compare = null;
    state.single = null;
    notice.textContent = err instanceof Error ? err.message : String(err);
    clearPanel(panel, "");
    redraw();
  }

  function refreshNow(): void {
    if (!endpointsSet(state)) return;
    const from = state.origin!;
    const to = state.destination!;
    notice.textContent = "";
    if (state.view === "compare") {
      pending.run(
        () => api.compare(from, to, state.lambda),
        (c) => {
          state.compare = c;
          state.single = null;
          renderComparePanel(panel, c);
          redraw();
        },
        showError,
      );
    } else {
      const mode = state.view as "fastest" | "happy";
      pending.run(
        () => api.route(from, to, mode, state.lambda),
        (r) => {
          state.single = r;
          state.compare = null;
          renderRoutePanel(panel, r);
          redraw();
        },
        showError,
      );
    }
  }

  const refreshDebounced = debounce(refreshNow, 250);

  canvas.addEventListener("click", (ev: MouseEvent) => {
    const rect = canvas.getBoundingClientRect();
    const scaleX = rect.width > 0 ? canvas.width / rect.width : 1;
    const scaleY = rect.height > 0 ? canvas.height / rect.height : 1;
    const x = (ev.clientX - rect.left) * scaleX;
    const y = (ev.clientY - rect.top) * scaleY;
    const result = applyClick(state, proj.toLonLat(x, y));
    Object.assign(state, result.state);
    slider.disabled = !endpointsSet(state);
    if (result.fetchNeeded) {
      refreshNow();
    } else {
      pending.cancel();
      notice.textContent = "";
      clearPanel(panel, state.origin ? "now pick the destination" : PLACE_HINT);
    }
    redraw();
  });

  slider.addEventListener("input", () => {
    state.lambda = LAMBDA_GRID[Number(slider.value)];
    lambdaValue.textContent = String(state.lambda);
    refreshDebounced();
  });

  viewSelect.addEventListener("change", () => {
    state.view = viewSelect.value as ViewMode;
    refreshNow();
    redraw();
  });

  heatmapBox.addEventListener("change", () => {
    state.heatmap = heatmapBox.checked && !layerBlocked;
    legend.hidden = !state.heatmap;
    if (state.heatmap) {
      // re-pull the layer so scores reflect the server's current snapshot
      pendingLayer.run(
        () => api.layer([-180, -90, 180, 90]),
        (collection) => {
          baseFeatures = collection.features;
          redraw();
        },
        showError,
      );
    }
    redraw();
  });

  clearPanel(panel, PLACE_HINT);
  redraw();
  return {
    state,
    refreshNow,
    elements: { canvas, slider, view: viewSelect, heatmap: heatmapBox, panel, notice },
  };
}

const autoRoot = typeof document !== "undefined" ? document.getElementById("app") : null;
if (autoRoot) {
  boot(autoRoot).catch((err) => {
    autoRoot.textContent = `failed to start: ${err}`;
  });
}
