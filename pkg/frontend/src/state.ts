import type { ComparePayload, RoutePayload } from "./api";

export type ViewMode = "compare" | "fastest" | "happy";

export interface LonLat {
  lon: number;
  lat: number;
}

// Must stay in sync with the service's default lambda grid: values off the
// grid still work but fall off the precomputed hierarchies server-side.
export const LAMBDA_GRID = [0, 1, 5, 10, 20, 40, 100];

export interface UiState {
  origin: LonLat | null;
  destination: LonLat | null;
  lambda: number;
  view: ViewMode;
  heatmap: boolean;
  compare: ComparePayload | null;
  single: RoutePayload | null;
  notice: string;
}

export function initialState(): UiState {
  return {
    origin: null,
    destination: null,
    lambda: 20,
    view: "compare",
    heatmap: false,
    compare: null,
    single: null,
    notice: "",
  };
}

export interface ClickResult {
  state: UiState;
  fetchNeeded: boolean;
}

/**
 * First click places the origin, the second the destination, a third
 * click starts over. Only the second click triggers a request.
 */
export function applyClick(state: UiState, p: LonLat): ClickResult {
  if (state.origin === null) {
    return { state: { ...state, origin: p }, fetchNeeded: false };
  }
  if (state.destination === null) {
    return { state: { ...state, destination: p }, fetchNeeded: true };
  }
  return {
    state: {
      ...state,
      origin: null,
      destination: null,
      compare: null,
      single: null,
      notice: "",
    },
    fetchNeeded: false,
  };
}

export function endpointsSet(state: UiState): boolean {
  return state.origin !== null && state.destination !== null;
}
