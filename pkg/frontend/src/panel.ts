import type { ComparePayload, RoutePayload } from "./api";

function row(label: string, id: string, raw: number, text: string): string {
  // data-value keeps the untouched server number next to the display text
  return (
    `<div class="stat"><span class="stat-label">${label}</span>` +
    `<span class="stat-value" id="${id}" data-value="${raw}">${text}</span></div>`
  );
}

function seconds(v: number): string {
  return `${v.toFixed(1)} s`;
}

export function renderComparePanel(el: HTMLElement, c: ComparePayload): void {
  el.innerHTML =
    row("fastest", "stat-fastest", c.fastest.duration_s, seconds(c.fastest.duration_s)) +
    row("happy", "stat-happy", c.happy.duration_s, seconds(c.happy.duration_s)) +
    row("delta", "stat-delta", c.duration_delta_s, seconds(c.duration_delta_s)) +
    row("overlap", "stat-overlap", c.overlap_pct, `${c.overlap_pct.toFixed(1)}%`) +
    row(
      "mean happiness",
      "stat-happiness",
      c.happy.mean_happiness,
      c.happy.mean_happiness.toFixed(3),
    );
}

export function renderRoutePanel(el: HTMLElement, r: RoutePayload): void {
  el.innerHTML =
    row("duration", "stat-duration", r.duration_s, seconds(r.duration_s)) +
    row("distance", "stat-distance", r.distance_m, `${r.distance_m.toFixed(0)} m`) +
    row(
      "mean happiness",
      "stat-happiness",
      r.mean_happiness,
      r.mean_happiness.toFixed(3),
    );
}

export function clearPanel(el: HTMLElement, hint: string): void {
  el.innerHTML = `<div class="stat-hint">${hint}</div>`;
}
