/**
 * Fixed choropleth scale for edge happiness: 0 is red, 1 is green, with
 * the hue interpolated linearly in between. Pure function of e, so colors
 * never shift between reloads.
 */
export function happinessColor(e: number): string {
  const v = Math.min(1, Math.max(0, e));
  const hue = Math.round(120 * v);
  return `hsl(${hue}, 72%, 42%)`;
}

export const ROUTE_COLORS = {
  fastest: "#d7263d",
  happy: "#1f6fd6",
};
