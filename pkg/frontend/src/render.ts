import type { LayerFeature, RoutePayload } from "./api";
import type { Projection } from "./project";
import type { LonLat } from "./state";
import { happinessColor } from "./scale";

const ROAD_WIDTHS: Record<string, number> = {
  motorway: 4,
  trunk: 4,
  primary: 3,
  secondary: 2.5,
  tertiary: 2,
};

function strokeLine(
  ctx: CanvasRenderingContext2D,
  proj: Projection,
  coords: [number, number][],
) {
  if (coords.length < 2) return;
  ctx.beginPath();
  const [x0, y0] = proj.toPx({ lon: coords[0][0], lat: coords[0][1] });
  ctx.moveTo(x0, y0);
  for (let i = 1; i < coords.length; i++) {
    const [x, y] = proj.toPx({ lon: coords[i][0], lat: coords[i][1] });
    ctx.lineTo(x, y);
  }
  ctx.stroke();
}

export function drawEdges(
  ctx: CanvasRenderingContext2D,
  proj: Projection,
  features: LayerFeature[],
  heatmap: boolean,
) {
  ctx.lineCap = "round";
  for (const f of features) {
    ctx.strokeStyle = heatmap ? happinessColor(f.properties.e) : "#b8bec6";
    ctx.lineWidth = ROAD_WIDTHS[f.properties.road_type] ?? 1.5;
    strokeLine(ctx, proj, f.geometry.coordinates);
  }
}

export function drawRoute(
  ctx: CanvasRenderingContext2D,
  proj: Projection,
  route: RoutePayload,
  color: string,
  width: number,
) {
  ctx.strokeStyle = color;
  ctx.lineWidth = width;
  ctx.lineCap = "round";
  ctx.lineJoin = "round";
  strokeLine(ctx, proj, route.geometry.coordinates);
}

export function drawMarker(
  ctx: CanvasRenderingContext2D,
  proj: Projection,
  p: LonLat,
  label: string,
) {
  const [x, y] = proj.toPx(p);
  ctx.beginPath();
  ctx.arc(x, y, 7, 0, 2 * Math.PI);
  ctx.fillStyle = "#222";
  ctx.fill();
  ctx.fillStyle = "#fff";
  ctx.font = "bold 10px sans-serif";
  ctx.textAlign = "center";
  ctx.textBaseline = "middle";
  ctx.fillText(label, x, y);
}
