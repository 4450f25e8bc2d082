import type { LonLat } from "./state";

export type Extent = { minLon: number; minLat: number; maxLon: number; maxLat: number };

/**
 * Equirectangular fit of a geographic extent into a pixel rectangle.
 * Longitudes are compressed by cos(mid latitude) so city-scale shapes keep
 * their aspect ratio; fine for the few kilometres a demo graph spans.
 */
export class Projection {
  private sx: number;
  private sy: number;
  private ox: number;
  private oy: number;
  private cosLat: number;

  constructor(extent: Extent, width: number, height: number, pad = 20) {
    const midLat = (extent.minLat + extent.maxLat) / 2;
    this.cosLat = Math.cos((midLat * Math.PI) / 180);
    const spanX = Math.max(1e-9, (extent.maxLon - extent.minLon) * this.cosLat);
    const spanY = Math.max(1e-9, extent.maxLat - extent.minLat);
    const scale = Math.min((width - 2 * pad) / spanX, (height - 2 * pad) / spanY);
    this.sx = scale;
    this.sy = scale;
    // center the graph inside the canvas
    const pxW = spanX * scale;
    const pxH = spanY * scale;
    this.ox = (width - pxW) / 2 - extent.minLon * this.cosLat * scale;
    this.oy = (height - pxH) / 2 + extent.maxLat * scale;
  }

  toPx(p: LonLat): [number, number] {
    return [p.lon * this.cosLat * this.sx + this.ox, this.oy - p.lat * this.sy];
  }

  toLonLat(x: number, y: number): LonLat {
    return {
      lon: (x - this.ox) / (this.sx * this.cosLat),
      lat: (this.oy - y) / this.sy,
    };
  }
}

export function extentOfLines(lines: [number, number][][]): Extent | null {
  let minLon = Infinity;
  let minLat = Infinity;
  let maxLon = -Infinity;
  let maxLat = -Infinity;
  for (const line of lines) {
    for (const [lon, lat] of line) {
      if (lon < minLon) minLon = lon;
      if (lon > maxLon) maxLon = lon;
      if (lat < minLat) minLat = lat;
      if (lat > maxLat) maxLat = lat;
    }
  }
  if (!isFinite(minLon)) return null;
  return { minLon, minLat, maxLon, maxLat };
}
