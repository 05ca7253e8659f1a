// Plain coordinate-grid canvas map: equirectangular projection around a
// viewport center, no external tile service.

import type { GeoPointDoc } from "./types.js";

export interface Viewport {
  centerLat: number;
  centerLon: number;
  /** Degrees of latitude spanned by the canvas height. */
  spanLat: number;
  width: number;
  height: number;
}

export function project(point: GeoPointDoc, vp: Viewport): { x: number; y: number } {
  const degPerPxY = vp.spanLat / vp.height;
  const spanLon = vp.spanLat * (vp.width / vp.height);
  const degPerPxX = spanLon / vp.width;
  let dLon = point.lon - vp.centerLon;
  if (dLon > 180) dLon -= 360;
  if (dLon < -180) dLon += 360;
  return {
    x: vp.width / 2 + dLon / degPerPxX,
    y: vp.height / 2 - (point.lat - vp.centerLat) / degPerPxY,
  };
}

export function unproject(x: number, y: number, vp: Viewport): GeoPointDoc {
  const degPerPxY = vp.spanLat / vp.height;
  const spanLon = vp.spanLat * (vp.width / vp.height);
  const degPerPxX = spanLon / vp.width;
  let lon = vp.centerLon + (x - vp.width / 2) * degPerPxX;
  lon = ((lon + 180) % 360 + 360) % 360 - 180;
  const lat = Math.max(-90, Math.min(90, vp.centerLat - (y - vp.height / 2) * degPerPxY));
  return { lat, lon };
}

export interface Marker {
  id: string;
  location: GeoPointDoc;
  label: string;
  highlighted?: boolean;
}

const GRID_STEP_DEG = 0.01;

export function drawMap(
  ctx: CanvasRenderingContext2D,
  vp: Viewport,
  markers: Marker[],
): void {
  ctx.clearRect(0, 0, vp.width, vp.height);
  ctx.fillStyle = "#f4f7f4";
  ctx.fillRect(0, 0, vp.width, vp.height);

  ctx.strokeStyle = "#d8e0d8";
  ctx.lineWidth = 1;
  const spanLon = vp.spanLat * (vp.width / vp.height);
  const latStart = Math.floor((vp.centerLat - vp.spanLat / 2) / GRID_STEP_DEG) * GRID_STEP_DEG;
  for (let lat = latStart; lat <= vp.centerLat + vp.spanLat / 2; lat += GRID_STEP_DEG) {
    const { y } = project({ lat, lon: vp.centerLon }, vp);
    ctx.beginPath();
    ctx.moveTo(0, y);
    ctx.lineTo(vp.width, y);
    ctx.stroke();
  }
  const lonStart = Math.floor((vp.centerLon - spanLon / 2) / GRID_STEP_DEG) * GRID_STEP_DEG;
  for (let lon = lonStart; lon <= vp.centerLon + spanLon / 2; lon += GRID_STEP_DEG) {
    const { x } = project({ lat: vp.centerLat, lon }, vp);
    ctx.beginPath();
    ctx.moveTo(x, 0);
    ctx.lineTo(x, vp.height);
    ctx.stroke();
  }

  for (const marker of markers) {
    const { x, y } = project(marker.location, vp);
    if (x < -20 || x > vp.width + 20 || y < -20 || y > vp.height + 20) continue;
    ctx.fillStyle = marker.highlighted ? "#c0392b" : "#2e7d32";
    ctx.beginPath();
    ctx.arc(x, y, 6, 0, Math.PI * 2);
    ctx.fill();
    ctx.fillStyle = "#1b1b1b";
    ctx.font = "12px sans-serif";
    ctx.fillText(marker.label, x + 9, y + 4);
  }
}
