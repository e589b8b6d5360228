/** Loss-curve chart: pure coordinate math plus a thin canvas renderer. */

import type { LossRecord } from "./api.js";

export interface ChartPoint {
  x: number;
  y: number;
}

export interface ChartLayout {
  points: ChartPoint[];
  yMin: number;
  yMax: number;
}

/** Map loss values onto canvas pixel coordinates, index along x. A single
 * record sits centered; a flat series sits mid-height. */
export function layoutCurve(
  values: number[],
  width: number,
  height: number,
  padding = 8
): ChartLayout {
  if (values.length === 0) return { points: [], yMin: 0, yMax: 0 };
  const yMin = Math.min(...values);
  const yMax = Math.max(...values);
  const innerW = width - 2 * padding;
  const innerH = height - 2 * padding;
  const span = yMax - yMin;
  const points = values.map((value, i) => ({
    x:
      values.length === 1
        ? padding + innerW / 2
        : padding + (i / (values.length - 1)) * innerW,
    y:
      span === 0
        ? padding + innerH / 2
        : padding + (1 - (value - yMin) / span) * innerH,
  }));
  return { points, yMin, yMax };
}

export function fitLosses(records: LossRecord[]): number[] {
  return records.filter((r) => r.phase === "fit").map((r) => r.loss);
}

export function propagateLosses(records: LossRecord[]): number[] {
  return records.filter((r) => r.phase === "propagate").map((r) => r.loss);
}

export function drawCurve(
  canvas: HTMLCanvasElement,
  values: number[],
  color: string
): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const { points, yMin, yMax } = layoutCurve(values, canvas.width, canvas.height);
  if (points.length === 0) return;
  ctx.strokeStyle = color;
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  points.forEach((p, i) => (i === 0 ? ctx.moveTo(p.x, p.y) : ctx.lineTo(p.x, p.y)));
  ctx.stroke();
  ctx.fillStyle = "#888";
  ctx.font = "10px sans-serif";
  ctx.fillText(yMax.toPrecision(3), 2, 10);
  ctx.fillText(yMin.toPrecision(3), 2, canvas.height - 2);
}
