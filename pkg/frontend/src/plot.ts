// Canvas plotting: axis layout and polylines. This is the only place the UI
// touches numbers, and only for geometry (scales and tick positions).

export interface Range {
  min: number;
  max: number;
}

export function dataRange(values: number[], pad = 0.05): Range {
  if (values.length === 0) {
    return { min: -1, max: 1 };
  }
  let min = values[0];
  let max = values[0];
  for (const v of values) {
    if (v < min) min = v;
    if (v > max) max = v;
  }
  if (min === max) {
    // flat series still needs a visible band
    const bump = Math.abs(min) > 1e-12 ? Math.abs(min) * 0.1 : 1;
    return { min: min - bump, max: max + bump };
  }
  const span = max - min;
  return { min: min - span * pad, max: max + span * pad };
}

export function niceTicks(range: Range, target = 5): number[] {
  const span = range.max - range.min;
  if (!(span > 0) || !Number.isFinite(span)) {
    return [range.min];
  }
  const rawStep = span / Math.max(1, target);
  const power = Math.pow(10, Math.floor(Math.log10(rawStep)));
  let step = power;
  for (const mult of [1, 2, 5, 10]) {
    if (power * mult >= rawStep) {
      step = power * mult;
      break;
    }
  }
  const ticks: number[] = [];
  for (let t = Math.ceil(range.min / step) * step; t <= range.max + step * 1e-9; t += step) {
    ticks.push(Math.abs(t) < step * 1e-9 ? 0 : t);
  }
  return ticks;
}

export function mapRange(value: number, from: Range, to: Range): number {
  const span = from.max - from.min;
  if (span === 0) {
    return (to.min + to.max) / 2;
  }
  return to.min + ((value - from.min) / span) * (to.max - to.min);
}

// The subset of CanvasRenderingContext2D the renderer uses; tests drive it
// with a recording stub. Style properties mirror the DOM union types so a
// real context is assignable.
export interface Canvas2DLike {
  clearRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  stroke(): void;
  fillText(text: string, x: number, y: number): void;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  fillStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  font: string;
}

export interface PlotOptions {
  width: number;
  height: number;
  xLabel: string;
  color?: string;
  // margins leave room for tick labels
  marginLeft?: number;
  marginBottom?: number;
}

export interface PlotLayout {
  xRange: Range;
  yRange: Range;
  plotArea: { left: number; top: number; right: number; bottom: number };
}

export function drawSeries(
  ctx: Canvas2DLike,
  x: number[],
  y: number[],
  options: PlotOptions,
): PlotLayout {
  const left = options.marginLeft ?? 56;
  const bottom = options.height - (options.marginBottom ?? 28);
  const top = 10;
  const right = options.width - 12;
  const xRange = dataRange(x, 0);
  const yRange = dataRange(y);
  const xTo = { min: left, max: right };
  const yTo = { min: bottom, max: top }; // canvas y grows downward

  ctx.clearRect(0, 0, options.width, options.height);

  ctx.strokeStyle = "#3a4556";
  ctx.fillStyle = "#8b97a8";
  ctx.lineWidth = 1;
  ctx.font = "11px sans-serif";
  for (const tick of niceTicks(yRange)) {
    const py = mapRange(tick, yRange, yTo);
    ctx.beginPath();
    ctx.moveTo(left, py);
    ctx.lineTo(right, py);
    ctx.stroke();
    ctx.fillText(formatTick(tick), 4, py + 3);
  }
  for (const tick of niceTicks(xRange, 6)) {
    const px = mapRange(tick, xRange, xTo);
    ctx.beginPath();
    ctx.moveTo(px, top);
    ctx.lineTo(px, bottom);
    ctx.stroke();
    ctx.fillText(formatTick(tick), px - 8, options.height - 8);
  }
  ctx.fillText(options.xLabel, right - 8 * options.xLabel.length, bottom - 6);

  if (x.length > 0) {
    ctx.strokeStyle = options.color ?? "#4cc2ff";
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    ctx.moveTo(mapRange(x[0], xRange, xTo), mapRange(y[0], yRange, yTo));
    for (let i = 1; i < x.length; i++) {
      ctx.lineTo(mapRange(x[i], xRange, xTo), mapRange(y[i], yRange, yTo));
    }
    ctx.stroke();
  }
  return { xRange, yRange, plotArea: { left, top, right, bottom } };
}

export function formatTick(value: number): string {
  if (value === 0) return "0";
  const magnitude = Math.abs(value);
  if (magnitude >= 1000) return value.toFixed(0);
  if (magnitude >= 10) return String(Math.round(value * 10) / 10);
  return String(Math.round(value * 100) / 100);
}
