// Dependency-free SVG line chart for cumulative cycle curves. Tooltips sit in
// <title> elements so plain browser hovering shows per-cycle values. Every
// number shown carries its "N in 100" frequency framing alongside.

export interface CurvePoint {
  cycle: number;
  cumulative: number;
  conditional: number;
}

const WIDTH = 460;
const HEIGHT = 240;
const MARGIN = { top: 16, right: 18, bottom: 32, left: 44 };

function x(cycle: number, maxCycle: number): number {
  const span = WIDTH - MARGIN.left - MARGIN.right;
  if (maxCycle <= 1) return MARGIN.left + span / 2;
  return MARGIN.left + ((cycle - 1) / (maxCycle - 1)) * span;
}

function y(value: number): number {
  const span = HEIGHT - MARGIN.top - MARGIN.bottom;
  return MARGIN.top + (1 - value) * span;
}

function asPercent(value: number): number {
  return Math.round(value * 100);
}

export function pointTitle(point: CurvePoint, series: "cumulative" | "conditional"): string {
  const value = series === "cumulative" ? point.cumulative : point.conditional;
  const pct = asPercent(value);
  const scope = series === "cumulative"
    ? `by cycle ${point.cycle} combined`
    : `in cycle ${point.cycle} alone`;
  return `${pct}% (${pct} in 100 people like you) ${scope}`;
}

function polyline(points: CurvePoint[], series: "cumulative" | "conditional",
                  maxCycle: number, cssClass: string): string {
  const coords = points
    .map((p) => `${x(p.cycle, maxCycle).toFixed(1)},${y(series === "cumulative" ? p.cumulative : p.conditional).toFixed(1)}`)
    .join(" ");
  const dots = points
    .map((p) => {
      const cx = x(p.cycle, maxCycle).toFixed(1);
      const cy = y(series === "cumulative" ? p.cumulative : p.conditional).toFixed(1);
      return `<circle class="dot ${cssClass}" data-series="${series}" data-cycle="${p.cycle}" cx="${cx}" cy="${cy}" r="4"><title>${pointTitle(p, series)}</title></circle>`;
    })
    .join("");
  return `<polyline class="line ${cssClass}" fill="none" points="${coords}"></polyline>${dots}`;
}

/** Render the curve as an SVG string; conditional series only when asked. */
export function renderCurveChart(points: CurvePoint[], showConditional: boolean): string {
  if (points.length === 0) return "";
  const maxCycle = points[points.length - 1]!.cycle;
  const gridLines = [0, 0.25, 0.5, 0.75, 1]
    .map((v) => {
      const gy = y(v).toFixed(1);
      return `<line class="grid" x1="${MARGIN.left}" y1="${gy}" x2="${WIDTH - MARGIN.right}" y2="${gy}"></line>` +
        `<text class="axis" x="${MARGIN.left - 8}" y="${gy}" text-anchor="end" dominant-baseline="middle">${asPercent(v)}%</text>`;
    })
    .join("");
  const xLabels = points
    .map((p) => `<text class="axis" x="${x(p.cycle, maxCycle).toFixed(1)}" y="${HEIGHT - 10}" text-anchor="middle">${p.cycle}</text>`)
    .join("");
  const series = polyline(points, "cumulative", maxCycle, "cumulative")
    + (showConditional ? polyline(points, "conditional", maxCycle, "conditional") : "");
  return `<svg class="curve-chart" role="img" viewBox="0 0 ${WIDTH} ${HEIGHT}" ` +
    `aria-label="Cumulative chance of success over treatment cycles">` +
    `${gridLines}${xLabels}${series}</svg>`;
}
