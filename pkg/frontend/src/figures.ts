/** The three figure families rendered from harness CSVs. */

import { Counters, Curve } from './csv';
import { Frame, PALETTE, SvgDoc, frame, legend } from './svg';

export interface FigureOptions {
  title?: string;
  logX?: boolean;
  width?: number;
  height?: number;
}

const MARGIN = { left: 62, right: 16, top: 34, bottom: 44 };

function drawCurve(doc: SvgDoc, f: Frame, xs: number[], mean: number[],
                   stderr: number[] | null, color: string, dash = ''): void {
  if (stderr && stderr.some((s) => s > 0)) {
    const upper = xs.map((x, i) => [f.sx(x), f.sy(mean[i] + stderr[i])] as [number, number]);
    const lower = xs.map((x, i) => [f.sx(x), f.sy(mean[i] - stderr[i])] as [number, number]);
    doc.polygon(upper.concat(lower.reverse()), color, 0.15);
  }
  doc.polyline(xs.map((x, i) => [f.sx(x), f.sy(mean[i])] as [number, number]), color, 1.6, dash);
}

/** Thin long series so the SVG stays small; end points are always kept. */
function thin(length: number, maxPoints = 800): number[] {
  if (length <= maxPoints) return Array.from({ length }, (_, i) => i);
  const step = (length - 1) / (maxPoints - 1);
  const idx = new Set<number>();
  for (let i = 0; i < maxPoints; i++) idx.add(Math.round(i * step));
  idx.add(length - 1);
  return [...idx].sort((a, b) => a - b);
}

function curveFigure(curves: Curve[], opts: FigureOptions, xLabel: string, yLabel: string): string {
  const width = opts.width ?? 640;
  const height = opts.height ?? 420;
  const doc = new SvgDoc(width, height);
  const horizon = Math.max(...curves.map((c) => c.mean.length));
  let yMax = 0;
  for (const c of curves) {
    for (let i = 0; i < c.mean.length; i++) yMax = Math.max(yMax, c.mean[i] + c.stderr[i]);
  }
  const f = frame(
    doc,
    { x0: MARGIN.left, y0: MARGIN.top, x1: width - MARGIN.right, y1: height - MARGIN.bottom },
    [1, horizon],
    [0, yMax || 1],
    { x: xLabel, y: yLabel },
    opts.logX ?? false,
  );
  curves.forEach((c, i) => {
    const idx = thin(c.mean.length);
    drawCurve(
      doc, f,
      idx.map((j) => j + 1),
      idx.map((j) => c.mean[j]),
      idx.map((j) => c.stderr[j]),
      PALETTE[i % PALETTE.length],
    );
  });
  if (opts.title) doc.text(width / 2, 20, opts.title, { anchor: 'middle', size: 14, bold: true });
  legend(doc, curves.map((c, i) => ({ label: c.label, color: PALETTE[i % PALETTE.length] })),
         MARGIN.left + 10, MARGIN.top + 6);
  return doc.render();
}

/** Multi-algorithm overlay: one curve (with stderr band) per algorithm. */
export function renderOverlay(curves: Curve[], opts: FigureOptions = {}): string {
  return curveFigure(curves, opts, 'epoch', 'mean cumulative regret');
}

/** Parameter sweep: one curve per parameter value (labels carry the value). */
export function renderVary(curves: Curve[], opts: FigureOptions = {}): string {
  return curveFigure(curves, opts, 'epoch', 'mean cumulative regret');
}

/** Stability error counters plus the decision rate on a twin panel. */
export function renderStability(counters: Counters, opts: FigureOptions = {}): string {
  const width = opts.width ?? 640;
  const height = opts.height ?? 520;
  const doc = new SvgDoc(width, height);
  const horizon = counters.deltaRate.length;
  const split = Math.round(height * 0.32);

  const topFrame = frame(
    doc,
    { x0: MARGIN.left, y0: MARGIN.top, x1: width - MARGIN.right, y1: split },
    [1, horizon],
    [0, 1],
    { x: '', y: 'delta rate' },
    opts.logX ?? false,
  );
  const idx = thin(horizon);
  doc.polyline(
    idx.map((j) => [topFrame.sx(j + 1), topFrame.sy(counters.deltaRate[j])] as [number, number]),
    '#333',
    1.4,
  );

  const series: Array<{ label: string; values: number[]; color: string; dash?: string }> = [
    { label: 'typeI_cum', values: counters.typeICum, color: PALETTE[0] },
    { label: 'typeII_cum', values: counters.typeIICum, color: PALETTE[1] },
    { label: 'infeasible_cum', values: counters.infeasibleCum, color: PALETTE[2], dash: '5,3' },
  ];
  const yMax = Math.max(1, ...series.flatMap((s) => s.values));
  const botFrame = frame(
    doc,
    { x0: MARGIN.left, y0: split + 36, x1: width - MARGIN.right, y1: height - MARGIN.bottom },
    [1, horizon],
    [0, yMax],
    { x: 'epoch', y: 'cumulative count' },
    opts.logX ?? false,
  );
  for (const s of series) {
    doc.polyline(
      idx.map((j) => [botFrame.sx(j + 1), botFrame.sy(s.values[j])] as [number, number]),
      s.color,
      1.6,
      s.dash ?? '',
    );
  }
  if (opts.title) doc.text(width / 2, 20, opts.title, { anchor: 'middle', size: 14, bold: true });
  legend(doc, series.map((s) => ({ label: s.label, color: s.color, dash: s.dash })),
         MARGIN.left + 10, split + 42);
  return doc.render();
}
