/** Minimal deterministic SVG chart primitives (no DOM, no dependencies). */

export interface Scale {
  (v: number): number;
}

export function linearScale(d0: number, d1: number, r0: number, r1: number): Scale {
  const span = d1 - d0 || 1;
  return (v) => r0 + ((v - d0) / span) * (r1 - r0);
}

export function logScale(d0: number, d1: number, r0: number, r1: number): Scale {
  const lo = Math.log10(Math.max(d0, 1));
  const hi = Math.log10(Math.max(d1, 1));
  const span = hi - lo || 1;
  return (v) => r0 + ((Math.log10(Math.max(v, 1)) - lo) / span) * (r1 - r0);
}

/** Round-ish tick positions covering [lo, hi]. */
export function ticks(lo: number, hi: number, count = 5): number[] {
  if (hi <= lo) return [lo];
  const raw = (hi - lo) / count;
  const mag = Math.pow(10, Math.floor(Math.log10(raw)));
  const step = [1, 2, 5, 10].map((m) => m * mag).find((s) => (hi - lo) / s <= count) ?? mag * 10;
  const start = Math.ceil(lo / step) * step;
  const out: number[] = [];
  for (let v = start; v <= hi + 1e-9; v += step) out.push(Number(v.toPrecision(12)));
  return out;
}

export function fmt(v: number): string {
  if (v === 0) return '0';
  const a = Math.abs(v);
  if (a >= 10000 || a < 0.01) return v.toExponential(1);
  return Number(v.toPrecision(4)).toString();
}

const esc = (s: string) =>
  s.replace(/&/g, '&amp;').replace(/</g, '&lt;').replace(/>/g, '&gt;').replace(/"/g, '&quot;');

export const PALETTE = [
  '#1f77b4', '#d62728', '#2ca02c', '#9467bd', '#ff7f0e',
  '#8c564b', '#17becf', '#7f7f7f', '#bcbd22', '#e377c2',
];

export class SvgDoc {
  private parts: string[] = [];

  constructor(readonly width: number, readonly height: number) {}

  raw(s: string): void {
    this.parts.push(s);
  }

  line(x1: number, y1: number, x2: number, y2: number, stroke: string, width = 1): void {
    this.raw(
      `<line x1="${r(x1)}" y1="${r(y1)}" x2="${r(x2)}" y2="${r(y2)}" stroke="${stroke}" stroke-width="${width}"/>`,
    );
  }

  polyline(points: Array<[number, number]>, stroke: string, width = 1.5, dash = ''): void {
    const pts = points.map(([x, y]) => `${r(x)},${r(y)}`).join(' ');
    const dashAttr = dash ? ` stroke-dasharray="${dash}"` : '';
    this.raw(`<polyline points="${pts}" fill="none" stroke="${stroke}" stroke-width="${width}"${dashAttr}/>`);
  }

  polygon(points: Array<[number, number]>, fill: string, opacity: number): void {
    const pts = points.map(([x, y]) => `${r(x)},${r(y)}`).join(' ');
    this.raw(`<polygon points="${pts}" fill="${fill}" fill-opacity="${opacity}" stroke="none"/>`);
  }

  text(x: number, y: number, content: string, opts: { size?: number; anchor?: string; bold?: boolean } = {}): void {
    const anchor = opts.anchor ?? 'start';
    const weight = opts.bold ? ' font-weight="bold"' : '';
    this.raw(
      `<text x="${r(x)}" y="${r(y)}" font-family="sans-serif" font-size="${opts.size ?? 11}"` +
        ` text-anchor="${anchor}"${weight}>${esc(content)}</text>`,
    );
  }

  rect(x: number, y: number, w: number, h: number, fill: string, stroke = 'none'): void {
    this.raw(`<rect x="${r(x)}" y="${r(y)}" width="${r(w)}" height="${r(h)}" fill="${fill}" stroke="${stroke}"/>`);
  }

  render(): string {
    return (
      `<svg xmlns="http://www.w3.org/2000/svg" width="${this.width}" height="${this.height}"` +
      ` viewBox="0 0 ${this.width} ${this.height}">\n` +
      `<rect width="${this.width}" height="${this.height}" fill="white"/>\n` +
      this.parts.join('\n') +
      '\n</svg>\n'
    );
  }
}

function r(v: number): string {
  return Number(v.toFixed(2)).toString();
}

export interface Frame {
  x0: number;
  y0: number;
  x1: number;
  y1: number;
  sx: Scale;
  sy: Scale;
}

/** Draw axes with ticks and return the data-space -> pixel mapping. */
export function frame(
  doc: SvgDoc,
  box: { x0: number; y0: number; x1: number; y1: number },
  xDomain: [number, number],
  yDomain: [number, number],
  labels: { x: string; y: string },
  logX = false,
): Frame {
  const sx = (logX ? logScale : linearScale)(xDomain[0], xDomain[1], box.x0, box.x1);
  const sy = linearScale(yDomain[0], yDomain[1], box.y1, box.y0);
  doc.line(box.x0, box.y1, box.x1, box.y1, '#333');
  doc.line(box.x0, box.y0, box.x0, box.y1, '#333');
  const xt = logX
    ? [1, 10, 100, 1000, 10000, 100000].filter((v) => v >= xDomain[0] && v <= xDomain[1])
    : ticks(xDomain[0], xDomain[1]);
  for (const v of xt) {
    const x = sx(v);
    doc.line(x, box.y1, x, box.y1 + 4, '#333');
    doc.text(x, box.y1 + 16, fmt(v), { anchor: 'middle' });
  }
  for (const v of ticks(yDomain[0], yDomain[1])) {
    const y = sy(v);
    doc.line(box.x0 - 4, y, box.x0, y, '#333');
    doc.line(box.x0, y, box.x1, y, '#eee');
    doc.text(box.x0 - 7, y + 3.5, fmt(v), { anchor: 'end' });
  }
  doc.text((box.x0 + box.x1) / 2, box.y1 + 32, labels.x, { anchor: 'middle', size: 12 });
  doc.raw(
    `<text x="14" y="${r((box.y0 + box.y1) / 2)}" font-family="sans-serif" font-size="12"` +
      ` text-anchor="middle" transform="rotate(-90 14 ${r((box.y0 + box.y1) / 2)})">${labels.y}</text>`,
  );
  return { ...box, sx, sy };
}

export function legend(doc: SvgDoc, entries: Array<{ label: string; color: string; dash?: string }>,
                       x: number, y: number): void {
  doc.raw(`<g class="legend">`);
  const width = Math.max(...entries.map((e) => e.label.length)) * 6.6 + 40;
  doc.rect(x, y, width, entries.length * 16 + 10, 'white', '#999');
  entries.forEach((e, i) => {
    const yy = y + 14 + i * 16;
    doc.polyline(
      [
        [x + 8, yy - 4],
        [x + 28, yy - 4],
      ],
      e.color,
      2,
      e.dash ?? '',
    );
    doc.text(x + 33, yy, e.label);
  });
  doc.raw(`</g>`);
}
