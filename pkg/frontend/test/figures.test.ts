import { describe, expect, it } from 'vitest';
import * as fs from 'fs';
import * as path from 'path';

import { parseCountersCsv, parseCurvesCsv } from '../src/csv';
import { renderOverlay, renderStability, renderVary } from '../src/figures';

const data = (name: string) =>
  fs.readFileSync(path.join(__dirname, '..', 'testdata', name), 'utf8');

function legendLabels(svg: string): string[] {
  const legend = svg.match(/<g class="legend">([\s\S]*?)<\/g>/);
  expect(legend).not.toBeNull();
  return [...legend![1].matchAll(/<text[^>]*>([^<]*)<\/text>/g)].map((m) => m[1]);
}

describe('overlay figure', () => {
  const curves = parseCurvesCsv(data('toy-small.csv'));

  it('renders one polyline per algorithm plus bands and axes', () => {
    const svg = renderOverlay(curves);
    expect(svg.startsWith('<svg')).toBe(true);
    // one band polygon per curve with positive stderr, one polyline per curve
    const polylines = svg.match(/<polyline/g) ?? [];
    expect(polylines.length).toBeGreaterThanOrEqual(curves.length);
  });

  it('legend lists exactly the algorithms present in the CSV', () => {
    const svg = renderOverlay(curves);
    expect(legendLabels(svg)).toEqual(['dueling-ulcb', 'second-best-ucb', 'sequential-ucb']);
  });

  it('is a pure function of the CSV', () => {
    expect(renderOverlay(curves)).toBe(renderOverlay(parseCurvesCsv(data('toy-small.csv'))));
  });

  it('log-x option changes the x mapping but not the legend', () => {
    const lin = renderOverlay(curves);
    const log = renderOverlay(curves, { logX: true });
    expect(lin).not.toBe(log);
    expect(legendLabels(log)).toEqual(legendLabels(lin));
  });
});

describe('vary figure', () => {
  it('renders one curve per parameter value', () => {
    const curves = parseCurvesCsv(data('vary-small.csv'));
    const svg = renderVary(curves, { title: 'vary-N' });
    expect(legendLabels(svg)).toEqual(['N=4', 'N=6', 'N=8', 'N=10']);
    expect(svg).toContain('vary-N');
  });
});

describe('stability figure', () => {
  it('renders the counter curves and the decision-rate panel', () => {
    const counters = parseCountersCsv(data('stability-counters-small.csv'));
    const svg = renderStability(counters);
    expect(legendLabels(svg)).toEqual(['typeI_cum', 'typeII_cum', 'infeasible_cum']);
    expect(svg).toContain('delta rate');
  });
});
