import { describe, expect, it } from 'vitest';
import * as fs from 'fs';
import * as path from 'path';

import { SchemaError, parseCountersCsv, parseCurvesCsv } from '../src/csv';

const data = (name: string) =>
  fs.readFileSync(path.join(__dirname, '..', 'testdata', name), 'utf8');

describe('parseCurvesCsv', () => {
  it('parses the golden toy file into three ordered curves', () => {
    const curves = parseCurvesCsv(data('toy-small.csv'));
    expect(curves.map((c) => c.label)).toEqual([
      'dueling-ulcb',
      'second-best-ucb',
      'sequential-ucb',
    ]);
    for (const c of curves) {
      expect(c.mean).toHaveLength(300);
      expect(c.nSeeds).toBe(3);
      // cumulative regret of nonnegative terms is nondecreasing
      for (let i = 1; i < c.mean.length; i++) {
        expect(c.mean[i]).toBeGreaterThanOrEqual(c.mean[i - 1] - 1e-9);
      }
    }
  });

  it('rejects a header-only file', () => {
    expect(() => parseCurvesCsv('epoch,algorithm,mean_cum_regret,stderr,n_seeds\n')).toThrow(
      SchemaError,
    );
  });

  it('names the offending column on header mismatch', () => {
    const bad = 'epoch,algo,mean_cum_regret,stderr,n_seeds\n1,x,0,0,1\n';
    expect(() => parseCurvesCsv(bad)).toThrow(/column 2: expected algorithm, found algo/);
  });

  it('rejects non-numeric cells with a row diagnostic', () => {
    const bad = 'epoch,algorithm,mean_cum_regret,stderr,n_seeds\n1,x,oops,0,1\n';
    expect(() => parseCurvesCsv(bad)).toThrow(/row 2: column mean_cum_regret/);
  });
});

describe('parseCountersCsv', () => {
  it('parses the golden stability counters', () => {
    const counters = parseCountersCsv(data('stability-counters-small.csv'));
    expect(counters.deltaRate).toHaveLength(400);
    expect(Math.max(...counters.deltaRate)).toBeLessThanOrEqual(1);
    for (const series of [counters.typeICum, counters.typeIICum, counters.infeasibleCum]) {
      for (let i = 1; i < series.length; i++) {
        expect(series[i]).toBeGreaterThanOrEqual(series[i - 1]);
      }
    }
  });

  it('rejects curves files', () => {
    expect(() => parseCountersCsv(data('toy-small.csv'))).toThrow(SchemaError);
  });
});
