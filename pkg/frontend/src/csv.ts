/** Parsers for the harness CSV schemas, with column-level diagnostics. */

export const CURVES_HEADER = 'epoch,algorithm,mean_cum_regret,stderr,n_seeds';
export const COUNTERS_HEADER = 'epoch,delta_rate,typeI_cum,typeII_cum,infeasible_cum';

export class SchemaError extends Error {}

export interface Curve {
  label: string;
  mean: number[];
  stderr: number[];
  nSeeds: number;
}

export interface Counters {
  deltaRate: number[];
  typeICum: number[];
  typeIICum: number[];
  infeasibleCum: number[];
}

function checkHeader(actual: string, expected: string): void {
  if (actual === expected) return;
  const got = actual.split(',');
  const want = expected.split(',');
  const diffs: string[] = [];
  for (let i = 0; i < Math.max(got.length, want.length); i++) {
    if (got[i] !== want[i]) {
      diffs.push(`column ${i + 1}: expected ${want[i] ?? '(none)'}, found ${got[i] ?? '(none)'}`);
    }
  }
  throw new SchemaError(`header mismatch: ${diffs.join('; ')}`);
}

function splitRows(text: string, expectedHeader: string, what: string): string[][] {
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  if (lines.length === 0) throw new SchemaError(`${what}: file is empty`);
  checkHeader(lines[0], expectedHeader);
  if (lines.length === 1) throw new SchemaError(`${what}: no data rows after the header`);
  const width = expectedHeader.split(',').length;
  return lines.slice(1).map((line, i) => {
    const cells = line.split(',');
    if (cells.length !== width) {
      throw new SchemaError(`${what}: row ${i + 2} has ${cells.length} columns, expected ${width}`);
    }
    return cells;
  });
}

function num(cell: string, row: number, column: string): number {
  const v = Number(cell);
  if (!Number.isFinite(v)) {
    throw new SchemaError(`row ${row}: column ${column} is not numeric: ${JSON.stringify(cell)}`);
  }
  return v;
}

/** Curves in first-appearance order; epochs must be contiguous per label. */
export function parseCurvesCsv(text: string): Curve[] {
  const rows = splitRows(text, CURVES_HEADER, 'curves CSV');
  const order: string[] = [];
  const byLabel = new Map<string, Curve>();
  rows.forEach((cells, i) => {
    const row = i + 2;
    const label = cells[1];
    let curve = byLabel.get(label);
    if (!curve) {
      curve = { label, mean: [], stderr: [], nSeeds: num(cells[4], row, 'n_seeds') };
      byLabel.set(label, curve);
      order.push(label);
    }
    const epoch = num(cells[0], row, 'epoch');
    if (epoch !== curve.mean.length + 1) {
      throw new SchemaError(`row ${row}: epoch ${epoch} out of order for ${label}`);
    }
    curve.mean.push(num(cells[2], row, 'mean_cum_regret'));
    curve.stderr.push(num(cells[3], row, 'stderr'));
  });
  return order.map((label) => byLabel.get(label)!);
}

export function parseCountersCsv(text: string): Counters {
  const rows = splitRows(text, COUNTERS_HEADER, 'counters CSV');
  const out: Counters = { deltaRate: [], typeICum: [], typeIICum: [], infeasibleCum: [] };
  rows.forEach((cells, i) => {
    const row = i + 2;
    out.deltaRate.push(num(cells[1], row, 'delta_rate'));
    out.typeICum.push(num(cells[2], row, 'typeI_cum'));
    out.typeIICum.push(num(cells[3], row, 'typeII_cum'));
    out.infeasibleCum.push(num(cells[4], row, 'infeasible_cum'));
  });
  return out;
}
