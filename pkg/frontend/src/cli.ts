/**
 * Usage: fairalloc-plots render --csv <file> --kind {overlay,vary,stability}
 *                               --out <file.svg> [--log-x] [--title <text>]
 *
 * Reads a harness CSV and writes one SVG figure. Exits non-zero (writing
 * nothing) on schema mismatches, with a column diagnostic on stderr.
 */
import * as fs from 'fs';
import * as path from 'path';

import { SchemaError, parseCountersCsv, parseCurvesCsv } from './csv';
import { renderOverlay, renderStability, renderVary } from './figures';

const KINDS = ['overlay', 'vary', 'stability'] as const;
type Kind = (typeof KINDS)[number];

interface Args {
  csv: string;
  kind: Kind;
  out: string;
  logX: boolean;
  title?: string;
}

function usage(message?: string): never {
  if (message) console.error(`error: usage: ${message}`);
  console.error(
    'usage: fairalloc-plots render --csv <file> --kind {overlay,vary,stability} ' +
      '--out <file.svg> [--log-x] [--title <text>]',
  );
  process.exit(2);
}

function parseArgs(argv: string[]): Args {
  if (argv[0] !== 'render') usage(`unknown command ${argv[0] ?? '(none)'}`);
  const out: Partial<Args> = { logX: false };
  for (let i = 1; i < argv.length; i++) {
    const a = argv[i];
    if (a === '--csv') out.csv = argv[++i];
    else if (a === '--kind') out.kind = argv[++i] as Kind;
    else if (a === '--out') out.out = argv[++i];
    else if (a === '--log-x') out.logX = true;
    else if (a === '--title') out.title = argv[++i];
    else usage(`unknown flag ${a}`);
  }
  if (!out.csv || !out.kind || !out.out) usage('--csv, --kind and --out are required');
  if (!KINDS.includes(out.kind)) usage(`--kind must be one of ${KINDS.join(', ')}`);
  return out as Args;
}

export function render(args: Args): string {
  const text = fs.readFileSync(args.csv, 'utf8');
  const opts = { logX: args.logX, title: args.title ?? path.basename(args.csv, '.csv') };
  if (args.kind === 'stability') {
    return renderStability(parseCountersCsv(text), opts);
  }
  const curves = parseCurvesCsv(text);
  return args.kind === 'overlay' ? renderOverlay(curves, opts) : renderVary(curves, opts);
}

export function main(argv: string[]): number {
  const args = parseArgs(argv);
  let svg: string;
  try {
    svg = render(args);
  } catch (err) {
    if (err instanceof SchemaError) {
      console.error(`error: schema: ${err.message}`);
      return 1;
    }
    if (err instanceof Error && 'code' in err) {
      console.error(`error: io: ${err.message}`);
      return 1;
    }
    throw err;
  }
  fs.mkdirSync(path.dirname(path.resolve(args.out)), { recursive: true });
  fs.writeFileSync(args.out, svg);
  console.log(`wrote ${args.out}`);
  return 0;
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
