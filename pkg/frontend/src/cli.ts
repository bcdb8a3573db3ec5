import { exportFeatures } from './export'
import { PoolingMode } from './backbone'

function usage(): never {
  console.error(
    [
      'usage: node dist/src/cli.js --manifest <csv> --backbone <dir> --out <store.ctxf>',
      '                            [--pooling none|global-average|2x2-average]',
      '                            [--tap <layer name>] [--patch-size <px>]',
      '                            [--augment all|none|0;1;...]',
      '',
      'Runs a pretrained convolutional backbone over the patch grid of every',
      'manifest image and writes per-patch activation features as a CTXF store.',
      'The backbone is a local tfjs layers-model directory (model.json plus',
      'weight files); which layer to tap defaults to the last 4-D activation.',
    ].join('\n'),
  )
  process.exit(2)
}

function parseAugment(spec: string): number[] {
  if (spec === 'all') return [0, 1, 2, 3, 4, 5, 6, 7]
  if (spec === 'none') return [0]
  return spec.split(/[;,]/).map(v => {
    const n = Number(v)
    if (!Number.isInteger(n) || n < 0 || n > 7) {
      throw new Error(`bad augmentation id ${v}`)
    }
    return n
  })
}

async function main() {
  const args = process.argv.slice(2)
  const opts: Record<string, string> = {}
  for (let i = 0; i < args.length; i += 2) {
    if (!args[i].startsWith('--') || i + 1 >= args.length) usage()
    opts[args[i].slice(2)] = args[i + 1]
  }
  if (!opts.manifest || !opts.backbone || !opts.out) usage()
  const pooling = (opts.pooling ?? '2x2-average') as PoolingMode
  if (!['none', 'global-average', '2x2-average'].includes(pooling)) usage()
  const summary = await exportFeatures(
    {
      manifestPath: opts.manifest,
      backboneDir: opts.backbone,
      tapLayer: opts.tap,
      pooling,
      patchSize: Number(opts['patch-size'] ?? 512),
      augmentations: parseAugment(opts.augment ?? 'none'),
    },
    opts.out,
  )
  console.log(
    `wrote ${summary.recordsWritten} records (D=${summary.dim}, ` +
    `tap=${summary.tapLayer}) to ${opts.out}`,
  )
}

main().catch(err => {
  console.error(`error: ${err.message}`)
  process.exit(1)
})
