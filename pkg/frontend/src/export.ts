import { Backbone, PoolingMode, extractPatchFeatures, loadBackbone } from './backbone'
import { CtxfRecord, writeCtxf } from './ctxf'
import { applyDihedral } from './dihedral'
import { cells, makeGrid, origin } from './grid'
import { loadManifest } from './manifest'
import { cropPatch, readPng } from './png'

export interface ExportSpec {
  manifestPath: string
  backboneDir: string
  tapLayer?: string
  pooling: PoolingMode
  patchSize: number
  /** dihedral op ids; record order is manifest order, then augmentation id */
  augmentations: number[]
}

export interface ExportSummary {
  recordsWritten: number
  dim: number
  tapLayer: string
}

/**
 * Run the backbone over every patch of every (image, augmentation) and
 * write one CTXF store. Grid geometry matches the pipeline tiler exactly;
 * the feature dimension is whatever the tapped layer produces under the
 * chosen pooling, recorded in the store header.
 */
export async function exportFeatures(
  spec: ExportSpec,
  outPath: string,
): Promise<ExportSummary> {
  const records = loadManifest(spec.manifestPath)
  const backbone: Backbone = await loadBackbone(spec.backboneDir, spec.tapLayer)
  const augs = [...spec.augmentations].sort((a, b) => a - b)
  const out: CtxfRecord[] = []
  let dim = -1
  for (const rec of records) {
    const img = readPng(rec.path)
    for (const aug of augs) {
      const view = applyDihedral(img, aug)
      const grid = makeGrid(view.width, view.height, spec.patchSize, spec.patchSize)
      const vectors: Float32Array[] = []
      for (const [r, c] of cells(grid)) {
        const [x, y] = origin(grid, r, c)
        const patch = cropPatch(view, x, y, spec.patchSize)
        const vec = extractPatchFeatures(backbone, patch, spec.pooling)
        if (dim === -1) dim = vec.length
        if (vec.length !== dim) {
          throw new Error(
            `feature dimension drift: got ${vec.length}, expected ${dim}`,
          )
        }
        vectors.push(vec)
      }
      const values = new Float32Array(vectors.length * dim)
      vectors.forEach((v, i) => values.set(v, i * dim))
      out.push({
        imageId: rec.imageId,
        augmentation: aug,
        rows: grid.rows,
        cols: grid.cols,
        values,
      })
    }
  }
  writeCtxf(outPath, dim === -1 ? 0 : dim, out)
  return { recordsWritten: out.length, dim: dim === -1 ? 0 : dim, tapLayer: backbone.tapLayer }
}
