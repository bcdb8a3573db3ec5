import { RgbImage } from './png'

/**
 * The 8 lossless raster symmetries, with ids matching the Python pipeline:
 * 0..3 rotate counter-clockwise by 90*id degrees; 4..7 flip horizontally
 * first, then rotate by 90*(id-4).
 */
export const DIHEDRAL_IDS = [0, 1, 2, 3, 4, 5, 6, 7] as const

function flipH(img: RgbImage): RgbImage {
  const { width, height, data } = img
  const out = new Uint8Array(data.length)
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      const src = (y * width + x) * 3
      const dst = (y * width + (width - 1 - x)) * 3
      out[dst] = data[src]
      out[dst + 1] = data[src + 1]
      out[dst + 2] = data[src + 2]
    }
  }
  return { width, height, data: out }
}

/** Counter-clockwise quarter turn: source (x, y) lands at (y, W-1-x). */
function rot90(img: RgbImage): RgbImage {
  const { width, height, data } = img
  const out = new Uint8Array(data.length)
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      const src = (y * width + x) * 3
      const dst = ((width - 1 - x) * height + y) * 3
      out[dst] = data[src]
      out[dst + 1] = data[src + 1]
      out[dst + 2] = data[src + 2]
    }
  }
  return { width: height, height: width, data: out }
}

export function applyDihedral(img: RgbImage, op: number): RgbImage {
  if (!Number.isInteger(op) || op < 0 || op > 7) {
    throw new Error(`dihedral op must be in 0..7, got ${op}`)
  }
  let out = op >= 4 ? flipH(img) : img
  for (let k = 0; k < op % 4; k++) out = rot90(out)
  return out
}
