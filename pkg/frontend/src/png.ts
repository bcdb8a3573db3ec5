import { readFileSync } from 'fs'
import { PNG } from 'pngjs'

export interface RgbImage {
  width: number
  height: number
  /** row-major RGB triples, length = width * height * 3 */
  data: Uint8Array
}

export function readPng(path: string): RgbImage {
  const png = PNG.sync.read(readFileSync(path))
  const n = png.width * png.height
  const rgb = new Uint8Array(n * 3)
  for (let i = 0; i < n; i++) {
    rgb[i * 3] = png.data[i * 4]
    rgb[i * 3 + 1] = png.data[i * 4 + 1]
    rgb[i * 3 + 2] = png.data[i * 4 + 2]
  }
  return { width: png.width, height: png.height, data: rgb }
}

/** Copy out the patch rectangle with top-left (x, y). */
export function cropPatch(img: RgbImage, x: number, y: number, size: number): RgbImage {
  const out = new Uint8Array(size * size * 3)
  for (let row = 0; row < size; row++) {
    const src = ((y + row) * img.width + x) * 3
    out.set(img.data.subarray(src, src + size * 3), row * size * 3)
  }
  return { width: size, height: size, data: out }
}
