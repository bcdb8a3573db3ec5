/**
 * Patch-grid geometry. Must stay bit-for-bit compatible with the Python
 * pipeline's tiler: rows = floor((H - patch) / stride) + 1 (same for
 * columns), ragged border pixels dropped from the right/bottom.
 */

export interface PatchGrid {
  patchSize: number
  stride: number
  rows: number
  cols: number
}

export function makeGrid(
  width: number,
  height: number,
  patchSize: number,
  stride: number,
): PatchGrid {
  if (stride < 1) throw new Error('stride must be >= 1')
  if (patchSize < 1) throw new Error('patchSize must be >= 1')
  if (patchSize > width || patchSize > height) {
    throw new Error(
      `patch ${patchSize} does not fit in a ${width}x${height} image`,
    )
  }
  return {
    patchSize,
    stride,
    rows: Math.floor((height - patchSize) / stride) + 1,
    cols: Math.floor((width - patchSize) / stride) + 1,
  }
}

/** Top-left pixel (x, y) of the cell at (row, col). */
export function origin(grid: PatchGrid, row: number, col: number): [number, number] {
  if (row < 0 || row >= grid.rows || col < 0 || col >= grid.cols) {
    throw new Error(`(${row}, ${col}) outside ${grid.rows}x${grid.cols} grid`)
  }
  return [col * grid.stride, row * grid.stride]
}

/** All (row, col) cells in row-major order. */
export function cells(grid: PatchGrid): Array<[number, number]> {
  const out: Array<[number, number]> = []
  for (let r = 0; r < grid.rows; r++) {
    for (let c = 0; c < grid.cols; c++) out.push([r, c])
  }
  return out
}
