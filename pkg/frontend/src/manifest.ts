import { readFileSync } from 'fs'
import { existsSync } from 'fs'
import { dirname, isAbsolute, join } from 'path'

export interface ManifestRecord {
  imageId: string
  path: string
  label: string
}

const LABELS = new Set(['normal', 'benign', 'insitu', 'invasive'])

/** Parse the pipeline's manifest CSV: header image_id,path,label. */
export function loadManifest(path: string): ManifestRecord[] {
  const lines = readFileSync(path, 'utf-8').split(/\r?\n/)
  if (lines.length === 0 || lines[0].trim() !== 'image_id,path,label') {
    throw new Error(`${path}: expected header image_id,path,label`)
  }
  const records: ManifestRecord[] = []
  const seen = new Set<string>()
  for (let i = 1; i < lines.length; i++) {
    const line = lines[i].trim()
    if (!line) continue
    const parts = line.split(',')
    if (parts.length !== 3) {
      throw new Error(`${path}:${i + 1}: expected 3 fields, got ${parts.length}`)
    }
    const [imageId, rel, label] = parts.map(p => p.trim())
    if (seen.has(imageId)) {
      throw new Error(`${path}:${i + 1}: duplicate image_id ${imageId}`)
    }
    seen.add(imageId)
    if (!LABELS.has(label)) {
      throw new Error(`${path}:${i + 1}: unknown label ${label}`)
    }
    const imgPath = isAbsolute(rel) ? rel : join(dirname(path), rel)
    if (!existsSync(imgPath)) {
      throw new Error(`${path}:${i + 1}: no such image file ${imgPath}`)
    }
    records.push({ imageId, path: imgPath, label })
  }
  return records
}
