import * as tf from '@tensorflow/tfjs'
import { existsSync, readFileSync, writeFileSync, mkdirSync } from 'fs'
import { join } from 'path'
import { RgbImage } from './png'

export type PoolingMode = 'none' | 'global-average' | '2x2-average'

/**
 * Minimal file IO handler so layers models load from a local directory
 * with the pure-JS tfjs build (no tfjs-node native dependency).
 */
function fileLoadHandler(dir: string): tf.io.IOHandler {
  return {
    load: async () => {
      const manifest = JSON.parse(
        readFileSync(join(dir, 'model.json'), 'utf-8'),
      )
      const specs: tf.io.WeightsManifestEntry[] = []
      const buffers: Buffer[] = []
      for (const group of manifest.weightsManifest) {
        specs.push(...group.weights)
        for (const rel of group.paths) {
          buffers.push(readFileSync(join(dir, rel)))
        }
      }
      const merged = Buffer.concat(buffers)
      return {
        modelTopology: manifest.modelTopology,
        format: manifest.format,
        generatedBy: manifest.generatedBy,
        convertedBy: manifest.convertedBy,
        weightSpecs: specs,
        weightData: merged.buffer.slice(
          merged.byteOffset,
          merged.byteOffset + merged.byteLength,
        ),
      }
    },
  }
}

export function fileSaveHandler(dir: string): tf.io.IOHandler {
  return {
    save: async (artifacts: tf.io.ModelArtifacts) => {
      mkdirSync(dir, { recursive: true })
      const weightData = artifacts.weightData as ArrayBuffer
      writeFileSync(join(dir, 'weights.bin'), Buffer.from(weightData))
      const manifest = {
        modelTopology: artifacts.modelTopology,
        format: artifacts.format,
        generatedBy: artifacts.generatedBy,
        convertedBy: artifacts.convertedBy,
        weightsManifest: [
          { paths: ['weights.bin'], weights: artifacts.weightSpecs },
        ],
      }
      writeFileSync(join(dir, 'model.json'), JSON.stringify(manifest))
      return {
        modelArtifactsInfo: {
          dateSaved: new Date(),
          modelTopologyType: 'JSON',
        },
      }
    },
  }
}

export interface Backbone {
  model: tf.LayersModel
  tapLayer: string
}

/**
 * Load a backbone from a local tfjs layers-model directory and rewire its
 * output to the tap layer (default: the last layer with a 4-D activation
 * map, i.e. the final convolutional output).
 */
export async function loadBackbone(dir: string, tapLayer?: string): Promise<Backbone> {
  if (!existsSync(join(dir, 'model.json'))) {
    throw new Error(
      `backbone not found at ${dir}: expected a tfjs layers model ` +
      '(model.json + weight files)',
    )
  }
  await tf.setBackend('cpu')
  const full = await tf.loadLayersModel(fileLoadHandler(dir))
  let tap = tapLayer
  if (!tap) {
    for (const layer of full.layers) {
      const shape = layer.outputShape as number[]
      if (Array.isArray(shape) && shape.length === 4) tap = layer.name
    }
    if (!tap) throw new Error('no 4-D activation layer found to tap')
  }
  const tapped = tf.model({
    inputs: full.inputs,
    outputs: full.getLayer(tap).output as tf.SymbolicTensor,
  })
  return { model: tapped, tapLayer: tap }
}

function pool(map: tf.Tensor4D, mode: PoolingMode): tf.Tensor {
  const [, h, w] = map.shape
  switch (mode) {
    case 'none':
      return map.reshape([-1])
    case 'global-average':
      return map.mean([1, 2]).reshape([-1])
    case '2x2-average': {
      if (h < 2 || w < 2) {
        throw new Error(
          `activation map ${h}x${w} too small for 2x2-average pooling`,
        )
      }
      const hs = Math.floor(h / 2)
      const ws = Math.floor(w / 2)
      const quads = [
        map.slice([0, 0, 0, 0], [1, hs, ws, -1]),
        map.slice([0, 0, ws, 0], [1, hs, w - ws, -1]),
        map.slice([0, hs, 0, 0], [1, h - hs, ws, -1]),
        map.slice([0, hs, ws, 0], [1, h - hs, w - ws, -1]),
      ]
      return tf.concat(quads.map(q => q.mean([1, 2]).reshape([-1])))
    }
  }
}

/** Feature vector for one RGB patch: forward pass then pooling. */
export function extractPatchFeatures(
  backbone: Backbone,
  patch: RgbImage,
  pooling: PoolingMode,
): Float32Array {
  return tf.tidy(() => {
    const pixels = tf.tensor4d(
      Float32Array.from(patch.data, v => v / 255),
      [1, patch.height, patch.width, 3],
    )
    const map = backbone.model.predict(pixels) as tf.Tensor4D
    const vec = pool(map, pooling)
    return vec.dataSync() as Float32Array
  })
}
