import * as tf from '@tensorflow/tfjs'
import { join } from 'path'
import { fileSaveHandler } from '../src/backbone'

/**
 * Build and save a small fixed-seed convolutional backbone for tests and
 * local runs. Accepts any patch size >= 16; its final activation map on a
 * 32-px patch is 2x2x16, so 2x2-average pooling yields 64-dim features.
 *
 * Production use expects a real pretrained backbone converted to the tfjs
 * layers format instead (see README).
 */
export async function buildAndSaveBackbone(dir: string): Promise<void> {
  await tf.setBackend('cpu')
  const model = tf.sequential()
  model.add(
    tf.layers.conv2d({
      inputShape: [null as unknown as number, null as unknown as number, 3],
      filters: 8,
      kernelSize: 3,
      strides: 4,
      padding: 'same',
      activation: 'relu',
      kernelInitializer: tf.initializers.glorotUniform({ seed: 7 }),
      biasInitializer: 'zeros',
      name: 'conv1',
    }),
  )
  model.add(
    tf.layers.conv2d({
      filters: 16,
      kernelSize: 3,
      strides: 4,
      padding: 'same',
      activation: 'relu',
      kernelInitializer: tf.initializers.glorotUniform({ seed: 11 }),
      biasInitializer: 'zeros',
      name: 'conv2',
    }),
  )
  await model.save(fileSaveHandler(dir))
}

if (require.main === module) {
  const dir = process.argv[2] ?? join(__dirname, '..', '..', 'fixtures', 'backbone')
  buildAndSaveBackbone(dir)
    .then(() => console.log(`backbone saved to ${dir}`))
    .catch(err => {
      console.error(err)
      process.exit(1)
    })
}
