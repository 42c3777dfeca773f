/**
 * Embedding backends.
 *
 * `hash`  deterministic content-addressed vectors at the contract
 *         dimensions; runs offline, used for format conformance and
 *         integration testing.
 * `tfjs`  real inference with a locally provided TensorFlow.js graph
 *         model (no network); any load problem is a hard error so the
 *         caller can see exactly what is missing.
 */

import { createHash } from 'node:crypto'
import { existsSync, readFileSync } from 'node:fs'
import { dirname, join } from 'node:path'

export const MODALITY_DIMS = {
  sections: 768,
  sentences: 512,
  images: 2048,
  pages: 768,
} as const

export type Modality = keyof typeof MODALITY_DIMS

export interface TokenEncoder {
  name: string
  dim: number
  encodeTokens(tokens: string[]): Float32Array
}

export interface BytesEncoder {
  name: string
  dim: number
  encodeBytes(data: Buffer): Float32Array
}

function l2normalise(vec: Float32Array): Float32Array {
  let norm = 0
  for (const x of vec) norm += x * x
  norm = Math.sqrt(norm)
  if (norm > 0) for (let i = 0; i < vec.length; i++) vec[i] /= norm
  return vec
}

/** One signed coordinate per token, accumulated and L2-normalised. */
export class HashingTokenEncoder implements TokenEncoder {
  readonly name: string
  constructor(
    readonly dim: number,
    readonly salt: string,
  ) {
    this.name = `hash-${salt}-${dim}`
  }

  encodeTokens(tokens: string[]): Float32Array {
    const vec = new Float32Array(this.dim)
    for (const token of tokens) {
      const digest = createHash('sha256').update(this.salt).update(token).digest()
      const value = digest.readBigUInt64LE(0)
      const index = Number(value % BigInt(this.dim))
      const sign = (value >> 63n) & 1n ? 1 : -1
      vec[index] += sign
    }
    return l2normalise(vec)
  }
}

/** Expands a content digest into a unit vector (counter-mode hashing). */
export class HashingBytesEncoder implements BytesEncoder {
  readonly name: string
  constructor(
    readonly dim: number,
    readonly salt: string,
  ) {
    this.name = `hash-${salt}-${dim}`
  }

  encodeBytes(data: Buffer): Float32Array {
    const seed = createHash('sha256').update(this.salt).update(data).digest()
    const vec = new Float32Array(this.dim)
    let produced = 0
    let counter = 0
    while (produced < this.dim) {
      const block = createHash('sha256').update(seed).update(String(counter)).digest()
      for (let off = 0; off + 4 <= block.length && produced < this.dim; off += 4) {
        // map 32 uniform bits into roughly standard-normal-ish (-2, 2)
        const u = block.readUInt32LE(off) / 0xffffffff
        vec[produced] = 4 * u - 2
        produced += 1
      }
      counter += 1
    }
    return l2normalise(vec)
  }
}

export class ModelLoadError extends Error {}

interface TfModule {
  loadGraphModel(handler: unknown): Promise<{
    execute(input: unknown, outputs?: string[]): unknown
  }>
  io: { fromMemory(artifacts: unknown): unknown }
  tensor(values: number[] | number[][], shape?: number[]): unknown
}

/**
 * Load a TensorFlow.js graph model from a local directory (model.json +
 * weight shards) without any network or node-native bindings.
 */
// resolved at runtime so the heavy dependency stays optional
const TFJS_MODULE = '@tensorflow/tfjs'

export async function loadLocalGraphModel(modelDir: string) {
  let tf: TfModule
  try {
    tf = (await import(TFJS_MODULE)) as unknown as TfModule
  } catch (err) {
    throw new ModelLoadError(
      `cannot import ${TFJS_MODULE} (${(err as Error).message}); ` +
        `install it or use --backend hash`,
    )
  }
  const manifestPath = join(modelDir, 'model.json')
  if (!existsSync(manifestPath)) {
    throw new ModelLoadError(
      `no model.json under ${modelDir}; provide a local TensorFlow.js ` +
        `graph model or use --backend hash`,
    )
  }
  const manifest = JSON.parse(readFileSync(manifestPath, 'utf-8'))
  const weightSpecs: unknown[] = []
  const buffers: Buffer[] = []
  for (const group of manifest.weightsManifest ?? []) {
    weightSpecs.push(...group.weights)
    for (const relative of group.paths) {
      const shardPath = join(dirname(manifestPath), relative)
      if (!existsSync(shardPath)) {
        throw new ModelLoadError(`missing weight shard ${shardPath}`)
      }
      buffers.push(readFileSync(shardPath))
    }
  }
  const weightData = Buffer.concat(buffers)
  const artifacts = {
    modelTopology: manifest.modelTopology,
    format: manifest.format,
    generatedBy: manifest.generatedBy,
    convertedBy: manifest.convertedBy,
    weightSpecs,
    weightData: weightData.buffer.slice(
      weightData.byteOffset,
      weightData.byteOffset + weightData.byteLength,
    ),
  }
  try {
    return { tf, model: await tf.loadGraphModel(tf.io.fromMemory(artifacts)) }
  } catch (err) {
    throw new ModelLoadError(
      `failed to initialise graph model from ${modelDir}: ${(err as Error).message}`,
    )
  }
}

export interface BackendOptions {
  backend: 'hash' | 'tfjs'
  modelDir?: string
}

export async function tokenEncoderFor(
  modality: Modality,
  options: BackendOptions,
): Promise<TokenEncoder> {
  const dim = MODALITY_DIMS[modality]
  if (options.backend === 'hash') return new HashingTokenEncoder(dim, modality)
  if (!options.modelDir) {
    throw new ModelLoadError('the tfjs backend needs --model-dir with a local graph model')
  }
  const { tf, model } = await loadLocalGraphModel(options.modelDir)
  return {
    name: `tfjs:${options.modelDir}`,
    dim,
    encodeTokens(tokens: string[]): Float32Array {
      // generic contract: the model maps a token-id tensor to one vector;
      // token ids are stable hashes into a 30k vocabulary
      const ids = tokens.map((t) => {
        const digest = createHash('sha256').update(t).digest()
        return Number(digest.readBigUInt64LE(0) % 30000n)
      })
      const out = model.execute(tf.tensor([ids.length ? ids : [0]])) as {
        dataSync(): Float32Array
        dispose(): void
      }
      const data = Float32Array.from(out.dataSync())
      out.dispose()
      if (data.length !== dim) {
        throw new ModelLoadError(
          `model emitted ${data.length} values, expected ${dim} for ${modality}`,
        )
      }
      return data
    },
  }
}

export async function bytesEncoderFor(
  modality: Modality,
  options: BackendOptions,
): Promise<BytesEncoder> {
  const dim = MODALITY_DIMS[modality]
  if (options.backend === 'hash') return new HashingBytesEncoder(dim, modality)
  throw new ModelLoadError(
    'tfjs image inference needs a local decoder/model pairing; none is ' +
      'configured in this build, use --backend hash',
  )
}
