/**
 * NWQM embedding-store binary format, bit-exact with the Python reader.
 *
 * Layout (little-endian):
 *   magic   4 bytes  "NWQM"
 *   version u16      1
 *   dtype   u8       0 = float32
 *   dim     u32
 *   count   u64
 * then `count` records of [id_len u16][id UTF-8][dim * f32].
 */

import { openSync, writeSync, closeSync, readFileSync } from 'node:fs'

export const MAGIC = 'NWQM'
export const VERSION = 1
export const DTYPE_F32 = 0
const HEADER_BYTES = 4 + 2 + 1 + 4 + 8

export interface StoreRecord {
  id: string
  vector: Float32Array
}

export class StoreFormatError extends Error {}

export function encodeHeader(dim: number, count: number): Buffer {
  const header = Buffer.alloc(HEADER_BYTES)
  header.write(MAGIC, 0, 'ascii')
  header.writeUInt16LE(VERSION, 4)
  header.writeUInt8(DTYPE_F32, 6)
  header.writeUInt32LE(dim, 7)
  header.writeBigUInt64LE(BigInt(count), 11)
  return header
}

export function encodeRecord(id: string, vector: Float32Array, dim: number): Buffer {
  if (vector.length !== dim) {
    throw new StoreFormatError(
      `vector for id ${JSON.stringify(id)} has length ${vector.length}, expected ${dim}`,
    )
  }
  const idBytes = Buffer.from(id, 'utf-8')
  if (idBytes.length > 0xffff) throw new StoreFormatError(`id too long: ${id}`)
  const out = Buffer.alloc(2 + idBytes.length + 4 * dim)
  out.writeUInt16LE(idBytes.length, 0)
  idBytes.copy(out, 2)
  for (let i = 0; i < dim; i++) {
    out.writeFloatLE(vector[i], 2 + idBytes.length + 4 * i)
  }
  return out
}

export function writeStore(path: string, dim: number, records: StoreRecord[]): number {
  const fd = openSync(path, 'w')
  try {
    writeSync(fd, encodeHeader(dim, records.length))
    for (const record of records) {
      writeSync(fd, encodeRecord(record.id, record.vector, dim))
    }
  } finally {
    closeSync(fd)
  }
  return records.length
}

export interface LoadedStore {
  dim: number
  records: StoreRecord[]
}

export function readStore(path: string): LoadedStore {
  const data = readFileSync(path)
  if (data.length < HEADER_BYTES) {
    throw new StoreFormatError(`${path}: truncated header (${data.length} bytes)`)
  }
  if (data.toString('ascii', 0, 4) !== MAGIC) {
    throw new StoreFormatError(`${path}: bad magic ${JSON.stringify(data.toString('ascii', 0, 4))}`)
  }
  const version = data.readUInt16LE(4)
  if (version !== VERSION) throw new StoreFormatError(`${path}: unsupported version ${version}`)
  const dtype = data.readUInt8(6)
  if (dtype !== DTYPE_F32) throw new StoreFormatError(`${path}: unsupported dtype ${dtype}`)
  const dim = data.readUInt32LE(7)
  const count = Number(data.readBigUInt64LE(11))
  if (dim === 0) throw new StoreFormatError(`${path}: dim 0 marks a checkpoint, not an embedding store`)
  const records: StoreRecord[] = []
  let offset = HEADER_BYTES
  for (let i = 0; i < count; i++) {
    if (offset + 2 > data.length) {
      throw new StoreFormatError(`${path}: truncated at record ${i} id length`)
    }
    const idLen = data.readUInt16LE(offset)
    offset += 2
    if (offset + idLen + 4 * dim > data.length) {
      throw new StoreFormatError(`${path}: truncated at record ${i} payload`)
    }
    const id = data.toString('utf-8', offset, offset + idLen)
    offset += idLen
    const vector = new Float32Array(dim)
    for (let j = 0; j < dim; j++) {
      vector[j] = data.readFloatLE(offset + 4 * j)
    }
    offset += 4 * dim
    records.push({ id, vector })
  }
  if (offset !== data.length) {
    throw new StoreFormatError(`${path}: ${data.length - offset} trailing bytes after ${count} records`)
  }
  return { dim, records }
}
