import { mkdtempSync, readFileSync, writeFileSync } from 'node:fs'
import { tmpdir } from 'node:os'
import { join } from 'node:path'
import { describe, expect, it } from 'vitest'

import { StoreFormatError, encodeHeader, readStore, writeStore } from '../src/store.js'

const dir = () => mkdtempSync(join(tmpdir(), 'nwqm-store-'))

describe('store header', () => {
  it('lays out magic, version, dtype, dim and count little-endian', () => {
    const header = encodeHeader(4, 3)
    expect(header.length).toBe(19)
    expect(header.toString('ascii', 0, 4)).toBe('NWQM')
    expect(header.readUInt16LE(4)).toBe(1)
    expect(header.readUInt8(6)).toBe(0)
    expect(header.readUInt32LE(7)).toBe(4)
    expect(Number(header.readBigUInt64LE(11))).toBe(3)
  })
})

describe('write / read round trip', () => {
  it('returns the written records in order, bit for bit', () => {
    const path = join(dir(), 'round.store')
    const records = [
      { id: '7#0', vector: Float32Array.from([0.5, -1.25, 3]) },
      { id: 'päge#π', vector: Float32Array.from([0.1, 0.2, 0.3]) },
    ]
    writeStore(path, 3, records)
    const loaded = readStore(path)
    expect(loaded.dim).toBe(3)
    expect(loaded.records.map((r) => r.id)).toEqual(['7#0', 'päge#π'])
    for (let i = 0; i < records.length; i++) {
      expect(Buffer.from(loaded.records[i].vector.buffer)).toEqual(
        Buffer.from(records[i].vector.buffer),
      )
    }
  })

  it('rejects vectors of the wrong dimension', () => {
    const path = join(dir(), 'bad.store')
    expect(() =>
      writeStore(path, 3, [{ id: 'x', vector: Float32Array.from([1, 2]) }]),
    ).toThrow(StoreFormatError)
  })

  it('rejects bad magic and truncation with diagnostics', () => {
    const path = join(dir(), 'broken.store')
    writeStore(path, 2, [{ id: 'a', vector: Float32Array.from([1, 2]) }])
    const data = readFileSync(path)
    writeFileSync(path, Buffer.concat([Buffer.from('WHAT'), data.subarray(4)]))
    expect(() => readStore(path)).toThrow(/bad magic/)
    writeFileSync(path, data.subarray(0, data.length - 3))
    expect(() => readStore(path)).toThrow(/truncated/)
  })
})
