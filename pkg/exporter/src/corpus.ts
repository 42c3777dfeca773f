/**
 * Reading the preprocessed corpus records the quality-assessment pipeline
 * emits (line-delimited JSON) and the encoder token budget.
 */

import { existsSync, readFileSync, statSync } from 'node:fs'
import { join } from 'node:path'

export interface PreprocessedSection {
  heading: string
  level: number
  tokens: string[]
}

export interface PreprocessedRecord {
  page_id: number
  title?: string
  label?: string | null
  sections: PreprocessedSection[]
  pad_count?: number
  page_tokens: string[]
  talk_sentences: string[]
}

export const BUDGET_HEAD = 128
export const BUDGET_TAIL = 384

/** First 128 plus last 384 tokens when over budget, otherwise unchanged. */
export function applyTokenBudget(
  tokens: string[],
  head: number = BUDGET_HEAD,
  tail: number = BUDGET_TAIL,
): string[] {
  if (tokens.length <= head + tail) return tokens.slice()
  return tokens.slice(0, head).concat(tokens.slice(tokens.length - tail))
}

export function readRecords(path: string): PreprocessedRecord[] {
  const records: PreprocessedRecord[] = []
  for (const line of readFileSync(path, 'utf-8').split('\n')) {
    const trimmed = line.trim()
    if (trimmed) records.push(JSON.parse(trimmed) as PreprocessedRecord)
  }
  return records
}

/**
 * A corpus path is either one .jsonl file or a directory holding
 * train/validation/test.jsonl; records come back in split order.
 */
export function readCorpus(path: string): PreprocessedRecord[] {
  if (!existsSync(path)) {
    throw new Error(`corpus path does not exist: ${path}`)
  }
  if (statSync(path).isFile()) return readRecords(path)
  const records: PreprocessedRecord[] = []
  let found = 0
  for (const split of ['train', 'validation', 'test']) {
    const splitPath = join(path, `${split}.jsonl`)
    if (existsSync(splitPath)) {
      records.push(...readRecords(splitPath))
      found += 1
    }
  }
  if (found === 0) {
    throw new Error(`no train/validation/test.jsonl under corpus directory ${path}`)
  }
  return records
}
