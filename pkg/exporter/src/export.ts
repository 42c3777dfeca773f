/**
 * Export orchestration: read the preprocessed corpus, encode one modality,
 * write the embedding store plus a sidecar metadata file.
 *
 * Key scheme (shared with the training pipeline):
 *   sections   pageid#sectionindex
 *   sentences  pageid#sentindex      (empty talk pages emit nothing)
 *   images     pageid                (absent screenshots emit nothing)
 *   pages      pageid
 */

import { existsSync, readFileSync, statSync, writeFileSync } from 'node:fs'
import { join } from 'node:path'

import { applyTokenBudget, readCorpus } from './corpus.js'
import {
  BackendOptions,
  MODALITY_DIMS,
  Modality,
  bytesEncoderFor,
  tokenEncoderFor,
} from './encoders.js'
import { StoreRecord, writeStore } from './store.js'

export interface ExportManifest {
  modality: Modality
  corpus: string
  out: string
  backend: 'hash' | 'tfjs'
  modelDir?: string
  imagesDir?: string
  batchSize?: number
}

export interface ExportSummary {
  modality: Modality
  dim: number
  records: number
  pages: number
  skipped_missing_images: number
  encoder: string
}

const IMAGE_EXTENSIONS = ['.png', '.jpg', '.jpeg']

function findScreenshot(imagesDir: string, pageId: number): string | null {
  for (const ext of IMAGE_EXTENSIONS) {
    const candidate = join(imagesDir, `${pageId}${ext}`)
    if (existsSync(candidate)) return candidate
  }
  return null
}

export async function exportModality(manifest: ExportManifest): Promise<ExportSummary> {
  const options: BackendOptions = {
    backend: manifest.backend,
    modelDir: manifest.modelDir,
  }
  const dim = MODALITY_DIMS[manifest.modality]
  const records: StoreRecord[] = []
  let skippedImages = 0
  let pages = 0

  if (manifest.modality === 'images') {
    if (!manifest.imagesDir) {
      throw new Error('exporting images needs --images <dir> of <pageid>.png screenshots')
    }
    if (!existsSync(manifest.imagesDir) || !statSync(manifest.imagesDir).isDirectory()) {
      throw new Error(`not a directory: ${manifest.imagesDir}`)
    }
    const encoder = await bytesEncoderFor('images', options)
    const corpus = readCorpus(manifest.corpus)
    for (const record of corpus) {
      pages += 1
      const shot = findScreenshot(manifest.imagesDir, record.page_id)
      if (shot === null) {
        skippedImages += 1 // the training side substitutes a flagged zero vector
        continue
      }
      records.push({ id: String(record.page_id), vector: encoder.encodeBytes(readFileSync(shot)) })
    }
    writeStore(manifest.out, dim, records)
    const summary: ExportSummary = {
      modality: manifest.modality,
      dim,
      records: records.length,
      pages,
      skipped_missing_images: skippedImages,
      encoder: encoder.name,
    }
    writeSidecar(manifest, summary)
    return summary
  }

  const encoder = await tokenEncoderFor(manifest.modality, options)
  const corpus = readCorpus(manifest.corpus)
  for (const record of corpus) {
    pages += 1
    if (manifest.modality === 'sections') {
      record.sections.forEach((section, index) => {
        const tokens = applyTokenBudget(section.tokens)
        records.push({
          id: `${record.page_id}#${index}`,
          vector: encoder.encodeTokens(tokens),
        })
      })
    } else if (manifest.modality === 'sentences') {
      record.talk_sentences.forEach((sentence, index) => {
        const tokens = applyTokenBudget(sentence.split(/\s+/).filter(Boolean))
        records.push({
          id: `${record.page_id}#${index}`,
          vector: encoder.encodeTokens(tokens),
        })
      })
    } else {
      records.push({
        id: String(record.page_id),
        vector: encoder.encodeTokens(applyTokenBudget(record.page_tokens)),
      })
    }
  }
  writeStore(manifest.out, dim, records)
  const summary: ExportSummary = {
    modality: manifest.modality,
    dim,
    records: records.length,
    pages,
    skipped_missing_images: 0,
    encoder: encoder.name,
  }
  writeSidecar(manifest, summary)
  return summary
}

function writeSidecar(manifest: ExportManifest, summary: ExportSummary): void {
  const meta = {
    ...summary,
    backend: manifest.backend,
    model_dir: manifest.modelDir ?? null,
    images_dir: manifest.imagesDir ?? null,
    token_budget: { head: 128, tail: 384 },
    image_resize: manifest.modality === 'images' ? [299, 299] : null,
  }
  writeFileSync(`${manifest.out}.meta.json`, JSON.stringify(meta, null, 2) + '\n')
}
