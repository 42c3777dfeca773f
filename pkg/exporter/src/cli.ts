#!/usr/bin/env node
/**
 * export --modality <sections|sentences|images|pages> --corpus <path>
 *        --out <store> [--backend hash|tfjs] [--model-dir <dir>]
 *        [--images <dir>]
 *
 * Exit codes: 0 success, 1 usage/corpus error, 3 model load failure.
 */

import { MODALITY_DIMS, Modality, ModelLoadError } from './encoders.js'
import { ExportManifest, exportModality } from './export.js'

function usage(): string {
  return (
    'usage: nwqm-export export --modality <m> --corpus <path> --out <store>\n' +
    '       [--backend hash|tfjs] [--model-dir <dir>] [--images <dir>]\n' +
    `       modalities: ${Object.keys(MODALITY_DIMS).join(', ')}`
  )
}

export function parseArgs(argv: string[]): ExportManifest {
  if (argv[0] !== 'export') {
    throw new Error(`unknown command ${JSON.stringify(argv[0])}\n${usage()}`)
  }
  const flags = new Map<string, string>()
  for (let i = 1; i < argv.length; i += 2) {
    const key = argv[i]
    if (!key.startsWith('--') || i + 1 >= argv.length) {
      throw new Error(`bad argument ${JSON.stringify(key)}\n${usage()}`)
    }
    flags.set(key.slice(2), argv[i + 1])
  }
  const modality = flags.get('modality')
  const corpus = flags.get('corpus')
  const out = flags.get('out')
  if (!modality || !corpus || !out) {
    throw new Error(`--modality, --corpus and --out are required\n${usage()}`)
  }
  if (!(modality in MODALITY_DIMS)) {
    throw new Error(`unknown modality ${JSON.stringify(modality)}\n${usage()}`)
  }
  const backend = flags.get('backend') ?? 'tfjs'
  if (backend !== 'hash' && backend !== 'tfjs') {
    throw new Error(`unknown backend ${JSON.stringify(backend)}`)
  }
  return {
    modality: modality as Modality,
    corpus,
    out,
    backend,
    modelDir: flags.get('model-dir'),
    imagesDir: flags.get('images'),
  }
}

export async function main(argv: string[]): Promise<number> {
  let manifest: ExportManifest
  try {
    manifest = parseArgs(argv)
  } catch (err) {
    console.error(String((err as Error).message))
    return 1
  }
  try {
    const summary = await exportModality(manifest)
    console.log(
      `wrote ${summary.records} ${summary.modality} records (dim ${summary.dim}) ` +
        `from ${summary.pages} pages via ${summary.encoder}` +
        (summary.skipped_missing_images
          ? `; ${summary.skipped_missing_images} pages had no screenshot`
          : ''),
    )
    return 0
  } catch (err) {
    if (err instanceof ModelLoadError) {
      console.error(`model load failure: ${err.message}`)
      return 3
    }
    console.error(String((err as Error).message))
    return 1
  }
}

const isDirectRun = process.argv[1] && import.meta.url.endsWith(
  process.argv[1].split('/').pop() as string)
if (isDirectRun) {
  main(process.argv.slice(2)).then((code) => {
    process.exitCode = code
  })
}
