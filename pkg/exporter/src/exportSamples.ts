/**
 * Corpus conversion: take the first N non-empty lines of a text file,
 * tokenize them with the checkpoint's WordPiece vocabulary, truncate to the
 * requested width, and emit a token-batch file. No labels ever enter the
 * output: only token ids and real-token lengths.
 */

import * as fs from 'node:fs';

import { WordPieceTokenizer } from './tokenizer.js';
import { writeTokenBatch, type TokenBatchHeader } from './tokenBatch.js';

export interface ExportSamplesOptions {
  num?: number;
  seqLen?: number;
  /** expected model vocabulary; mismatch with the tokenizer is an error */
  expectVocabSize?: number;
}

export interface SamplesResult {
  header: TokenBatchHeader;
  numExamples: number;
  vocabSize: number;
}

export const DEFAULT_NUM_SAMPLES = 2000;
export const DEFAULT_SEQ_LEN = 128;

export function exportSamples(
  corpusPath: string,
  tokenizerDir: string,
  outPath: string,
  options: ExportSamplesOptions = {},
): SamplesResult {
  const num = options.num ?? DEFAULT_NUM_SAMPLES;
  const seqLen = options.seqLen ?? DEFAULT_SEQ_LEN;
  if (num < 1) throw new Error('--num must be at least 1');

  const tokenizer = WordPieceTokenizer.fromPretrained(tokenizerDir);
  if (options.expectVocabSize !== undefined
      && options.expectVocabSize !== tokenizer.vocabSize) {
    throw new Error(
      `tokenizer has ${tokenizer.vocabSize} entries but the model expects `
      + `${options.expectVocabSize}`,
    );
  }

  const lines = fs.readFileSync(corpusPath, 'utf-8')
    .split('\n')
    .map((line) => line.trim())
    .filter((line) => line.length > 0);
  if (lines.length === 0) throw new Error(`corpus ${corpusPath} holds no examples`);

  const sequences = lines.slice(0, num).map((line) => tokenizer.encode(line, seqLen).ids);
  const header = writeTokenBatch(outPath, sequences, {
    seqLen,
    vocabSize: tokenizer.vocabSize,
  });
  return { header, numExamples: sequences.length, vocabSize: tokenizer.vocabSize };
}
