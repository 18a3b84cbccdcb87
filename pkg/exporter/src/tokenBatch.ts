/**
 * Token-batch file writer: one JSON header line, then the concatenated
 * token ids as little-endian uint32. Only real tokens are stored; padded
 * width and vocabulary size are recorded in the header.
 */

import * as fs from 'node:fs';

export interface TokenBatchHeader {
  format_version: number;
  num_sequences: number;
  lengths: number[];
  seq_len?: number;
  vocab_size?: number;
}

export function writeTokenBatch(
  outPath: string,
  sequences: number[][],
  options: { seqLen?: number; vocabSize?: number } = {},
): TokenBatchHeader {
  if (sequences.length === 0) throw new Error('token batch is empty');
  for (const [index, seq] of sequences.entries()) {
    if (seq.length === 0) throw new Error(`sequence ${index} holds no tokens`);
    if (options.vocabSize !== undefined) {
      for (const id of seq) {
        if (id < 0 || id >= options.vocabSize) {
          throw new Error(`sequence ${index} holds token id ${id} outside the vocabulary`);
        }
      }
    }
  }
  const header: TokenBatchHeader = {
    format_version: 1,
    num_sequences: sequences.length,
    lengths: sequences.map((s) => s.length),
  };
  if (options.seqLen !== undefined) header.seq_len = options.seqLen;
  if (options.vocabSize !== undefined) header.vocab_size = options.vocabSize;

  const total = header.lengths.reduce((a, b) => a + b, 0);
  const payload = Buffer.alloc(4 * total);
  let cursor = 0;
  for (const seq of sequences) {
    for (const id of seq) {
      payload.writeUInt32LE(id >>> 0, cursor);
      cursor += 4;
    }
  }
  const headerLine = Buffer.from(JSON.stringify(header) + '\n', 'utf-8');
  fs.writeFileSync(outPath, Buffer.concat([headerLine, payload]));
  return header;
}
