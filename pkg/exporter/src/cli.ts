#!/usr/bin/env node
/**
 * kcm-export export-checkpoint <checkpoint_dir> <out_dir>
 * kcm-export export-samples <corpus.txt> <tokenizer_dir> <out_file>
 *                           [--num 2000] [--seq-len 128] [--vocab-size N]
 */

import { parseArgs } from 'node:util';

import { exportCheckpoint } from './exportCheckpoint.js';
import { DEFAULT_NUM_SAMPLES, DEFAULT_SEQ_LEN, exportSamples } from './exportSamples.js';

const USAGE = `usage:
  kcm-export export-checkpoint <checkpoint_dir> <out_dir>
  kcm-export export-samples <corpus.txt> <tokenizer_dir> <out_file>
                            [--num N] [--seq-len W] [--vocab-size V]`;

function main(argv: string[]): number {
  const [command, ...rest] = argv;
  if (command === 'export-checkpoint') {
    const { positionals } = parseArgs({ args: rest, allowPositionals: true, options: {} });
    if (positionals.length !== 2) {
      console.error(USAGE);
      return 2;
    }
    const manifest = exportCheckpoint(positionals[0], positionals[1]);
    console.log(`container: ${positionals[1]}`);
    console.log(`family: ${manifest.family}, layers: ${manifest.config.num_layers}, `
      + `hidden: ${manifest.config.hidden_dim}, filters: ${manifest.config.num_filters}`);
    if (manifest.tanh_warning) {
      console.warn('warning: checkpoint was trained with the tanh GELU '
        + 'approximation; the engine evaluates the exact form');
    }
    console.log(`container hash: ${manifest.container_hash}`);
    return 0;
  }
  if (command === 'export-samples') {
    const { positionals, values } = parseArgs({
      args: rest,
      allowPositionals: true,
      options: {
        num: { type: 'string' },
        'seq-len': { type: 'string' },
        'vocab-size': { type: 'string' },
      },
    });
    if (positionals.length !== 3) {
      console.error(USAGE);
      return 2;
    }
    const result = exportSamples(positionals[0], positionals[1], positionals[2], {
      num: values.num ? Number(values.num) : DEFAULT_NUM_SAMPLES,
      seqLen: values['seq-len'] ? Number(values['seq-len']) : DEFAULT_SEQ_LEN,
      expectVocabSize: values['vocab-size'] ? Number(values['vocab-size']) : undefined,
    });
    console.log(`samples: ${positionals[2]} (${result.numExamples} sequences, `
      + `vocab ${result.vocabSize})`);
    return 0;
  }
  console.error(USAGE);
  return 2;
}

try {
  process.exit(main(process.argv.slice(2)));
} catch (error) {
  console.error(`error: ${(error as Error).message}`);
  process.exit(1);
}
