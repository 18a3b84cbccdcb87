/**
 * Synthetic checkpoint fixtures: seeded random weights written in the
 * HuggingFace directory layout (config.json + model.safetensors + vocab.txt)
 * so the exporter can be exercised without network access.
 */

import * as fs from 'node:fs';
import * as path from 'node:path';

import { buildSafetensors } from '../src/safetensors.js';

export function mulberry32(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x6d2b79f5) >>> 0;
    let t = state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function randomTensor(rand: () => number, shape: number[], scale = 0.05, loc = 0): [number[], Float32Array] {
  const count = shape.reduce((a, b) => a * b, 1);
  const data = new Float32Array(count);
  for (let i = 0; i < count; i++) data[i] = loc + scale * (2 * rand() - 1);
  return [shape, data];
}

export interface FixtureDims {
  layers: number;
  hidden: number;
  filters: number;
  heads: number;
  vocab: number;
  maxPositions: number;
}

export interface FixtureOptions {
  seed?: number;
  activation?: string;
  modelType?: string;
  prefix?: string;
  withSegment?: boolean;
  omit?: string[];
  shapeOverrides?: Record<string, number[]>;
}

const BASE_WORDS = [
  'the', 'quick', 'brown', 'fox', 'jump', '##s', '##ed', 'over', 'lazy',
  'dog', 'un', '##able', 'hello', 'world', 'prune', 'filter', 'model',
  '!', ',', '.', '?',
];

export function writeVocab(dir: string, size: number): void {
  const tokens = ['[PAD]', '[UNK]', '[CLS]', '[SEP]', '[MASK]', ...BASE_WORDS];
  for (let i = tokens.length; i < size; i++) tokens.push(`tok${i}`);
  fs.writeFileSync(path.join(dir, 'vocab.txt'), tokens.slice(0, size).join('\n') + '\n');
  fs.writeFileSync(
    path.join(dir, 'tokenizer_config.json'),
    JSON.stringify({ do_lower_case: true }) + '\n',
  );
}

export function makeBertCheckpoint(dir: string, dims: FixtureDims,
                                   options: FixtureOptions = {}): void {
  const {
    seed = 1, activation = 'gelu', modelType = 'bert', prefix = '',
    withSegment = true, omit = [], shapeOverrides = {},
  } = options;
  fs.mkdirSync(dir, { recursive: true });
  const rand = mulberry32(seed);
  const { layers, hidden, filters, heads, vocab, maxPositions } = dims;

  const tensors: Array<[string, number[], Float32Array]> = [];
  const push = (name: string, shape: number[], scale = 0.05, loc = 0) => {
    if (omit.includes(name)) return;
    const finalShape = shapeOverrides[name] ?? shape;
    const [s, data] = randomTensor(rand, finalShape, scale, loc);
    tensors.push([prefix + name, s, data]);
  };

  push('embeddings.word_embeddings.weight', [vocab, hidden]);
  push('embeddings.position_embeddings.weight', [maxPositions, hidden]);
  if (withSegment) push('embeddings.token_type_embeddings.weight', [2, hidden]);
  push('embeddings.LayerNorm.weight', [hidden], 0.01, 1.0);
  push('embeddings.LayerNorm.bias', [hidden], 0.01);
  for (let i = 0; i < layers; i++) {
    const base = `encoder.layer.${i}.`;
    for (const proj of ['query', 'key', 'value']) {
      push(`${base}attention.self.${proj}.weight`, [hidden, hidden]);
      push(`${base}attention.self.${proj}.bias`, [hidden], 0.01);
    }
    push(`${base}attention.output.dense.weight`, [hidden, hidden]);
    push(`${base}attention.output.dense.bias`, [hidden], 0.01);
    push(`${base}attention.output.LayerNorm.weight`, [hidden], 0.01, 1.0);
    push(`${base}attention.output.LayerNorm.bias`, [hidden], 0.01);
    push(`${base}intermediate.dense.weight`, [filters, hidden]);
    push(`${base}intermediate.dense.bias`, [filters], 0.01);
    push(`${base}output.dense.weight`, [hidden, filters]);
    push(`${base}output.dense.bias`, [hidden], 0.01);
    push(`${base}output.LayerNorm.weight`, [hidden], 0.01, 1.0);
    push(`${base}output.LayerNorm.bias`, [hidden], 0.01);
  }

  fs.writeFileSync(path.join(dir, 'model.safetensors'), buildSafetensors(tensors));
  fs.writeFileSync(path.join(dir, 'config.json'), JSON.stringify({
    model_type: modelType,
    num_hidden_layers: layers,
    hidden_size: hidden,
    intermediate_size: filters,
    num_attention_heads: heads,
    vocab_size: vocab,
    max_position_embeddings: maxPositions,
    hidden_act: activation,
  }, null, 2) + '\n');
  writeVocab(dir, vocab);
}

export function makeDistilCheckpoint(dir: string, dims: FixtureDims,
                                     options: FixtureOptions = {}): void {
  const { seed = 2, activation = 'gelu' } = options;
  fs.mkdirSync(dir, { recursive: true });
  const rand = mulberry32(seed);
  const { layers, hidden, filters, heads, vocab, maxPositions } = dims;

  const tensors: Array<[string, number[], Float32Array]> = [];
  const push = (name: string, shape: number[], scale = 0.05, loc = 0) => {
    const [s, data] = randomTensor(rand, shape, scale, loc);
    tensors.push([name, s, data]);
  };

  push('embeddings.word_embeddings.weight', [vocab, hidden]);
  push('embeddings.position_embeddings.weight', [maxPositions, hidden]);
  push('embeddings.LayerNorm.weight', [hidden], 0.01, 1.0);
  push('embeddings.LayerNorm.bias', [hidden], 0.01);
  for (let i = 0; i < layers; i++) {
    const base = `transformer.layer.${i}.`;
    for (const proj of ['q_lin', 'k_lin', 'v_lin', 'out_lin']) {
      push(`${base}attention.${proj}.weight`, [hidden, hidden]);
      push(`${base}attention.${proj}.bias`, [hidden], 0.01);
    }
    push(`${base}sa_layer_norm.weight`, [hidden], 0.01, 1.0);
    push(`${base}sa_layer_norm.bias`, [hidden], 0.01);
    push(`${base}ffn.lin1.weight`, [filters, hidden]);
    push(`${base}ffn.lin1.bias`, [filters], 0.01);
    push(`${base}ffn.lin2.weight`, [hidden, filters]);
    push(`${base}ffn.lin2.bias`, [hidden], 0.01);
    push(`${base}output_layer_norm.weight`, [hidden], 0.01, 1.0);
    push(`${base}output_layer_norm.bias`, [hidden], 0.01);
  }

  fs.writeFileSync(path.join(dir, 'model.safetensors'), buildSafetensors(tensors));
  fs.writeFileSync(path.join(dir, 'config.json'), JSON.stringify({
    model_type: 'distilbert',
    n_layers: layers,
    dim: hidden,
    hidden_dim: filters,
    n_heads: heads,
    vocab_size: vocab,
    max_position_embeddings: maxPositions,
    activation,
  }, null, 2) + '\n');
  writeVocab(dir, vocab);
}

export const SMALL_DIMS: FixtureDims = {
  layers: 2, hidden: 8, filters: 16, heads: 2, vocab: 64, maxPositions: 32,
};
