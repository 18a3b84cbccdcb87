/**
 * Checkpoint conversion: read a HuggingFace-style encoder checkpoint
 * directory (config.json + model.safetensors), map tensor names through the
 * family's data table, transpose projection matrices into the container's
 * input-by-output convention, and write the container plus an export
 * manifest with the container hash.
 */

import * as fs from 'node:fs';
import * as path from 'node:path';

import { containerHash, writeContainer, type ContainerConfig, type NamedTensor } from './container.js';
import {
  UnmappableArchitectureError,
  classifyActivation,
  detectConfig,
  expectedShape,
  instantiate,
  tableForModelType,
  type DetectedConfig,
  type GeluVariant,
  type TensorRule,
} from './mapping.js';
import { SafetensorsFile } from './safetensors.js';

export interface MappedTensorRecord {
  source: string;
  target: string;
  transposed: boolean;
}

export interface ExportManifest {
  source: string;
  family: string;
  config: ContainerConfig;
  activation_variant: GeluVariant;
  tanh_warning: boolean;
  tensors: MappedTensorRecord[];
  container_hash: string;
}

export class ShapeInconsistencyError extends Error {}

export function exportCheckpoint(sourceDir: string, outDir: string): ExportManifest {
  const configPath = path.join(sourceDir, 'config.json');
  if (!fs.existsSync(configPath)) {
    throw new Error(`no config.json under ${sourceDir}`);
  }
  const rawConfig = JSON.parse(fs.readFileSync(configPath, 'utf-8')) as Record<string, unknown>;
  const modelType = typeof rawConfig.model_type === 'string' ? rawConfig.model_type : '';
  const table = tableForModelType(modelType);
  const detected = detectConfig(table, rawConfig);
  if (detected.hidden % detected.heads !== 0) {
    throw new ShapeInconsistencyError(
      `hidden size ${detected.hidden} is not divisible by ${detected.heads} heads`,
    );
  }
  const variant = classifyActivation(table, detected.activation);

  const weights = openWeights(sourceDir);
  const tensors: NamedTensor[] = [];
  const records: MappedTensorRecord[] = [];

  const resolve = (rule: TensorRule): string | null => {
    const candidates = [rule.source, ...table.strip_prefixes.map((p) => p + rule.source)];
    for (const name of candidates) {
      if (weights.has(name)) return name;
    }
    return null;
  };

  const emit = (rule: TensorRule): void => {
    const sourceName = resolve(rule);
    if (sourceName === null) {
      if (rule.optional) return;
      throw new UnmappableArchitectureError(`checkpoint is missing tensor ${rule.source}`);
    }
    const want = expectedShape(rule, detected);
    const { shape, data } = weights.read(sourceName);
    if (shape.length !== want.length
        || shape.some((dim, axis) => want[axis] !== null && want[axis] !== dim)) {
      throw new ShapeInconsistencyError(
        `${sourceName}: shape [${shape}] does not match expected [${want}]`,
      );
    }
    if (rule.transpose) {
      tensors.push({ name: rule.target, shape: [shape[1], shape[0]], data: transpose(data, shape[0], shape[1]) });
    } else {
      tensors.push({ name: rule.target, shape, data });
    }
    records.push({ source: sourceName, target: rule.target, transposed: Boolean(rule.transpose) });
  };

  for (const rule of table.embeddings) emit(rule);
  for (let layer = 0; layer < detected.layers; layer++) {
    for (const rule of table.layer_tensors) emit(instantiate(rule, layer));
  }

  const config: ContainerConfig = {
    num_layers: detected.layers,
    hidden_dim: detected.hidden,
    num_filters: detected.filters,
    num_heads: detected.heads,
    vocab_size: detected.vocab,
    max_seq_len: detected.maxPositions,
    activation: 'gelu_exact',
  };
  // canonical container order: embeddings first, then per-layer blocks
  const order = new Map(containerOrder(detected, tensors).map((name, i) => [name, i]));
  tensors.sort((a, b) => order.get(a.name)! - order.get(b.name)!);
  writeContainer(outDir, config, tensors);

  const manifest: ExportManifest = {
    source: path.resolve(sourceDir),
    family: table.family,
    config,
    activation_variant: variant,
    tanh_warning: variant === 'gelu_tanh',
    tensors: records,
    container_hash: containerHash(outDir),
  };
  fs.writeFileSync(
    path.join(outDir, 'export_manifest.json'),
    JSON.stringify(manifest, null, 2) + '\n',
  );
  return manifest;
}

function openWeights(sourceDir: string): SafetensorsFile {
  const single = path.join(sourceDir, 'model.safetensors');
  if (fs.existsSync(single)) return SafetensorsFile.open(single);
  if (fs.existsSync(path.join(sourceDir, 'model.safetensors.index.json'))) {
    throw new Error('sharded safetensors checkpoints are not supported');
  }
  if (fs.existsSync(path.join(sourceDir, 'pytorch_model.bin'))) {
    throw new Error('pickle checkpoints are not supported; convert to safetensors first');
  }
  throw new Error(`no model.safetensors under ${sourceDir}`);
}

function transpose(data: Float32Array, rows: number, cols: number): Float32Array {
  const out = new Float32Array(data.length);
  for (let r = 0; r < rows; r++) {
    const base = r * cols;
    for (let c = 0; c < cols; c++) {
      out[c * rows + r] = data[base + c];
    }
  }
  return out;
}

const LAYER_ORDER = [
  'w1', 'b1', 'w2', 'b2',
  'wq', 'bq', 'wk', 'bk', 'wv', 'bv', 'wo', 'bo',
  'ln1_gain', 'ln1_bias', 'ln2_gain', 'ln2_bias',
];

function containerOrder(detected: DetectedConfig, tensors: NamedTensor[]): string[] {
  const names = ['embed.token', 'embed.position', 'embed.ln_gain', 'embed.ln_bias'];
  if (tensors.some((t) => t.name === 'embed.segment')) names.push('embed.segment');
  for (let layer = 0; layer < detected.layers; layer++) {
    for (const suffix of LAYER_ORDER) names.push(`layer.${layer}.${suffix}`);
  }
  return names;
}
