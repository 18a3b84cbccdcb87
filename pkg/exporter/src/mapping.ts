/**
 * Data-driven tensor-name mapping. Each supported checkpoint family is one
 * JSON table under mappings/: config-key aliases, embedding entries, and a
 * per-layer template block with {i} placeholders and transpose flags. New
 * families are new data files, not code.
 */

import * as fs from 'node:fs';
import { fileURLToPath } from 'node:url';

export interface TensorRule {
  source: string;
  target: string;
  shape: string[];
  transpose?: boolean;
  optional?: boolean;
}

export interface MappingTable {
  family: string;
  model_types: string[];
  strip_prefixes: string[];
  config_keys: Record<string, string>;
  embeddings: TensorRule[];
  layer_tensors: TensorRule[];
  exact_gelu: string[];
  tanh_gelu: string[];
}

export interface DetectedConfig {
  layers: number;
  hidden: number;
  filters: number;
  heads: number;
  vocab: number;
  maxPositions: number;
  activation: string;
}

const FAMILY_FILES = ['bert.json', 'distilbert.json'];

export function loadMappingTables(): MappingTable[] {
  return FAMILY_FILES.map((name) => {
    const url = new URL(`./mappings/${name}`, import.meta.url);
    return JSON.parse(fs.readFileSync(fileURLToPath(url), 'utf-8')) as MappingTable;
  });
}

export class UnmappableArchitectureError extends Error {}

export function tableForModelType(modelType: string): MappingTable {
  for (const table of loadMappingTables()) {
    if (table.model_types.includes(modelType)) return table;
  }
  throw new UnmappableArchitectureError(
    `model_type ${JSON.stringify(modelType)} is not a supported encoder family`,
  );
}

export function detectConfig(table: MappingTable, raw: Record<string, unknown>): DetectedConfig {
  const read = (key: string): number => {
    const value = raw[table.config_keys[key]];
    if (typeof value !== 'number' || !Number.isInteger(value) || value < 1) {
      throw new UnmappableArchitectureError(
        `config field ${table.config_keys[key]} is missing or invalid`,
      );
    }
    return value;
  };
  const activation = raw[table.config_keys.activation];
  return {
    layers: read('layers'),
    hidden: read('hidden'),
    filters: read('filters'),
    heads: read('heads'),
    vocab: read('vocab'),
    maxPositions: read('max_positions'),
    activation: typeof activation === 'string' ? activation : 'gelu',
  };
}

/** Resolve a rule's symbolic shape against the detected dimensions. */
export function expectedShape(rule: TensorRule, config: DetectedConfig): Array<number | null> {
  const dims: Record<string, number> = {
    vocab: config.vocab,
    hidden: config.hidden,
    filters: config.filters,
    max_positions: config.maxPositions,
  };
  return rule.shape.map((symbol) => (symbol === '*' ? null : dims[symbol]));
}

export function instantiate(rule: TensorRule, layer: number): TensorRule {
  return {
    ...rule,
    source: rule.source.replaceAll('{i}', String(layer)),
    target: rule.target.replaceAll('{i}', String(layer)),
  };
}

export type GeluVariant = 'gelu_exact' | 'gelu_tanh';

export function classifyActivation(table: MappingTable, activation: string): GeluVariant {
  if (table.exact_gelu.includes(activation)) return 'gelu_exact';
  if (table.tanh_gelu.includes(activation)) return 'gelu_tanh';
  throw new UnmappableArchitectureError(
    `activation ${JSON.stringify(activation)} is not a GELU variant`,
  );
}
