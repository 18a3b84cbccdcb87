/**
 * Writer for the model container consumed by the pruning toolkit: a
 * directory with manifest.json and weights.bin, every tensor float32
 * little-endian and 64-byte aligned. Mirrors the format documented in the
 * toolkit README; the Python side validates everything on read.
 */

import * as crypto from 'node:crypto';
import * as fs from 'node:fs';
import * as path from 'node:path';

export const FORMAT_VERSION = 1;
export const ALIGNMENT = 64;

export interface ContainerConfig {
  num_layers: number;
  hidden_dim: number;
  num_filters: number;
  num_heads: number;
  vocab_size: number;
  max_seq_len: number;
  activation: string;
}

export interface NamedTensor {
  name: string;
  shape: number[];
  data: Float32Array;
}

export function writeContainer(
  outDir: string,
  config: ContainerConfig,
  tensors: NamedTensor[],
): void {
  fs.mkdirSync(outDir, { recursive: true });
  const entries: Array<Record<string, unknown>> = [];
  const chunks: Buffer[] = [];
  let offset = 0;
  for (const { name, shape, data } of tensors) {
    const count = shape.reduce((a, b) => a * b, 1);
    if (count !== data.length) {
      throw new Error(`tensor ${name}: shape ${JSON.stringify(shape)} does not match ${data.length} values`);
    }
    for (let i = 0; i < data.length; i++) {
      if (!Number.isFinite(data[i])) {
        throw new Error(`tensor ${name} contains non-finite values`);
      }
    }
    const pad = (ALIGNMENT - (offset % ALIGNMENT)) % ALIGNMENT;
    if (pad > 0) {
      chunks.push(Buffer.alloc(pad));
      offset += pad;
    }
    const bytes = Buffer.from(data.buffer, data.byteOffset, data.byteLength);
    entries.push({ name, dtype: 'f32', shape, offset, length: bytes.length });
    chunks.push(bytes);
    offset += bytes.length;
  }
  const manifest = { format_version: FORMAT_VERSION, config, tensors: entries };
  fs.writeFileSync(path.join(outDir, 'manifest.json'), JSON.stringify(manifest, null, 2) + '\n');
  fs.writeFileSync(path.join(outDir, 'weights.bin'), Buffer.concat(chunks));
}

/** sha256 over manifest.json then weights.bin, hex-encoded. */
export function containerHash(dir: string): string {
  const hash = crypto.createHash('sha256');
  hash.update(fs.readFileSync(path.join(dir, 'manifest.json')));
  hash.update(fs.readFileSync(path.join(dir, 'weights.bin')));
  return hash.digest('hex');
}
