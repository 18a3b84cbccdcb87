/** Test-side reader for the container format: independent of the writer. */

import * as fs from 'node:fs';
import * as path from 'node:path';

export interface ReadTensor {
  shape: number[];
  data: Float32Array;
}

export interface ReadContainer {
  manifest: any;
  tensors: Map<string, ReadTensor>;
}

export function readContainer(dir: string): ReadContainer {
  const manifest = JSON.parse(fs.readFileSync(path.join(dir, 'manifest.json'), 'utf-8'));
  const blob = fs.readFileSync(path.join(dir, 'weights.bin'));
  const tensors = new Map<string, ReadTensor>();
  for (const entry of manifest.tensors) {
    const count = entry.shape.reduce((a: number, b: number) => a * b, 1);
    if (entry.length !== 4 * count) {
      throw new Error(`${entry.name}: bad length ${entry.length}`);
    }
    const copy = new Uint8Array(entry.length);
    copy.set(blob.subarray(entry.offset, entry.offset + entry.length));
    tensors.set(entry.name, {
      shape: entry.shape,
      data: new Float32Array(copy.buffer, 0, count),
    });
  }
  return { manifest, tensors };
}
