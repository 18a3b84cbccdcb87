/**
 * Minimal safetensors reader: little-endian u64 header length, JSON header
 * mapping tensor names to { dtype, shape, data_offsets }, raw byte buffer.
 * F16 and BF16 payloads are widened to float32 on load.
 */

import * as fs from 'node:fs';

export interface TensorEntry {
  dtype: string;
  shape: number[];
  dataOffsets: [number, number];
}

export class SafetensorsFile {
  private entries = new Map<string, TensorEntry>();

  private constructor(private buffer: Buffer, private dataStart: number) {}

  static open(path: string): SafetensorsFile {
    const buffer = fs.readFileSync(path);
    if (buffer.length < 8) {
      throw new Error(`safetensors file too short: ${path}`);
    }
    const headerLength = Number(buffer.readBigUInt64LE(0));
    if (headerLength <= 0 || 8 + headerLength > buffer.length) {
      throw new Error(`safetensors header length ${headerLength} is out of range`);
    }
    const headerText = buffer.subarray(8, 8 + headerLength).toString('utf-8');
    let header: Record<string, unknown>;
    try {
      header = JSON.parse(headerText);
    } catch (error) {
      throw new Error(`malformed safetensors header: ${(error as Error).message}`);
    }
    const file = new SafetensorsFile(buffer, 8 + headerLength);
    for (const [name, raw] of Object.entries(header)) {
      if (name === '__metadata__') continue;
      const entry = raw as { dtype: string; shape: number[]; data_offsets: [number, number] };
      file.entries.set(name, {
        dtype: entry.dtype,
        shape: entry.shape,
        dataOffsets: entry.data_offsets,
      });
    }
    return file;
  }

  names(): string[] {
    return [...this.entries.keys()];
  }

  has(name: string): boolean {
    return this.entries.has(name);
  }

  shapeOf(name: string): number[] {
    const entry = this.entries.get(name);
    if (!entry) throw new Error(`tensor ${name} not present in checkpoint`);
    return entry.shape;
  }

  /** Tensor payload as float32, regardless of on-disk precision. */
  read(name: string): { shape: number[]; data: Float32Array } {
    const entry = this.entries.get(name);
    if (!entry) throw new Error(`tensor ${name} not present in checkpoint`);
    const [begin, end] = entry.dataOffsets;
    const bytes = this.buffer.subarray(this.dataStart + begin, this.dataStart + end);
    const count = entry.shape.reduce((a, b) => a * b, 1);
    const data = decode(entry.dtype, bytes, count, name);
    return { shape: entry.shape, data };
  }
}

function decode(dtype: string, bytes: Buffer, count: number, name: string): Float32Array {
  switch (dtype) {
    case 'F32': {
      expectBytes(bytes, 4 * count, name);
      // realign into a fresh buffer; payload and host are both little-endian
      const copy = new Uint8Array(bytes.length);
      copy.set(bytes);
      return new Float32Array(copy.buffer, 0, count);
    }
    case 'F16': {
      expectBytes(bytes, 2 * count, name);
      const out = new Float32Array(count);
      for (let i = 0; i < count; i++) out[i] = halfToFloat(bytes.readUInt16LE(2 * i));
      return out;
    }
    case 'BF16': {
      expectBytes(bytes, 2 * count, name);
      const out = new Float32Array(count);
      const view = new DataView(out.buffer);
      for (let i = 0; i < count; i++) {
        view.setUint32(4 * i, bytes.readUInt16LE(2 * i) << 16, true);
      }
      return out;
    }
    default:
      throw new Error(`tensor ${name}: unsupported dtype ${dtype}`);
  }
}

function expectBytes(bytes: Buffer, want: number, name: string): void {
  if (bytes.length !== want) {
    throw new Error(`tensor ${name}: payload holds ${bytes.length} bytes, expected ${want}`);
  }
}

export function halfToFloat(bits: number): number {
  const sign = (bits & 0x8000) ? -1 : 1;
  const exponent = (bits >> 10) & 0x1f;
  const mantissa = bits & 0x3ff;
  if (exponent === 0) {
    return sign * Math.pow(2, -14) * (mantissa / 1024);
  }
  if (exponent === 0x1f) {
    return mantissa ? Number.NaN : sign * Number.POSITIVE_INFINITY;
  }
  return sign * Math.pow(2, exponent - 15) * (1 + mantissa / 1024);
}

/** Encode float32 tensors into a safetensors buffer (test fixtures, tooling). */
export function buildSafetensors(tensors: Array<[string, number[], Float32Array]>): Buffer {
  const header: Record<string, { dtype: string; shape: number[]; data_offsets: [number, number] }> = {};
  let offset = 0;
  const payloads: Buffer[] = [];
  for (const [name, shape, data] of tensors) {
    const bytes = Buffer.from(data.buffer, data.byteOffset, data.byteLength);
    header[name] = { dtype: 'F32', shape, data_offsets: [offset, offset + bytes.length] };
    payloads.push(bytes);
    offset += bytes.length;
  }
  const headerBytes = Buffer.from(JSON.stringify(header), 'utf-8');
  const lengthPrefix = Buffer.alloc(8);
  lengthPrefix.writeBigUInt64LE(BigInt(headerBytes.length));
  return Buffer.concat([lengthPrefix, headerBytes, ...payloads]);
}
