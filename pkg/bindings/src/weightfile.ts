/** Writer for the engine's binary weight files.
 *
 * Layout (little-endian): "HWDW" magic, u32 version, then per entry a u16
 * name length, UTF-8 name, u8 rank, u32 dims, float32 payload; the file ends
 * with a CRC32 of everything before it.
 */

import { writeFileSync } from "node:fs";

export const MAGIC = "HWDW";
export const VERSION = 1;

const CRC_TABLE = (() => {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) {
      c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    }
    table[n] = c >>> 0;
  }
  return table;
})();

export function crc32(buf: Uint8Array): number {
  let c = 0xffffffff;
  for (let i = 0; i < buf.length; i++) {
    c = CRC_TABLE[(c ^ buf[i]) & 0xff] ^ (c >>> 8);
  }
  return (c ^ 0xffffffff) >>> 0;
}

export interface WeightEntry {
  name: string;
  shape: number[];
  data: Float32Array;
}

export function encodeWeightFile(entries: WeightEntry[]): Buffer {
  const parts: Buffer[] = [Buffer.from(MAGIC, "ascii")];
  const version = Buffer.alloc(4);
  version.writeUInt32LE(VERSION);
  parts.push(version);

  for (const entry of entries) {
    const count = entry.shape.reduce((a, b) => a * b, 1);
    if (entry.data.length !== count) {
      throw new Error(`${entry.name}: payload has ${entry.data.length} values, shape wants ${count}`);
    }
    const name = Buffer.from(entry.name, "utf-8");
    const head = Buffer.alloc(2 + name.length + 1 + 4 * entry.shape.length);
    let pos = head.writeUInt16LE(name.length, 0);
    pos += name.copy(head, pos);
    pos = head.writeUInt8(entry.shape.length, pos);
    for (const dim of entry.shape) pos = head.writeUInt32LE(dim, pos);
    parts.push(head);
    // Float32Array is little-endian on every platform node supports
    parts.push(Buffer.from(entry.data.buffer, entry.data.byteOffset, entry.data.byteLength));
  }

  const body = Buffer.concat(parts);
  const crc = Buffer.alloc(4);
  crc.writeUInt32LE(crc32(body));
  return Buffer.concat([body, crc]);
}

export function writeWeightFile(entries: WeightEntry[], path: string): void {
  writeFileSync(path, encodeWeightFile(entries));
}
