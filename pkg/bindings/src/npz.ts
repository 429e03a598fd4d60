/** Minimal reader for uncompressed .npz archives (a zip of .npy files).
 *
 * Only stored (method 0) zip entries and little-endian float32/float64 C-order
 * arrays are supported; that covers numpy's np.savez export of checkpoints.
 */

import { readFileSync } from "node:fs";

export interface NpyArray {
  shape: number[];
  data: Float32Array;
}

const LOCAL_HEADER = 0x04034b50;

export function readNpz(path: string): Map<string, NpyArray> {
  const buf = readFileSync(path);
  const out = new Map<string, NpyArray>();
  let pos = 0;
  while (pos + 4 <= buf.length && buf.readUInt32LE(pos) === LOCAL_HEADER) {
    const method = buf.readUInt16LE(pos + 8);
    const compressedSize = buf.readUInt32LE(pos + 18);
    const nameLen = buf.readUInt16LE(pos + 26);
    const extraLen = buf.readUInt16LE(pos + 28);
    const name = buf.toString("utf-8", pos + 30, pos + 30 + nameLen);
    const dataStart = pos + 30 + nameLen + extraLen;
    if (method !== 0) {
      throw new Error(`${path}: entry '${name}' is compressed (method ${method}); re-export with np.savez (no compression)`);
    }
    const payload = buf.subarray(dataStart, dataStart + compressedSize);
    out.set(name.replace(/\.npy$/, ""), parseNpy(payload, name));
    pos = dataStart + compressedSize;
  }
  if (out.size === 0) {
    throw new Error(`${path}: no zip entries found (not an npz archive?)`);
  }
  return out;
}

function parseNpy(buf: Buffer, name: string): NpyArray {
  if (buf.toString("latin1", 0, 6) !== "\x93NUMPY") {
    throw new Error(`entry '${name}' is not an npy array`);
  }
  const major = buf.readUInt8(6);
  const headerLen = major >= 2 ? buf.readUInt32LE(8) : buf.readUInt16LE(8);
  const headerEnd = (major >= 2 ? 12 : 10) + headerLen;
  const header = buf.toString("latin1", major >= 2 ? 12 : 10, headerEnd);

  const descr = /'descr':\s*'([^']+)'/.exec(header)?.[1];
  const fortran = /'fortran_order':\s*(True|False)/.exec(header)?.[1];
  const shapeText = /'shape':\s*\(([^)]*)\)/.exec(header)?.[1];
  if (descr === undefined || fortran === undefined || shapeText === undefined) {
    throw new Error(`entry '${name}': malformed npy header: ${header.trim()}`);
  }
  if (fortran === "True") {
    throw new Error(`entry '${name}': fortran-order arrays are not supported`);
  }
  const shape = shapeText
    .split(",")
    .map((s) => s.trim())
    .filter((s) => s.length > 0)
    .map(Number);
  const count = shape.reduce((a, b) => a * b, 1);

  const raw = buf.subarray(headerEnd);
  if (descr === "<f4") {
    const data = new Float32Array(count);
    for (let i = 0; i < count; i++) data[i] = raw.readFloatLE(4 * i);
    return { shape, data };
  }
  if (descr === "<f8") {
    const data = new Float32Array(count);
    for (let i = 0; i < count; i++) data[i] = Math.fround(raw.readDoubleLE(8 * i));
    return { shape, data };
  }
  throw new Error(`entry '${name}': unsupported dtype ${descr}, expected <f4 or <f8`);
}
