/** Checkpoint conversion: npz array archives to engine weight files. */

import { readNpz } from "./npz.js";
import { paramShapes } from "./specs.js";
import { writeWeightFile, WeightEntry } from "./weightfile.js";

export class ConversionError extends Error {}

function sameShape(a: number[], b: number[]): boolean {
  return a.length === b.length && a.every((v, i) => v === b[i]);
}

/** Validate an npz checkpoint against a backbone layout and write it out.
 *
 * Entry names must match the engine's parameter names exactly; numClasses
 * null means a headless (feature extractor only) checkpoint.
 */
export function convertCheckpoint(
  npzPath: string,
  specName: string,
  numClasses: number | null,
  outPath: string,
): void {
  const arrays = readNpz(npzPath);
  const expected = paramShapes(specName, numClasses);

  const missing = expected.filter((e) => !arrays.has(e.name)).map((e) => e.name);
  if (missing.length > 0) {
    throw new ConversionError(`checkpoint lacks entries: ${missing.join(", ")}`);
  }
  const known = new Set(expected.map((e) => e.name));
  const extra = [...arrays.keys()].filter((name) => !known.has(name)).sort();
  if (extra.length > 0) {
    throw new ConversionError(`checkpoint has unexpected entries: ${extra.join(", ")}`);
  }

  const entries: WeightEntry[] = expected.map((e) => {
    const arr = arrays.get(e.name)!;
    if (!sameShape(arr.shape, e.shape)) {
      throw new ConversionError(
        `${e.name}: checkpoint shape [${arr.shape}] does not match expected [${e.shape}]`,
      );
    }
    return { name: e.name, shape: e.shape, data: arr.data };
  });
  writeWeightFile(entries, outPath);
}
