import { execFileSync } from "node:child_process";
import { existsSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

export const ROOT = dirname(dirname(fileURLToPath(import.meta.url)));
export const FIXTURES = join(ROOT, "test", "fixtures");
export const PYTHON = process.env.HWDKIT_PYTHON ?? "python3";

/** Corpora, weight file and npz checkpoints come from the engine itself. */
export function ensureFixtures(): void {
  if (existsSync(join(FIXTURES, "reference.hwdw"))) return;
  execFileSync(PYTHON, [join(ROOT, "scripts", "make_fixtures.py"), FIXTURES], {
    stdio: "inherit",
  });
}

export function manifest(corpus: number): string {
  return join(FIXTURES, `corpus${corpus}`, "manifest.tsv");
}
