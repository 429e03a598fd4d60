/** Scoring sessions over the hwdkit command line.
 *
 * The engine is consumed strictly through its public surface: the CLI and
 * the manifest/weight file formats. Reports are returned both parsed and as
 * the exact bytes the engine wrote, so callers can assert bit-for-bit
 * equality with their own CLI invocations.
 */

import { execFileSync } from "node:child_process";
import { existsSync, mkdtempSync, readFileSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

export type Portion = "whole" | "begin";
export type Distance = "euclidean" | "frechet" | "kid" | "mahalanobis" | "hamming";

export interface SessionOptions {
  backbone?: "tinynet" | "vgg16_32";
  portion?: Portion;
  invertInk?: boolean;
  /** Interpreter used to run the engine; HWDKIT_PYTHON overrides. */
  python?: string;
}

export interface ScoreOptions {
  distance?: Distance;
  seed?: number;
  threads?: number;
  perWriterMin?: number;
}

export interface CliResult {
  /** Exact bytes of the JSON report. */
  raw: string;
  report: Record<string, unknown>;
}

export class EngineError extends Error {
  constructor(message: string, readonly exitCode: number) {
    super(message);
  }
}

export function runCli(args: string[], python?: string): CliResult {
  const interpreter = python ?? process.env.HWDKIT_PYTHON ?? "python3";
  const dir = mkdtempSync(join(tmpdir(), "hwdkit-"));
  const out = join(dir, "report.json");
  try {
    execFileSync(interpreter, ["-m", "hwdkit.cli", ...args, "--out", out], {
      stdio: ["ignore", "pipe", "pipe"],
    });
    const raw = readFileSync(out, "utf-8");
    return { raw, report: JSON.parse(raw) };
  } catch (err) {
    const e = err as { status?: number; stderr?: Buffer };
    if (e.status !== undefined && e.stderr !== undefined) {
      throw new EngineError(e.stderr.toString().trim(), e.status);
    }
    throw err;
  } finally {
    rmSync(dir, { recursive: true, force: true });
  }
}

export class BoundSession {
  private constructor(
    readonly weightsPath: string,
    readonly config: Required<Pick<SessionOptions, "backbone" | "portion" | "invertInk">>,
    private readonly python?: string,
  ) {}

  static load(weightsPath: string, options: SessionOptions = {}): BoundSession {
    if (!existsSync(weightsPath)) {
      throw new Error(`weights file not found: ${weightsPath}`);
    }
    const magic = readFileSync(weightsPath).subarray(0, 4).toString("ascii");
    if (magic !== "HWDW") {
      throw new Error(`${weightsPath}: not a weight file (magic '${magic}')`);
    }
    return new BoundSession(
      weightsPath,
      {
        backbone: options.backbone ?? "tinynet",
        portion: options.portion ?? "whole",
        invertInk: options.invertInk ?? false,
      },
      options.python,
    );
  }

  private backboneArgs(): string[] {
    const args = [
      "--weights", this.weightsPath,
      "--backbone", this.config.backbone,
      "--portion", this.config.portion,
    ];
    if (this.config.invertInk) args.push("--invert-ink");
    return args;
  }

  /** Score a generated manifest against a real one; distances per the engine. */
  score(realManifest: string, genManifest: string, options: ScoreOptions = {}): CliResult {
    const args = [
      "score",
      "--real", realManifest,
      "--gen", genManifest,
      "--distance", options.distance ?? "euclidean",
      "--seed", String(options.seed ?? 0),
      ...this.backboneArgs(),
    ];
    if (options.threads !== undefined) args.push("--threads", String(options.threads));
    if (options.perWriterMin !== undefined) args.push("--per-writer-min", String(options.perWriterMin));
    return runCli(args, this.python);
  }

  /** Half/half writer verification: overlap and equal error rate. */
  verify(manifest: string, options: ScoreOptions = {}): CliResult {
    const args = [
      "verify",
      "--manifest", manifest,
      "--distance", options.distance ?? "euclidean",
      "--seed", String(options.seed ?? 0),
      ...this.backboneArgs(),
    ];
    if (options.threads !== undefined) args.push("--threads", String(options.threads));
    return runCli(args, this.python);
  }
}
