export { BoundSession, EngineError, runCli } from "./session.js";
export type { CliResult, Distance, Portion, ScoreOptions, SessionOptions } from "./session.js";
export { ConversionError, convertCheckpoint } from "./convert.js";
export { paramShapes } from "./specs.js";
export type { EntryShape } from "./specs.js";
export { crc32, encodeWeightFile, writeWeightFile } from "./weightfile.js";
export type { WeightEntry } from "./weightfile.js";
export { readNpz } from "./npz.js";
export type { NpyArray } from "./npz.js";
