/** Parameter layouts of the scoring engine's backbones.
 *
 * Mirrors the engine's architecture definitions: ordered conv blocks, each
 * conv contributing `block{b}.conv{c}.weight` [out, in, 3, 3] and a bias
 * [out], plus an optional classifier head sized by numClasses.
 */

export interface EntryShape {
  name: string;
  shape: number[];
}

const BLOCKS: Record<string, number[][]> = {
  tinynet: [[16], [32], [64], [128], [128]],
  vgg16_32: [[64, 64], [128, 128], [256, 256, 256], [512, 512, 512], [512, 512, 512]],
};

const FEATURE_DIM: Record<string, number> = {
  tinynet: 128,
  vgg16_32: 512,
};

export function paramShapes(specName: string, numClasses: number | null = null): EntryShape[] {
  const blocks = BLOCKS[specName];
  if (!blocks) {
    throw new Error(`unknown backbone '${specName}', expected one of ${Object.keys(BLOCKS).sort().join(", ")}`);
  }
  const shapes: EntryShape[] = [];
  let cin = 1;
  blocks.forEach((block, bi) => {
    block.forEach((cout, ci) => {
      shapes.push({ name: `block${bi}.conv${ci}.weight`, shape: [cout, cin, 3, 3] });
      shapes.push({ name: `block${bi}.conv${ci}.bias`, shape: [cout] });
      cin = cout;
    });
  });
  if (numClasses !== null) {
    if (numClasses < 2) throw new Error(`numClasses must be >= 2, got ${numClasses}`);
    shapes.push({ name: "head.weight", shape: [numClasses, FEATURE_DIM[specName]] });
    shapes.push({ name: "head.bias", shape: [numClasses] });
  }
  return shapes;
}
