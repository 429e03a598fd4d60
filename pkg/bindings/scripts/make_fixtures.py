"""Build the binding test fixtures with the primary engine.

Creates three small corpora, a random tinynet weight file, the same
parameters as an uncompressed npz checkpoint, and variants with a missing /
misshapen entry for the converter error tests.
"""

import sys
from pathlib import Path

import numpy as np

from hwdkit import backbone as bb
from hwdkit import corpus, weights


def main(out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    for i, (styles, words, seed) in enumerate([(3, 6, 101), (4, 5, 202), (2, 8, 303)]):
        corpus.generate_corpus(styles, words, seed=seed, out_dir=out / f"corpus{i}")

    spec = bb.tinynet_spec()
    params = bb.init_params(spec, seed=1234)
    weights.save_weights(spec, params, out / "reference.hwdw")

    arrays = {name: params[name] for name in spec.param_shapes()}
    np.savez(out / "checkpoint.npz", **arrays)

    broken = dict(arrays)
    del broken["block2.conv0.bias"]
    np.savez(out / "checkpoint_missing.npz", **broken)

    misshapen = dict(arrays)
    misshapen["block1.conv0.weight"] = arrays["block1.conv0.weight"][:, :8]
    np.savez(out / "checkpoint_misshapen.npz", **misshapen)

    extra = dict(arrays)
    extra["optimizer.momentum"] = np.zeros(3, dtype=np.float32)
    np.savez(out / "checkpoint_extra.npz", **extra)

    np.savez(out / "checkpoint_f64.npz",
             **{name: arr.astype(np.float64) for name, arr in arrays.items()})

    print(f"fixtures written to {out}")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "test/fixtures")
