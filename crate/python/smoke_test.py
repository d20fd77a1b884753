"""Smoke test for the vigan_py extension module.

Build the module first, either with `maturin develop -m crates/python/Cargo.toml`
or by hand:

    cargo build --release -p vigan-py --features extension-module
    cp target/release/libvigan_py.so python/vigan_py.so

then run `python python/smoke_test.py`.
"""

import json
import math
import os
import sys
import tempfile

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import vigan_py


def main():
    with tempfile.TemporaryDirectory() as tmp:
        data = os.path.join(tmp, "data")
        spec = {"kind": "rotation", "dim_x": 4, "dim_y": 4,
                "paired": 80, "x_only": 40, "y_only": 40, "seed": 2}
        rows = vigan_py.gen_data(data, json.dumps(spec))
        assert rows == 160, rows

        train = {"iterations": [30, 30, 30], "batch_paired": 16, "batch_unpaired": 16}
        arch = {"generator_hidden": [16], "discriminator_hidden": [16], "dae_hidden": [16]}
        model = vigan_py.Model.train(data, json.dumps(train), json.dumps(arch))
        assert (model.dim_x, model.dim_y) == (4, 4)
        print(model)

        x = [[0.1, -0.2, 0.3, 0.0], [1.0, 0.5, -0.5, 0.2]]
        y = model.impute(x, "x2y")
        assert len(y) == 2 and all(len(r) == 4 for r in y)
        assert all(math.isfinite(v) for r in y for v in r)
        assert len(model.impute(y, "y2x", mode="dae-only")) == 2

        path = os.path.join(tmp, "model.json")
        model.save(path)
        assert vigan_py.Model.load(path).impute(x, "x2y") == y

        for method, direction, metric, value, n in model.evaluate(data):
            print(f"{method:<8} {direction} {metric} {value:.4f} n={n}")
            assert n == 40 and math.isfinite(value)
        mean = vigan_py.baseline("mean", data)
        assert {r[0] for r in mean} == {"mean"}

        try:
            model.impute([[1.0, 2.0]], "x2y")
        except ValueError:
            pass
        else:
            raise AssertionError("width mismatch was accepted")

    err = vigan_py.gradcheck(3)
    assert err < 1e-4, err
    print(f"gradcheck max_rel_err={err:.3e}")
    print("smoke test passed")


if __name__ == "__main__":
    main()
