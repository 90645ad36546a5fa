"""Smoke test for the Python extension: build with
`pip install --no-build-isolation ./crates/python`, then run this file."""

import os
import tempfile

import synther


def main():
    real = synther.collect("pointmass", 2000, seed=1)
    assert len(real) == 2000 and real.row_dim == 12, real
    assert len(real.column_names()) == 12

    marginal, correlation = synther.fidelity(real, real)
    assert marginal == 1.0 and correlation == 1.0

    model = synther.DiffusionModel.train(real, width=32, depth=2, train_steps=100, sampler_steps=8, seed=2)
    synth = model.generate(500, seed=3)
    assert len(synth) == 500 and synth.row_dim == real.row_dim
    assert synth.rows() == model.generate(500, seed=3).rows(), "generation is deterministic"

    aug = synther.augment(real, "additive", 3000, seed=4)
    assert len(aug) == 3000 and aug.row(0) == real.row(0)

    ratio, text = synther.compression(84e6, 6.5e6)
    assert text == "12.9×", text

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "real.bin")
        real.save(path)
        assert synther.Dataset.load(path).rows() == real.rows()
        model.save(os.path.join(tmp, "model.bin"))
        assert synther.DiffusionModel.load(os.path.join(tmp, "model.bin")).param_count == model.param_count

        run = synther.run("collect", "collect.count = 100\nseed = 5\n", tmp)
        assert os.path.exists(os.path.join(run, "config.resolved"))
        assert len(synther.Dataset.load(os.path.join(run, "dataset.bin"))) == 100
        try:
            synther.run("collect", "collect.cont = 100", tmp)
        except ValueError as e:
            assert "config" in str(e)
        else:
            raise AssertionError("unknown key accepted")

    print("python smoke test ok")


if __name__ == "__main__":
    main()
