"""Quick end-to-end check of the Python bindings.

Build first:  pip install --no-build-isolation -e crates/py
Then run:     python3 python/smoke_test.py
"""

import math
import os
import tempfile

import collapsim


def close(a, b, tol=1e-12):
    return abs(a - b) <= tol


def main():
    cfg = collapsim.Config()
    assert cfg.master_seed == 42
    assert collapsim.Config.from_text(cfg.dump()).dump() == cfg.dump()

    try:
        collapsim.Config(["evolution.coupling.g=-1"])
    except ValueError as e:
        assert "evolution.coupling.g" in str(e)
    else:
        raise AssertionError("negative coupling accepted")

    # Interaction-free measurement.
    assert all(close(p, q) for p, q in zip(collapsim.mzi_probabilities(False), (0, 1, 0)))
    assert all(close(p, q) for p, q in zip(collapsim.mzi_probabilities(True), (0.25, 0.25, 0.5)))
    dark, bright, absorbed = collapsim.mzi_sample(True, 10_000, 7)
    assert dark + bright + absorbed == 10_000

    # A product state has no entanglement; a balanced Bell-like state has one bit.
    n = 8
    product = [complex(1 / math.sqrt(n))] * n + [0j] * n
    assert collapsim.entanglement_entropy(product, 1) < 1e-12
    bell = [0j] * (2 * n)
    bell[0] = bell[n + 1] = complex(1 / math.sqrt(2))
    assert close(collapsim.entanglement_entropy(bell, 1), 1.0, 1e-9)

    r, p = collapsim.point_biserial([True, False] * 50, [1.0, 0.0] * 50)
    assert close(r, 1.0, 1e-9) and p < 0.01

    small = cfg.with_overrides(["n_trajectories=40", "evolution.n_steps=1000"])
    rec = collapsim.run_trajectory(small, 3)
    assert rec.id == 3 and rec.seed == 42
    records, summary = collapsim.run_ensemble(small, workers=2)
    assert summary.n_total == 40 == len(records)
    assert summary.n_created + summary.n_elastic == 40
    assert records[3].screen_x == rec.screen_x

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "records.csv")
        collapsim.write_records(records, path)
        back = collapsim.read_records(path)
        assert [(r.id, r.screen_x, r.phonon_created) for r in back] == [
            (r.id, r.screen_x, r.phonon_created) for r in records
        ]

    free = cfg.with_overrides(["evolution.coupling.g=0", "evolution.n_steps=1000"])
    xs, pdfs = collapsim.screen_pattern(free)
    dx = xs[1] - xs[0]
    assert close(sum(map(sum, pdfs)) * dx, 1.0, 1e-9)

    print("python smoke test: ok")


if __name__ == "__main__":
    main()
