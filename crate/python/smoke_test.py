"""Smoke test for the aptb extension module.

Build and install first:  pip install --no-build-isolation -e crates/python
"""

from pathlib import Path

import aptb

SAMPLE15 = (Path(__file__).resolve().parents[1] / "crates" / "core" / "tests" / "data" / "sample15.traj").read_text()


def main():
    data = aptb.Dataset.parse(SAMPLE15)
    assert len(data) == 15
    assert data.prefix_count([(0, 3), (0, 4)]) == 3
    assert data.universe == aptb.Universe(1, 2, 6)
    assert aptb.Dataset.parse(data.to_text()).trajectories() == data.trajectories()

    cfg = aptb.Config(1.0, 3, 7, theta=2.0)
    first = aptb.publish(data, cfg)
    again = aptb.publish(data, cfg)
    assert first.dataset.to_text() == again.dataset.to_text()
    assert first.ledger == again.ledger
    assert first.max_path_budget <= 1.0 + 1e-9

    base = aptb.publish_baseline(data, 1.0, 3, 7)
    assert base.max_path_budget <= 1.0 + 1e-9

    exact = aptb.Config(1e12, 3, 0, delta=0.0)
    assert "delta = 0" in exact.snapshot()
    assert aptb.avg_relative_error(data, data, 3) == 0.0

    synth = aptb.Dataset.synth(aptb.Universe(3, 3, 4), 500, 4, seed=1)
    published = aptb.publish(synth, aptb.Config(1.0, 4, 3)).dataset
    err = aptb.avg_relative_error(synth, published, 4)
    assert err >= 0.0

    for bad in (lambda: aptb.Config(0.0, 3, 1), lambda: aptb.Dataset.parse("universe rows=1 cols=1 slots=1\n0:5\n")):
        try:
            bad()
        except ValueError:
            pass
        else:
            raise AssertionError("expected ValueError")

    report = aptb.dp_check("mixed", 1.0, trials=20_000, seed=5)
    assert report["pass"], report

    print(f"ok: {first!r}; synthetic ARE {err:.4f}; dp check max ratio {report['max_observed_ratio']:.2f}")


if __name__ == "__main__":
    main()
