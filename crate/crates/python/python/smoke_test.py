"""Smoke test for the webskill extension.

Build and stage the module, then run from the workspace root:

    cargo build -p webskill-py --features extension-module
    cp target/debug/libwebskill.so /tmp/webskill.so
    PYTHONPATH=/tmp python3 crates/python/python/smoke_test.py
"""

import json
import tempfile
from pathlib import Path

import webskill

CONFIG = Path(__file__).resolve().parents[2] / "core" / "fixtures" / "harness.toml"


def main():
    assert webskill.utility(0, 0) == 0.5
    assert webskill.utility(3, 3) == 0.8
    assert webskill.normalize_selector("form#f button.primary") == "form#f button.primary"
    try:
        webskill.normalize_selector("form#f   button")
    except ValueError:
        pass
    else:
        raise AssertionError("malformed selector accepted")
    assert len(webskill.failure_modes()) == 9

    h = webskill.Harness(str(CONFIG))
    tasks = h.tasks()
    train, test = h.split()
    assert len(tasks) == len(train) + len(test) == 36

    task = next(t for t in tasks if t["site_id"] == "shoplite")
    env = h.env("shoplite")
    obs = env.reset(task["task_id"])
    assert obs["url"] == task["start_url"]
    for line in task["gold"]:
        env.step(line)
        if env.terminated:
            break
    assert env.evaluate(), task["task_id"]

    lib = webskill.Library()
    for _ in range(2):
        lib = h.train_round(lib)
    assert len(lib) > 0 and lib.validate() == []
    assert webskill.Library.from_json(lib.to_json()).skill_ids() == lib.skill_ids()

    metrics = h.evaluate(lib)
    with tempfile.TemporaryDirectory() as out:
        final, _ = h.run(1, out)
        assert (Path(out) / "metrics.json").exists()
    print(json.dumps({"library": repr(lib), "test_success": metrics["success_rate"], "one_round": final["success_rate"]}))
    print("smoke test ok")


if __name__ == "__main__":
    main()
