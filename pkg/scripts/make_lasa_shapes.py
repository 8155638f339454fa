"""Regenerate the shipped handwriting-style shapes under src/pnpf/data/."""

import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from pnpf.datasets import lasa_shape_path, make_lasa_style, save_task  # noqa: E402


def main():
    os.makedirs(os.path.dirname(lasa_shape_path("x")), exist_ok=True)
    for i, name in enumerate(["gshape", "angle", "sine"]):
        task = make_lasa_style(name, seed=100 + i)
        save_task(task, lasa_shape_path(name))
        print(f"wrote {lasa_shape_path(name)} ({len(task.demos)} demos)")


if __name__ == "__main__":
    main()
