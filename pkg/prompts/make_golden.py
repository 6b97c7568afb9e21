"""Regenerate prompts/golden/*.txt from the sample bindings in bindings.json.

Only rerun after a deliberate template change; the golden files are the
reviewed reference renders.
"""
import json
from pathlib import Path

from madrec.llm.prompts import render_prompt

HERE = Path(__file__).parent / "golden"

if __name__ == "__main__":
    bindings = json.loads((HERE / "bindings.json").read_text(encoding="utf-8"))
    for name, b in bindings.items():
        (HERE / f"{name}.txt").write_text(render_prompt(name, b), encoding="utf-8")
        print("wrote", name)
