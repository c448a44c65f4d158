"""The command-line workflow end to end, driven from Python.

Generate a multifractal random walk to CSV, analyze it with automatic
fit-range selection, and test its width against shuffled surrogates.
Each step writes one JSON report; we print the fields that matter.
Running this script twice produces identical reports.
"""
import json
import os
import tempfile

from mfkit.cli import run


def step(*argv):
    with tempfile.NamedTemporaryFile("r", suffix=".json", delete=False) as fh:
        path = fh.name
    code = run([*argv, "--report", path])
    with open(path, encoding="utf-8") as fh:
        report = json.load(fh)
    os.remove(path)
    print(f"$ mfkit {' '.join(argv)}\n  exit {code}, status {report['status']}, "
          f"warnings {report['warnings']}")
    return report


with tempfile.TemporaryDirectory() as tmp:
    data = os.path.join(tmp, "mrw.csv")
    step("generate", "--model", "mrw", "--lambda2", "0.05", "--n", "16384", "--seed", "1",
         "--output", data)
    rep = step("analyze", "--input", data, "--method", "mfdfa", "--q", "-3:3:1",
               "--range-policy", "brute_r2")
    res = rep["result"]
    print(f"  chosen range {res['fit_range']}, h(q) = {[round(h, 3) for h in res['spectrum']['h']]}")
    print(f"  delta_alpha = {res['widths']['delta_alpha']:.3f}")
    rep = step("test", "--input", data, "--null", "shuffle", "-n", "40", "--q", "-3:3:1", "--seed", "2")
    print(f"  shuffle test: observed {rep['result']['observed']:.3f}, "
          f"null mean {rep['result']['null_mean']:.3f}, p = {rep['result']['p_value']:.3f}")
