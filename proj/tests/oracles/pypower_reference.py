#!/usr/bin/env python3
"""Export MATPOWER-format case files from PYPOWER and record reference OPF fixtures.

PYPOWER's runopf (its own primal-dual interior-point solver, written
independently of this project) is the reference used to freeze the
cross-check fixture in tests/fixtures/reference_opf.json.  The fixture is
committed; this script only needs re-running when a case file changes.

Usage:
    pip install --no-deps --target /tmp/ppl pypower
    PYTHONPATH=/tmp/ppl python3 tests/oracles/pypower_reference.py
"""

import json
import os

import numpy as np
from pypower.api import case9, case14, case30, case57, case118, ppoption, runopf

ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), "..", ".."))


def case3_tap():
    """Three-bus meshed case with a tap-changing, phase-shifting transformer."""
    return {
        "version": "2",
        "baseMVA": 100.0,
        "bus": np.array([
            [1, 3, 0, 0, 0, 0, 1, 1.0, 0, 230, 1, 1.06, 0.94],
            [2, 2, 60, 20, 0, 0, 1, 1.0, 0, 230, 1, 1.06, 0.94],
            [3, 1, 110, 40, 0, 5, 1, 1.0, 0, 230, 1, 1.06, 0.94],
        ], dtype=float),
        "gen": np.array([
            [1, 100, 0, 120, -60, 1.0, 100, 1, 200, 10] + [0] * 11,
            [2, 70, 0, 80, -40, 1.0, 100, 1, 120, 5] + [0] * 11,
        ], dtype=float),
        "branch": np.array([
            [1, 2, 0.01, 0.08, 0.04, 150, 150, 150, 0, 0, 1, -30, 30],
            [1, 3, 0.02, 0.10, 0.03, 150, 150, 150, 0.98, 2.0, 1, -30, 30],
            [2, 3, 0.015, 0.09, 0.02, 80, 80, 80, 0, 0, 1, -30, 30],
        ], dtype=float),
        "gencost": np.array([
            [2, 0, 0, 3, 0.012, 14, 80],
            [2, 0, 0, 3, 0.020, 11, 60],
        ], dtype=float),
    }


def fmt(v):
    if float(v).is_integer():
        return str(int(v))
    return repr(float(v))


def write_case(name, ppc, path):
    lines = [f"function mpc = {name}", f"%{name.upper()}  exported from PYPOWER {name}", "",
             "mpc.version = '2';", "", f"mpc.baseMVA = {fmt(ppc['baseMVA'])};", ""]
    blocks = [
        ("bus", 13, "bus_i\ttype\tPd\tQd\tGs\tBs\tarea\tVm\tVa\tbaseKV\tzone\tVmax\tVmin"),
        ("gen", 10, "bus\tPg\tQg\tQmax\tQmin\tVg\tmBase\tstatus\tPmax\tPmin"),
        ("branch", 13, "fbus\ttbus\tr\tx\tb\trateA\trateB\trateC\tratio\tangle\tstatus\tangmin\tangmax"),
        ("gencost", None, "model\tstartup\tshutdown\tn\tc(n-1)\t...\tc0"),
    ]
    for key, ncol, header in blocks:
        lines.append(f"%% {key} data")
        lines.append(f"%\t{header}")
        lines.append(f"mpc.{key} = [")
        for row in ppc[key]:
            vals = row if ncol is None else row[:ncol]
            lines.append("\t" + "\t".join(fmt(v) for v in vals) + ";")
        lines.append("];")
        lines.append("")
    with open(path, "w") as fh:
        fh.write("\n".join(lines))


def main():
    cases = {
        "case3_tap": case3_tap(),
        "case9": case9(),
        "case14": case14(),
        "case30": case30(),
        "case57": case57(),
        "case118": case118(),
    }
    fixtures = {}
    opt = ppoption(VERBOSE=0, OUT_ALL=0, OPF_VIOLATION=1e-8, PDIPM_FEASTOL=1e-9,
                   PDIPM_GRADTOL=1e-9, PDIPM_COMPTOL=1e-9, PDIPM_COSTTOL=1e-10)
    for name, ppc in cases.items():
        write_case(name, ppc, os.path.join(ROOT, "data", f"{name}.m"))
        if name in ("case3_tap", "case9", "case30"):
            res = runopf(ppc, opt)
            assert res["success"], name
            fixtures[name] = {
                "objective": float(res["f"]),
                "vm": [float(v) for v in res["bus"][:, 7]],
                "va_deg": [float(v) for v in res["bus"][:, 8]],
                "pg": [float(v) for v in res["gen"][:, 1]],
                "qg": [float(v) for v in res["gen"][:, 2]],
            }
    with open(os.path.join(ROOT, "tests", "fixtures", "reference_opf.json"), "w") as fh:
        json.dump({"source": "PYPOWER runopf (PIPS interior point)", "cases": fixtures}, fh, indent=2)
        fh.write("\n")


if __name__ == "__main__":
    main()
