"""The numba kernels and their pure-Python fallback must agree bit for bit."""

import json
import os
import subprocess
import sys
import textwrap

import pytest

from rwre import backend

SCRIPT = textwrap.dedent("""
    import json
    import numpy as np
    from rwre import env as E, backend
    from rwre.walk import sample_blocks, run_quenched, first_regeneration_times
    from rwre.exactq import propagate
    from rwre.estimators import pinfty_via_limit

    out = {"backend": backend()}
    b = sample_blocks(E.one_two_jump(), count=300, master_seed=7)
    out["blocks"] = [b.duration.tolist(), b.displacement.tolist()]
    b2 = sample_blocks(E.abscont(), count=100, master_seed=3)
    out["blocks2d"] = b2.displacement.tolist()
    out["path"] = run_quenched(E.Environment(E.si_infty(), 2**63 + 5), (0, 0), 400, 9).positions.tolist()
    out["sigma1"] = first_regeneration_times(E.lazy_nn(), 200, 4).tolist()
    pr = propagate(E.Environment(E.lazy_nn(), 1), 0, 300)
    out["prop"] = [pr.means.tolist(), pr.mass.tolist()]
    ev = E.WindowEvent([((0,), 0)], level=0, u_hat=(1,))
    out["pinfty"] = pinfty_via_limit(E.lazy_nn(), ev, 20, 500, 2).value
    print(json.dumps(out))
""")


def _run(disable: bool) -> dict:
    env = {**os.environ, "RWRE_DISABLE_NUMBA": "1" if disable else "0"}
    r = subprocess.run([sys.executable, "-c", SCRIPT], capture_output=True, text=True, env=env, timeout=600)
    assert r.returncode == 0, r.stderr
    return json.loads(r.stdout)


@pytest.mark.skipif(backend() != "numba", reason="numba not available")
def test_numba_and_fallback_agree():
    fast, slow = _run(False), _run(True)
    assert fast.pop("backend") == "numba"
    assert slow.pop("backend") == "numpy"
    assert fast == slow
