import os
import subprocess
import sys

import numpy as np
import pytest

from rppkit import _backend
from rppkit.model import ModelConfig, PackedCorpus, PriorParams
from rppkit.simulation import ThetaSpec, simulate_corpus

compiled = pytest.mark.skipif(_backend.compiled_item_stats is None,
                              reason="compiled extension not built")


def _call(seed=0, count=300):
    cfg = ModelConfig()
    seqs = simulate_corpus(PriorParams(2, 2), ThetaSpec(), count, cfg, 15.0, seed=seed).sequences
    seqs[3] = seqs[3].truncate(1e-3)  # likely empty
    pk = PackedCorpus(seqs, cfg)
    rng = np.random.default_rng(seed)
    items = rng.permutation(len(seqs))[: count // 2]
    mu = rng.normal(1, 1, size=items.size)
    sigma = rng.uniform(0.2, 3, size=items.size)
    return pk.log_t, pk.offsets, pk.log_T, mu, sigma, pk.m, items


@compiled
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_backends_agree(seed):
    args = _call(seed)
    a = _backend.compiled_item_stats(*args)
    b = _backend.python_item_stats(*args)
    assert a.shape == b.shape == (_backend.NSTATS, args[-1].size)
    np.testing.assert_allclose(a, b, rtol=1e-11, atol=1e-12)


@compiled
def test_empty_selection():
    args = list(_call())
    args[3], args[4], args[6] = np.zeros(0), np.zeros(0), np.zeros(0, dtype=np.int64)
    assert _backend.compiled_item_stats(*args).shape == (_backend.NSTATS, 0)
    assert _backend.python_item_stats(*args).shape == (_backend.NSTATS, 0)


def _backend_in_subprocess(env_extra):
    env = {**os.environ, **env_extra}
    out = subprocess.run([sys.executable, "-c", "import rppkit; print(rppkit.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    return out.stdout.strip()


def test_fallback_is_selected_at_import():
    env = {k: v for k, v in os.environ.items() if k != "RPPKIT_PURE_PYTHON"}
    assert _backend_in_subprocess({"RPPKIT_PURE_PYTHON": "1"}) == "python"
    default = subprocess.run([sys.executable, "-c", "import rppkit; print(rppkit.BACKEND)"],
                             env=env, capture_output=True, text=True, check=True).stdout.strip()
    want = "cython" if _backend.compiled_item_stats is not None else "python"
    assert default == want
