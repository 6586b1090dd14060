"""Python bindings for the ssonmf band-selection core.

Configs are plain dicts in the same layout as the CLI's "experiment" document;
a "preset" key selects a named scenario that the other keys then override.
"""

import json

from . import _core
from ._core import (
    ConfigError,
    SsonmfError,
    apply_band_filter,
    envelope_spectrum,
    envsi,
    kurtosis,
    nmf_mu,
    onmfs,
    orthogonality_error,
    preset_names,
    spectral_kurtosis,
    ss_onmf,
    stft,
    trial_seed,
    update_w,
)

__all__ = [
    "ConfigError",
    "SsonmfError",
    "apply_band_filter",
    "config",
    "config_schema",
    "envelope_spectrum",
    "envsi",
    "kurtosis",
    "nmf_mu",
    "onmfs",
    "orthogonality_error",
    "preset",
    "preset_names",
    "rank_sweep",
    "run_trial",
    "simulate",
    "spectral_kurtosis",
    "ss_onmf",
    "stft",
    "trial_seed",
    "update_w",
]


def _text(cfg):
    if isinstance(cfg, str):
        return json.dumps({"preset": cfg})
    return json.dumps(cfg)


def preset(name):
    return json.loads(_core.preset_json(name))


def config(cfg):
    """Fully expanded config dict (validates keys and types)."""
    return json.loads(_core.normalize_config(_text(cfg)))


def config_schema():
    return json.loads(_core.config_schema())


def simulate(cfg):
    return _core.simulate(_text(cfg))


def run_trial(cfg, rank, seed):
    return _core.run_trial(_text(cfg), rank, seed)


def rank_sweep(cfg, jobs=1, out_dir=None):
    return _core.rank_sweep(_text(cfg), jobs, "" if out_dir is None else str(out_dir))
