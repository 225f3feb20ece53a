"""Amplification DDoS detection and analytics over sampled flow records.

Thin convenience layer over the compiled `_ampsentinel` extension: the
detection pipeline, the per-protocol analytics, and the labeled synthetic
corpus generator.
"""

import json as _json

try:
    from ._ampsentinel import *  # noqa: F401,F403
    from . import _ampsentinel as _core
except ImportError:  # development layout: extension next to the package dir
    from _ampsentinel import *  # noqa: F401,F403
    import _ampsentinel as _core

__version__ = "1.0.0"


def generate_corpus(scenarios, seed=0, config=None):
    """Generate a labeled flow corpus.

    `scenarios` is either a list of attack-scenario dicts or a dict with
    "attacks" and optional "background" keys, mirroring the scenario JSON
    format of the `amp-sentinel synth` subcommand. Returns (flows,
    ground_truth).
    """
    return _core.generate_corpus_json(_json.dumps(scenarios), seed, config)
