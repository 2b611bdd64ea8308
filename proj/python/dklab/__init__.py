"""Regularised Dean-Kawasaki numerics: particles, smoothed fields, noise comparison and the SPDE solver."""

import json as _json

from ._core import *  # noqa: F401,F403
from ._core import ConfigError, Error, __doc__, run_config, schema, validate_config, version


def load_schema():
    """The experiment config schema as a dict."""
    return _json.loads(schema())


def canonical_config(config):
    """Fill in defaults for a config given as a dict or JSON text."""
    text = config if isinstance(config, str) else _json.dumps(config)
    return _json.loads(validate_config(text))
