# (c) 2026 lumenfit authors

"""
    lumenfit, estimation of nighttime-light effects on child nutrition.

    lumenfit.create_application takes a configuration and returns a
    Flask application whose config mapping drives every pipeline stage.
    The configuration can be a module or object with UPPERCASE
    attributes, a path to a Python file, or a path to a plain key/value
    file such as

        # comment
        RADIUS_KM = 1.5
        OUTCOMES = haz, whz, waz

    Values not set by the configuration fall back to lumenfit.defaults.
"""

import os
import logging

import flask

from . import defaults
from .errors import ConfigError
from .parsers import parse_config

logger = logging.getLogger(__name__)

KNOWN_KEYS = frozenset(name for name in dir(defaults) if name.isupper())


def load_config_file(path):
    """ Parse a key/value configuration file, rejecting unknown keys. """
    with open(path, encoding='utf-8') as source:
        settings = parse_config(source.read())
    unknown = sorted(set(settings) - KNOWN_KEYS)
    if unknown:
        raise ConfigError('unknown configuration key(s) in {}: {}'.format(
            path, ', '.join(unknown),
        ))
    return settings


def create_application(config=defaults):
    """ Return a Flask application carrying the resolved configuration. """
    app = flask.Flask(__name__, static_folder=None)
    app.config.from_object(defaults)
    if type(config) in (str, bytes):
        if isinstance(config, bytes):
            config = config.decode()
        path = os.path.abspath(config)
        if path.endswith('.py'):
            app.config.from_pyfile(path)
        else:
            app.config.update(load_config_file(path))
        logger.debug('Configuration loaded from {}'.format(path))
    elif config is not defaults:
        app.config.from_object(config)
    return app
