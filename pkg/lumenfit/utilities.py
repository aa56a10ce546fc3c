# (c) 2026 lumenfit authors

"""
    Useful abstractions that don't belong anywhere else: export
    bookkeeping, optional chaining, the shared worker pool and
    reproducible random streams.
"""

import os
import re
import json
import hashlib
import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np

logger = logging.getLogger(__name__)

camelcase_regex = re.compile(r'[A-Z][a-z0-9]*')

THREADS_VARIABLE = 'LUMENFIT_THREADS'


def un_camelcase(name):
    """
        Turn a camelcased name into a lowercase name with underscore separators.
    """
    return '_'.join(camelcase_regex.findall(name)).lower()


def append_to(__all__):
    """
        Class and function decorator to include the name in __all__.

        Modules in this package export their public operations through
        a wildcard import; decorating each of them keeps the __all__
        list next to the definitions instead of in a separate listing.
        The decorator only works for objects that carry a __name__,
        i.e. functions defined with def and classes.

        >>> __all__ = []
        >>> @append_to(__all__)
        ... def haversine():
        ...     pass
        >>> def helper():
        ...     pass
        >>> __all__
        ['haversine']
    """
    def wrap(obj):
        assert hasattr(obj, '__name__'), "Decorated object must have a __name__."
        __all__.append(obj.__name__)
        return obj
    return wrap


def maybe(target, *keys, fallback=None):
    """ Simple implementation of optional chaining, like Haskell's Maybe. """
    try:
        for key in keys:
            target = target[key]
        return target
    except (KeyError, IndexError, TypeError):
        return fallback


def worker_count(requested=None):
    """
        Number of worker threads to use.

        LUMENFIT_THREADS caps the count; without it the number of CPUs is
        used. The result is never below 1.
    """
    available = os.cpu_count() or 1
    cap = os.environ.get(THREADS_VARIABLE)
    if cap:
        try:
            available = int(cap)
        except ValueError:
            logger.warning('Ignoring non-integer {}={!r}'.format(
                THREADS_VARIABLE, cap,
            ))
    if requested is not None:
        available = min(available, requested)
    return max(1, available)


def parallel_map(func, items, workers=None):
    """
        Apply func to every item and return the results in input order.

        Assembly never depends on completion order, so the output is the
        same for any number of workers.
    """
    items = list(items)
    workers = worker_count(workers)
    if workers == 1 or len(items) < 2:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(func, items))


def spawn_generators(seed, count):
    """ Independent numpy generators derived deterministically from seed. """
    children = np.random.SeedSequence(seed).spawn(count)
    return [np.random.default_rng(child) for child in children]


def sha256_file(path):
    digest = hashlib.sha256()
    with open(path, 'rb') as source:
        for block in iter(lambda: source.read(1 << 16), b''):
            digest.update(block)
    return digest.hexdigest()


def config_hash(mapping):
    """ SHA-256 of a JSON rendering of mapping with sorted keys. """
    text = json.dumps(mapping, sort_keys=True, default=str)
    return hashlib.sha256(text.encode('utf-8')).hexdigest()
