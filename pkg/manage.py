# (c) 2026 lumenfit authors

import logging

from flask_script import Manager

from lumenfit import create_application
from lumenfit.commands import register

root_logger = logging.getLogger()
handler = logging.StreamHandler()
root_logger.setLevel(logging.INFO)


def wrapper_factory(verbose, *args, **kwargs):
    """ Wrapper to handle parameters that create_application doesn't accept. """
    if verbose:
        root_logger.setLevel(logging.DEBUG)
    if kwargs.get('config') is None:
        kwargs.pop('config', None)
    return create_application(*args, **kwargs)


manager = Manager(wrapper_factory, with_default_commands=False)
manager.add_option('-c', '--config', dest='config')
manager.add_option('-v', '--verbose', action='store_true', dest='verbose')
register(manager)

if __name__ == '__main__':
    root_logger.addHandler(handler)
    manager.run()
