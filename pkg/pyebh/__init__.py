from pyebh.core import *  # noqa
from pyebh.random import *  # noqa
from pyebh.analyze import *  # noqa
from pyebh.simulate import *  # noqa
from pyebh.data import *  # noqa

try:
    from pyebh.version import version as __version__  # noqa
except ImportError:
    __version__ = "unknown"
