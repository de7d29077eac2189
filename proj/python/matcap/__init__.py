from ._matcap import *  # noqa: F401,F403
from ._matcap import __doc__  # noqa: F401
