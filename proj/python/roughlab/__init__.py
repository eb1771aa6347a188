"""Level-2 rough-path arithmetic and area-anomaly estimation for hidden
Markov walks.

Everything lives in the compiled core; this package re-exports it.
"""

from roughlab._core import *  # noqa: F401,F403
from roughlab._core import __all__  # noqa: F401
