"""Proximal alternating direction networks and classical splitting baselines."""
from .tensor import *  # noqa: F401,F403
from .energy import *  # noqa: F401,F403
from .network import *  # noqa: F401,F403
from .solver import *  # noqa: F401,F403
from .baselines import *  # noqa: F401,F403
from .problems import *  # noqa: F401,F403
from .config import *  # noqa: F401,F403
from .experiment import *  # noqa: F401,F403
