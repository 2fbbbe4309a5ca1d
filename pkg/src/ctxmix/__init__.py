"""Maximum-entropy context mixing as a ground-state search on a parameter grid."""
from .errors import CtxMixError, NumericalError, ValidationError
from .grids import GridPoint, GridSpec, SolveResult
from .instances import Instance, instance_downsized, instance_e1
from .mixing import PenaltyConfig, max_entropy_mix
from .models import ContextModelSet, Distribution, SampleSpace, make_distribution

__version__ = "0.1.0"
