__version__ = '0.1.0'

from .extrapolation.model import ExtrapolationModel
from .fusion.model import FusionModel
from .config import load_config
from .model import NowcastModel
