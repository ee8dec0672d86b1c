from .tape import Tape, Node
from .optim import Adam, AdamState, adam_step
from .checkpoint import read_checkpoint, write_checkpoint
from . import ops
