from .frames import FrameSequence
from .synthetic import SyntheticConfig, gen_synthetic
from .windows import WindowSpec, window_train, window_test, split_io
from .fseq import read_fseq, write_fseq
