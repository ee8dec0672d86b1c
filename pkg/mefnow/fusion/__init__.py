from .networks import GeneratorParams, DiscriminatorParams, generator_forward, discriminator_forward
from .losses import bce, loss_d, loss_g
from .dataset import FusionSample, build_fusion_dataset, read_fusion_dataset, write_fusion_dataset
from .training import GanHyper, train_gan, discriminator_accuracy
from .model import FusionModel, VARIANTS
