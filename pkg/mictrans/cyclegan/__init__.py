from mictrans.cyclegan.loss import (
    loss_adv_generator,
    loss_cycle,
    loss_discriminator,
    loss_identity,
    total_generator_loss,
)
from mictrans.cyclegan.model import (
    CycleGanModel,
    Direction,
    TrainConfig,
    TrainMode,
    TranslatorExport,
)
from mictrans.cyclegan.nets import Discriminator, Generator
from mictrans.cyclegan.train import TrainLog, train
from mictrans.cyclegan.translate import translate
