from mictrans.nncore.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from mictrans.nncore.gradcheck import GradCheckReport, gradient_check
from mictrans.nncore.layers import (
    LayerKind,
    Mode,
    batch_norm,
    conv2d,
    dense,
    l1_mean,
    leaky_relu,
    lsq_mean,
    make_layer,
    relu,
    tanh,
    transpose_conv2d,
)
from mictrans.nncore.model import Model
from mictrans.nncore.optim import AdamConfig, AdamState, adam_step, make_adam
