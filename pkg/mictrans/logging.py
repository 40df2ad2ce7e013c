import logging

DSP_LOG = logging.getLogger("dsp")
MIC_LOG = logging.getLogger("mic")
NN_LOG = logging.getLogger("nn")
GAN_LOG = logging.getLogger("gan")
CAL_LOG = logging.getLogger("cal")
EVAL_LOG = logging.getLogger("eval")
CLI_LOG = logging.getLogger("cli")
CORE_LOG = logging.getLogger("core")
