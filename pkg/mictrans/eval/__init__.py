from mictrans.eval.corpus import (
    CLASSES,
    KEYWORDS,
    UNKNOWN,
    load_speech_commands,
    synthetic_keyword_corpus,
    synthetic_rest_corpus,
)
from mictrans.eval.experiment import (
    EvalReport,
    Pipeline,
    data_amount_sweep,
    epochs_to_psnr_bar,
    evaluate,
    translation_psnr,
)
from mictrans.eval.keyword import KeywordModel, KeywordTrainConfig, train_keyword
from mictrans.eval.metrics import psnr, recovery
