import os

SAMPLE_RATE_HZ = 16000
SPEC_MAGIC = b"M2MSPEC1"
CKPT_MAGIC = b"M2MCKPT1"
CKPT_VERSION = 1
MANIFEST_NAME = "manifest.json"

EXIT_CONFIG = 2
EXIT_DATA = 3

MICTRANS_NUM_THREADS = int(os.getenv("MICTRANS_NUM_THREADS", 1))
MICTRANS_RT_CHECK = os.getenv("MICTRANS_RT_CHECK", "1") == "1"
