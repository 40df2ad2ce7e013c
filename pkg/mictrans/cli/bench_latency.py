import time

import numpy as np
from omegaconf import DictConfig

from mictrans.cli import command
from mictrans.cyclegan import CycleGanModel
from mictrans.dsp import AudioClip, StftConfig
from mictrans.error import ConfigCheck
from mictrans.eval.experiment import treat
from mictrans.logging import CLI_LOG
from mictrans.nncore import Model
from mictrans.util import deterministic


def bench(fn, repeat: int, warmup: int):
    """Wall-time of `fn()` in milliseconds over `repeat` runs after `warmup` discarded ones."""
    for _ in range(warmup):
        fn()
    times = []
    for _ in range(repeat):
        begin = time.perf_counter()
        fn()
        times.append((time.perf_counter() - begin) * 1000)
    return np.array(times)


@command
def main(cfg: DictConfig):
    bench_cfg = cfg["bench"]
    ConfigCheck.gt(bench_cfg["repeat"], 0, "bench.repeat")
    deterministic(bench_cfg["seed"])

    if bench_cfg["translation"] is None:
        stft = StftConfig.from_cfg(cfg["stft"])
        model = CycleGanModel(
            "bench-a", "bench-b", stft, (cfg["patch"]["freq"], cfg["patch"]["time"])
        ).export()
    else:
        model = Model.load_any(bench_cfg["translation"])
        stft = model.stft

    rng = np.random.default_rng(bench_cfg["seed"])
    n = int(bench_cfg["seconds"] * stft.sample_rate_hz)
    clip = AudioClip(0.1 * rng.standard_normal(n), stft.sample_rate_hz, "bench")

    times = bench(lambda: treat(model, clip, stft), bench_cfg["repeat"], bench_cfg["warmup"])
    CLI_LOG.info(
        f"Translating {bench_cfg['seconds']:g} s of audio: median {np.median(times):.1f} ms, "
        f"p95 {np.percentile(times, 95):.1f} ms over {len(times)} runs"
    )


if __name__ == "__main__":
    main()
