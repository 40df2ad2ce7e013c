from dataclasses import replace
from pathlib import Path

from omegaconf import DictConfig

from mictrans.cli import command
from mictrans.dsp import StftConfig
from mictrans.eval.corpus import (
    load_speech_commands,
    synthetic_keyword_corpus,
    synthetic_rest_corpus,
)
from mictrans.logging import CLI_LOG
from mictrans.micsim import generate_domains, get_profile
from mictrans.util import mkdir, set_seed

REST_SUFFIX = "_rest"


@command
def main(cfg: DictConfig):
    sim_cfg = cfg["simulate"]
    stft = StftConfig.from_cfg(cfg["stft"])
    set_seed(sim_cfg["seed"])

    synthetic = sim_cfg["corpus"] == "synthetic"
    if synthetic:
        clips, labels = synthetic_keyword_corpus(
            sim_cfg["per_class"], sim_cfg["seed"], sample_rate_hz=stft.sample_rate_hz
        )
    else:
        clips, labels = load_speech_commands(
            sim_cfg["corpus"], max_per_class=sim_cfg["max_per_class"]
        )

    profiles = [get_profile(name, stft) for name in sim_cfg["profiles"]]
    root = Path(sim_cfg["root"])
    mkdir(root, yes=sim_cfg["yes"])

    domains = generate_domains(
        clips, profiles, sim_cfg["unpaired"], sim_cfg["split_seed"], stft, labels
    )
    for domain in domains:
        domain.dump(root)

    if sim_cfg["rest_clips"] > 0:
        if not synthetic:
            CLI_LOG.warning("Held-out translation clips are only generated for synthetic corpora")
            return
        rest = synthetic_rest_corpus(
            sim_cfg["rest_clips"], sim_cfg["seed"], stft.sample_rate_hz
        )
        # Translation data is always unpaired across microphones.
        for domain in generate_domains(rest, profiles, True, sim_cfg["split_seed"], stft):
            replace(
                domain,
                domain_id=domain.domain_id + REST_SUFFIX,
                unpaired_with={n + REST_SUFFIX for n in domain.unpaired_with},
            ).dump(root)

    CLI_LOG.info(f"Domains written to {root}: " + ", ".join(d.domain_id for d in domains))


if __name__ == "__main__":
    main()
