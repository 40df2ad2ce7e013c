import os
import random
import shutil
from concurrent.futures import ThreadPoolExecutor
from enum import Enum
from typing import Callable, List, Sequence, Type, TypeVar, Union

import numpy as np
import torch

from mictrans.error import ConfigError
from mictrans.logging import CORE_LOG
from mictrans.macro import MICTRANS_NUM_THREADS

T = TypeVar("T")
R = TypeVar("R")
E = TypeVar("E", bound=Enum)

SEED_SETTERS = {
    "random": random.seed,
    "numpy": np.random.seed,
    "torch": torch.manual_seed,
}


def set_seed(seed: int, names: List = None):
    if names is None:
        names = SEED_SETTERS.keys()
    for name in names:
        SEED_SETTERS[name](seed)


def deterministic(seed: int) -> None:
    """Single-threaded, deterministic kernels and every registered RNG seeded."""
    torch.set_num_threads(1)
    torch.use_deterministic_algorithms(True)
    set_seed(seed)


def mkdir(dir: os.PathLike, yes=False):
    if os.path.exists(dir):
        decision = ""
        if yes:
            decision = "y"
        while decision.lower() not in ["y", "n"]:
            CORE_LOG.warning(
                "Output folder already exists. Press [Y/N] to continue or exit..."
            )
            decision = input()
        if decision.lower() == "n":
            CORE_LOG.error(f"{dir} already exist... Remove it or use a different name.")
            raise ConfigError(f"Output folder {dir} already exists")
        else:
            shutil.rmtree(dir)

    os.makedirs(dir)


def parse_enum(enum_cls: Type[E], value) -> E:
    try:
        return enum_cls(str(value).lower())
    except ValueError:
        raise ConfigError(
            f"Unknown {enum_cls.__name__} {value!r}. Choose from {[e.value for e in enum_cls]}"
        ) from None


def all_finite(*arrays: Union[np.ndarray, torch.Tensor]) -> bool:
    for a in arrays:
        if isinstance(a, torch.Tensor):
            if not torch.isfinite(a).all():
                return False
        elif not np.isfinite(a).all():
            return False
    return True


def ordered_map(
    fn: Callable[[T], R], items: Sequence[T], workers: int = None
) -> List[R]:
    """`map` over a thread pool; results keep the order of `items`."""
    workers = MICTRANS_NUM_THREADS if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


