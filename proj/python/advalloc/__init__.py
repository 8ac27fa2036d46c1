"""Learned online-allocation laboratory.

Thin wrapper over the C++ core: AdWords instances and input families, the
LP offline optimum, baseline and learned allocation policies, adversarial
co-training, and the ski-rental best-response pipeline.
"""

from advalloc._core import (
    Instance,
    Policy,
    adv_search,
    eval_table,
    eval_table_csv,
    evaluate,
    offline_optimum,
    sample_instance,
    ski_cdf,
    ski_optimal_cr,
    ski_optimal_strategy,
    ski_sup_distance,
    ski_train,
    train,
)

__all__ = [
    "Instance",
    "Policy",
    "adv_search",
    "eval_table",
    "eval_table_csv",
    "evaluate",
    "offline_optimum",
    "sample_instance",
    "ski_cdf",
    "ski_optimal_cr",
    "ski_optimal_strategy",
    "ski_sup_distance",
    "ski_train",
    "train",
]
