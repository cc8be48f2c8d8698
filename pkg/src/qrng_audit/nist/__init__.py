"""SP 800-22 statistical test battery."""

from .battery import (
    EXCURSION_STATES,
    TEST_NAMES,
    TEST_ORDER,
    VARIANT_STATES,
    SuiteReport,
    aperiodic_templates,
    approximate_entropy,
    binary_matrix_rank,
    block_frequency,
    cumulative_sums,
    linear_complexity,
    longest_run_in_block,
    maurers_universal,
    monobit,
    non_overlapping_template,
    overlapping_template,
    random_excursions,
    random_excursions_variant,
    row_labels,
    run_all,
    run_test,
    runs,
    serial,
    spectral_dft,
    table_rows,
)
from .core import NON_RANDOM, NOT_APPLICABLE, RANDOM, SuiteConfig, TestResult, verdict_for

__all__ = [
    "EXCURSION_STATES",
    "NON_RANDOM",
    "NOT_APPLICABLE",
    "RANDOM",
    "SuiteConfig",
    "SuiteReport",
    "TEST_NAMES",
    "TEST_ORDER",
    "TestResult",
    "VARIANT_STATES",
    "aperiodic_templates",
    "approximate_entropy",
    "binary_matrix_rank",
    "block_frequency",
    "cumulative_sums",
    "linear_complexity",
    "longest_run_in_block",
    "maurers_universal",
    "monobit",
    "non_overlapping_template",
    "overlapping_template",
    "random_excursions",
    "random_excursions_variant",
    "row_labels",
    "run_all",
    "run_test",
    "runs",
    "serial",
    "spectral_dft",
    "table_rows",
    "verdict_for",
]
