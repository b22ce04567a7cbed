from app.services.checkers.aggregation import (
    check_average,
    check_count_agg,
    check_max,
    check_median,
    check_min,
    check_min_bitvector,
    check_sum_agg,
    condensed_reduce,
    condensed_table,
    draw_moduli,
)
from app.services.checkers.integrity import encode_replica, replica_consistency
from app.services.checkers.permutation import (
    check_merge,
    check_permutation,
    check_permutation_hash,
    check_permutation_poly,
    check_sorted,
    check_union,
    check_zip,
    poly_fingerprint,
)
from app.services.checkers.redistribution import check_groupby_redistribution, check_join_redistribution

__all__ = [
    "check_average",
    "check_count_agg",
    "check_groupby_redistribution",
    "check_join_redistribution",
    "check_max",
    "check_median",
    "check_merge",
    "check_min",
    "check_min_bitvector",
    "check_permutation",
    "check_permutation_hash",
    "check_permutation_poly",
    "check_sorted",
    "check_sum_agg",
    "check_union",
    "check_zip",
    "condensed_reduce",
    "condensed_table",
    "draw_moduli",
    "encode_replica",
    "poly_fingerprint",
    "replica_consistency",
]
