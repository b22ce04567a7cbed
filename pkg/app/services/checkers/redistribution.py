"""Invasive checkers for the data-redistribution phase of GroupBy and Join."""

import logging
from typing import Sequence

import numpy as np

from app.schemas.checkers import PermCheckConfig, PermCheckMethod, RejectReason, Verdict
from app.schemas.dataops import JoinMode, KeyValue
from app.schemas.hashing import HashSpec
from app.services.checkers.common import boundary_ok, first_disorder, reject_here, settle
from app.services.checkers.permutation import check_permutation
from app.services.dataops import DEFAULT_OWNER_HASH
from app.services.simnet import Communicator
from app.utils.hashing import as_words, encode_pairs, get_hash

logger = logging.getLogger(__name__)


def pair_elements(pairs: Sequence[KeyValue], config: PermCheckConfig):
    """Pairs as single words for the multiset checkers."""
    words = encode_pairs([k for k, _ in pairs], [v for _, v in pairs], config.hash)
    if config.method is PermCheckMethod.POLYNOMIAL:
        return words.tolist()
    return words


def _owners(pairs: Sequence[KeyValue], spec: HashSpec, p: int) -> np.ndarray:
    if not pairs:
        return np.zeros(0, dtype=np.int64)
    return (get_hash(spec).many(as_words([k for k, _ in pairs])) % np.uint64(p)).astype(np.int64)


async def check_groupby_redistribution(
    comm: Communicator,
    pairs: Sequence[KeyValue],
    redistributed: Sequence[KeyValue],
    config: PermCheckConfig,
    owner_hash: HashSpec = DEFAULT_OWNER_HASH,
) -> Verdict:
    """Permutation check plus every local key owned by this PE under the ownership hash."""
    verdict = await check_permutation(comm, pair_elements(pairs, config), pair_elements(redistributed, config), config)
    if not verdict:
        return verdict
    owners = _owners(redistributed, owner_hash, comm.p)
    detail = None
    if np.any(owners != comm.rank):
        detail = reject_here(comm, RejectReason.WRONG_OWNER)
    return await settle(comm, detail)


async def check_join_redistribution(
    comm: Communicator,
    r: Sequence[KeyValue],
    s: Sequence[KeyValue],
    r_out: Sequence[KeyValue],
    s_out: Sequence[KeyValue],
    mode: JoinMode,
    config: PermCheckConfig,
    owner_hash: HashSpec = DEFAULT_OWNER_HASH,
) -> Verdict:
    """Both relations redistributed correctly and split across PEs by the same partition."""
    for before, after in ((r, r_out), (s, s_out)):
        verdict = await check_permutation(comm, pair_elements(before, config), pair_elements(after, config), config)
        if not verdict:
            return verdict

    detail = None
    if mode is JoinMode.HASH:
        if np.any(_owners(r_out, owner_hash, comm.p) != comm.rank) or np.any(_owners(s_out, owner_hash, comm.p) != comm.rank):
            detail = reject_here(comm, RejectReason.WRONG_OWNER)
        order = [int(o) for o in np.concatenate([_owners(r_out, owner_hash, comm.p), _owners(s_out, owner_hash, comm.p)])]
    else:
        for relation in (r_out, s_out):
            if detail is None and first_disorder(relation, key=lambda kv: kv[0]) is not None:
                detail = reject_here(comm, RejectReason.LOCAL_ORDER)
        order = [k for k, _ in r_out] + [k for k, _ in s_out]

    # largest local key must precede the next PE's smallest, across both relations
    lo, hi = (min(order), max(order)) if order else (None, None)
    if not await boundary_ok(comm, lo, hi, strict=True) and detail is None:
        detail = reject_here(comm, RejectReason.CO_PARTITION)
    return await settle(comm, detail)
