from typing import Any, Callable, Optional

from app.schemas.checkers import RejectReason, Verdict, VerdictDetail
from app.schemas.dataops import WORD_BITS
from app.services.simnet import Communicator

DETAIL_BITS = 4 * 32


def reject_here(comm: Communicator, reason: RejectReason, **extra) -> VerdictDetail:
    return VerdictDetail(reason=reason, pe=comm.rank, **extra)


def _lowest_pe(a, b):
    return a if a[0] <= b[0] else b


async def settle(comm: Communicator, local: Optional[VerdictDetail]) -> Verdict:
    """Agree on a verdict from per-PE findings: OR of rejections, then the lowest rejecting PE's detail."""
    if not await comm.gather_bool_or(local is not None):
        return Verdict.accept()
    mine = (comm.rank, local) if local is not None else (comm.p, None)
    _, detail = await comm.all_reduce(mine, _lowest_pe, bits=DETAIL_BITS)
    return Verdict(accepted=False, detail=detail)


def _max_present(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return max(a, b)


def _in_order(left: Any, right: Any, strict: bool) -> bool:
    return left < right if strict else left <= right


async def boundary_ok(
    comm: Communicator,
    lo: Any,
    hi: Any,
    strict: bool = False,
    bits: int = WORD_BITS,
) -> bool:
    """Whether this PE's largest element is ordered before the next nonempty PE's smallest.

    lo/hi are the local extremes under the partition order, None on an empty PE.
    With no empty PE one element travels to the predecessor; otherwise a prefix-max scan
    skips the empty PEs.
    """
    empty = lo is None
    if await comm.gather_bool_or(empty):
        before = await comm.exclusive_scan(hi, _max_present, bits=bits, identity=None)
        return empty or before is None or _in_order(before, lo, strict)
    if comm.rank > 0:
        comm.send(comm.rank - 1, lo, bits)
    if comm.rank < comm.p - 1:
        successor = await comm.recv(comm.rank + 1)
        return _in_order(hi, successor, strict)
    return True


def first_disorder(items, key: Callable[[Any], Any] = lambda x: x) -> Optional[int]:
    prev = None
    for i, item in enumerate(items):
        k = key(item)
        if prev is not None and k < prev:
            return i
        prev = k
    return None
