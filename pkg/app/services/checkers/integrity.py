import logging
from typing import Any

from app.schemas.checkers import RejectReason, Verdict
from app.schemas.hashing import HashFamily, HashSpec
from app.services.checkers.common import reject_here, settle
from app.services.simnet import Communicator
from app.utils.hashing import digest

logger = logging.getLogger(__name__)

DEFAULT_REPLICA_HASH = HashSpec(family=HashFamily.TAB64)


def encode_replica(obj: Any) -> bytes:
    """Canonical byte form of a replicated result or certificate."""
    return repr(obj).encode("utf-8")


async def replica_consistency(comm: Communicator, local_copy: bytes, spec: HashSpec = DEFAULT_REPLICA_HASH) -> Verdict:
    """Compare every PE's replica against PE 0's through a broadcast hash."""
    mine = digest(spec, local_copy)
    reference = await comm.broadcast(mine if comm.rank == 0 else None, bits=spec.family.width)
    detail = None if mine == reference else reject_here(comm, RejectReason.REPLICA_MISMATCH)
    verdict = await settle(comm, detail)
    if not verdict:
        logger.debug(f"replica mismatch first seen on PE {verdict.detail.pe}")
    return verdict
