import asyncio
import inspect
import logging
import operator
from collections import deque
from typing import Any, Callable, Dict, List, NamedTuple, Sequence, Tuple, Union

from app.exceptions import ContractViolation, DeadlockError
from app.schemas.simnet import ClusterConfig, LedgerReport, PeCost

logger = logging.getLogger(__name__)

Bits = Union[int, Callable[[Any], int]]
PeProgram = Callable[..., Any]

_EMPTY = object()


def ceil_log2(p: int) -> int:
    return max(0, (p - 1).bit_length())


def _bits_of(bits: Bits, value: Any) -> int:
    return bits(value) if callable(bits) else bits


class Message(NamedTuple):
    payload: Any
    bits: int
    round: int


class CostLedger:
    """Per-PE communication counters under the alpha-beta model."""

    def __init__(self, p: int, alpha: float = 1.0, beta: float = 1.0, byte_granularity: bool = False):
        self.p = p
        self.alpha = alpha
        self.beta = beta
        self.byte_granularity = byte_granularity
        self.sent_bits = [0] * p
        self.recv_bits = [0] * p
        self.sent_msgs = [0] * p
        self.recv_msgs = [0] * p
        self.time = [0.0] * p
        self.rounds = 0

    def charge(self, src: int, dst: int, bits: int) -> int:
        m = -(-bits // 8) * 8 if self.byte_granularity else bits
        cost = self.alpha + self.beta * m
        self.sent_bits[src] += m
        self.sent_msgs[src] += 1
        self.time[src] += cost
        self.recv_bits[dst] += m
        self.recv_msgs[dst] += 1
        self.time[dst] += cost
        return m

    @property
    def bottleneck_volume(self) -> int:
        return max(max(s, r) for s, r in zip(self.sent_bits, self.recv_bits))

    @property
    def total_bits(self) -> int:
        return sum(self.sent_bits)

    @property
    def messages(self) -> int:
        return sum(self.sent_msgs)

    def report(self) -> LedgerReport:
        return LedgerReport(
            pe=[
                PeCost(
                    sent_bits=self.sent_bits[i],
                    recv_bits=self.recv_bits[i],
                    sent_msgs=self.sent_msgs[i],
                    recv_msgs=self.recv_msgs[i],
                    time=self.time[i],
                )
                for i in range(self.p)
            ],
            bottleneck_volume=self.bottleneck_volume,
            rounds=self.rounds,
        )

    def to_dict(self) -> Dict[str, Any]:
        return self.report().model_dump()


class RunResult(NamedTuple):
    outputs: List[Any]
    ledger: CostLedger


class Communicator:
    """Handle through which one PE program talks to the rest of the cluster.

    send() is buffered and never blocks; recv() suspends until the matching
    message arrives. Collectives are built from send/recv only, so every bit
    they move shows up in the ledger.
    """

    def __init__(self, cluster: "Cluster", rank: int):
        self.cluster = cluster
        self.rank = rank
        self.p = cluster.p

    def _check_peer(self, pe: int) -> None:
        if not isinstance(pe, int) or not 0 <= pe < self.p or pe == self.rank:
            raise ContractViolation(f"PE {self.rank}: invalid peer {pe!r} (p={self.p})")

    def send(self, to: int, payload: Any, bits: int) -> None:
        self._check_peer(to)
        if bits < 0:
            raise ContractViolation(f"PE {self.rank}: negative message size {bits}")
        self.cluster._deliver(self.rank, to, payload, int(bits))

    async def recv_message(self, src: int) -> Message:
        self._check_peer(src)
        return await self.cluster._receive(src, self.rank)

    async def recv(self, src: int) -> Any:
        return (await self.recv_message(src)).payload

    async def _recv_checked(self, src: int, bits: Bits, what: str) -> Any:
        msg = await self.recv_message(src)
        if not callable(bits) and msg.bits != bits:
            raise ContractViolation(
                f"{what}: PE {self.rank} expected {bits}-bit contributions, PE {src} sent {msg.bits} bits"
            )
        return msg.payload

    async def reduce(self, value: Any, op: Callable[[Any, Any], Any], bits: Bits, root: int = 0) -> Any:
        """Binomial-tree reduction; the root gets op folded in rank order, other PEs get None."""
        p = self.p
        rel = (self.rank - root) % p
        acc = value
        mask = 1
        while mask < p:
            if rel & mask:
                self.send((rel - mask + root) % p, acc, _bits_of(bits, acc))
                return None
            if rel + mask < p:
                other = await self._recv_checked((rel + mask + root) % p, bits, "reduce")
                acc = op(acc, other)
            mask <<= 1
        return acc

    async def broadcast(self, value: Any, bits: Bits, root: int = 0) -> Any:
        p = self.p
        rel = (self.rank - root) % p
        mask = 1
        while mask < p:
            if rel & mask:
                value = await self.recv((rel - mask + root) % p)
                break
            mask <<= 1
        mask >>= 1
        while mask > 0:
            if rel + mask < p:
                self.send((rel + mask + root) % p, value, _bits_of(bits, value))
            mask >>= 1
        return value

    async def all_reduce(self, value: Any, op: Callable[[Any, Any], Any], bits: Bits) -> Any:
        """Dissemination all-reduction for a commutative op, ceil(log2 p) rounds for any p.

        W covers 2^k consecutive PEs ending at this one; T covers (p mod 2^k) of them.
        After the last round T (or W when p is a power of two) covers exactly p PEs.
        """
        p, rank = self.p, self.rank
        levels = ceil_log2(p)
        w, t = value, None
        for k in range(levels):
            dist = 1 << k
            bit = (p >> k) & 1
            need_w = k + 1 < levels or p == 1 << levels
            need_t = bool(bit) and t is not None
            parts = (w if need_w else None, t if need_t else None)
            size = (_bits_of(bits, w) if need_w else 0) + (_bits_of(bits, t) if need_t else 0)
            self.send((rank + dist) % p, parts, size)
            msg = await self.recv_message((rank - dist) % p)
            rw, rt = msg.payload
            if not callable(bits):
                expected = bits * ((rw is not None) + (rt is not None))
                if msg.bits != expected:
                    raise ContractViolation(
                        f"all_reduce: PE {rank} expected {expected} bits, got {msg.bits} from PE {(rank - dist) % p}"
                    )
            if bit:
                t = w if rt is None else op(w, rt)
            if rw is not None:
                w = op(w, rw)
        return w if p == 1 << levels else t

    async def gather_bool_or(self, flag: bool) -> bool:
        return await self.all_reduce(bool(flag), operator.or_, bits=1)

    async def exclusive_scan(self, value: Any, op: Callable[[Any, Any], Any], bits: Bits, identity: Any) -> Any:
        """Hillis-Steele scan; returns op over the values of all lower-ranked PEs."""
        incl, excl = value, identity
        dist = 1
        while dist < self.p:
            if self.rank + dist < self.p:
                self.send(self.rank + dist, incl, _bits_of(bits, incl))
            if self.rank - dist >= 0:
                got = await self._recv_checked(self.rank - dist, bits, "scan")
                excl = op(got, excl)
                incl = op(got, incl)
            dist <<= 1
        return excl

    async def exclusive_prefix_sum(self, count: int, bits: int = 64) -> int:
        return await self.exclusive_scan(count, operator.add, bits, 0)

    async def all_to_all(self, payloads: Sequence[Any], bits: Bits) -> List[Any]:
        """Direct delivery in p-1 rounds: XOR partners for power-of-two p, ring shifts otherwise."""
        p, rank = self.p, self.rank
        if len(payloads) != p:
            raise ContractViolation(f"all_to_all: PE {rank} supplied {len(payloads)} slots for p={p}")
        out: List[Any] = [None] * p
        out[rank] = payloads[rank]
        power_of_two = p & (p - 1) == 0
        for r in range(1, p):
            if power_of_two:
                dst = src = rank ^ r
            else:
                dst, src = (rank + r) % p, (rank - r) % p
            self.send(dst, payloads[dst], _bits_of(bits, payloads[dst]))
            out[src] = await self.recv(src)
        return out

    async def all_gather(self, value: Any, bits: Bits) -> List[Any]:
        slots = tuple(value if i == self.rank else _EMPTY for i in range(self.p))

        def merge(a: Tuple, b: Tuple) -> Tuple:
            return tuple(x if x is not _EMPTY else y for x, y in zip(a, b))

        def size(v: Tuple) -> int:
            return sum(_bits_of(bits, x) for x in v if x is not _EMPTY)

        return list(await self.all_reduce(slots, merge, size))


class Cluster:
    """Deterministic simulated cluster of p PEs.

    PE programs are coroutines run as asyncio tasks created in pe_id order;
    one run() at a time per instance.
    """

    def __init__(self, config: ClusterConfig):
        self.config = config
        self.p = config.p
        self.ledger = CostLedger(self.p, config.alpha, config.beta, config.byte_granularity)

    def _reset(self) -> None:
        self.ledger = CostLedger(self.p, self.config.alpha, self.config.beta, self.config.byte_granularity)
        self._boxes: Dict[Tuple[int, int], deque] = {}
        self._waiters: Dict[Tuple[int, int], asyncio.Future] = {}
        self._blocked: Dict[int, int] = {}
        self._live: set[int] = set()
        self._now = [0] * self.p
        self._last_send = [0] * self.p
        self._last_recv = [0] * self.p

    def _deliver(self, src: int, dst: int, payload: Any, bits: int) -> None:
        self.ledger.charge(src, dst, bits)
        t = max(self._now[src], self._last_send[src]) + 1
        self._last_send[src] = t
        msg = Message(payload, bits, t)
        waiter = self._waiters.pop((src, dst), None)
        if waiter is not None and not waiter.done():
            del self._blocked[dst]
            waiter.set_result(msg)
        else:
            self._boxes.setdefault((src, dst), deque()).append(msg)

    async def _receive(self, src: int, dst: int) -> Message:
        box = self._boxes.get((src, dst))
        if box:
            msg = box.popleft()
        else:
            future = asyncio.get_running_loop().create_future()
            self._waiters[(src, dst)] = future
            self._blocked[dst] = src
            self._check_deadlock()
            msg = await future
        t = max(msg.round, self._last_recv[dst] + 1)
        self._last_recv[dst] = t
        self._now[dst] = max(self._now[dst], t)
        return msg

    def _check_deadlock(self) -> None:
        if not self._live or not all(pe in self._blocked for pe in self._live):
            return
        error = DeadlockError(list(self._live))
        logger.debug(f"{error} (waiting on {self._blocked})")
        for future in self._waiters.values():
            if not future.done():
                future.set_exception(error)
        self._waiters.clear()
        self._blocked.clear()

    def _finished(self, pe: int) -> None:
        self._live.discard(pe)
        self._check_deadlock()

    async def _main(self, program: PeProgram, per_pe: Sequence[Sequence[Any]], shared: Dict[str, Any]) -> List[Any]:
        tasks = []
        self._live = set(range(self.p))
        for pe in range(self.p):
            comm = Communicator(self, pe)
            args = [inputs[pe] for inputs in per_pe]
            task = asyncio.create_task(program(comm, *args, **shared), name=f"pe-{pe}")
            task.add_done_callback(lambda _, pe=pe: self._finished(pe))
            tasks.append(task)
        results = await asyncio.gather(*tasks, return_exceptions=True)
        errors = [r for r in results if isinstance(r, BaseException)]
        if errors:
            # report the root cause, not the deadlocks it left behind
            primary = next((e for e in errors if not isinstance(e, DeadlockError)), errors[0])
            raise primary
        return results

    def run(self, program: PeProgram, /, *per_pe: Sequence[Any], **shared: Any) -> RunResult:
        """Run `program(comm, *slices, **shared)` on every PE; each positional input has p slices."""
        if not inspect.iscoroutinefunction(program):
            raise ContractViolation(f"{getattr(program, '__name__', program)!r} is not an async PE program")
        for i, inputs in enumerate(per_pe):
            if len(inputs) != self.p:
                raise ContractViolation(f"input {i} has {len(inputs)} slices for p={self.p}")
        self._reset()
        outputs = asyncio.run(self._main(program, per_pe, shared))
        self.ledger.rounds = max(max(n, s) for n, s in zip(self._now, self._last_send))
        leftover = sum(len(box) for box in self._boxes.values())
        if leftover:
            logger.warning(f"{program.__name__}: {leftover} messages left undelivered")
        logger.debug(
            f"{program.__name__} on {self.p} PEs: bottleneck {self.ledger.bottleneck_volume} bits, "
            f"{self.ledger.rounds} rounds"
        )
        return RunResult(outputs, self.ledger)


def run(config: ClusterConfig, program: PeProgram, /, *per_pe: Sequence[Any], **shared: Any) -> RunResult:
    return Cluster(config).run(program, *per_pe, **shared)
