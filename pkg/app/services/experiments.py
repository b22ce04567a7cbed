"""Workloads, checker scenarios and the accuracy / cost experiment drivers."""

import logging
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Callable, FrozenSet, List, NamedTuple, Optional, Tuple

import numpy as np
from joblib import Parallel, delayed

from app.config import settings
from app.exceptions import IncompatibleExperiment
from app.schemas.checkers import PermCheckMethod
from app.schemas.dataops import JoinMode, KeyValue
from app.schemas.experiments import CostRow, ExperimentResult, Workload, WorkloadKind, WorkloadSummary
from app.schemas.faults import PERM_KINDS, SUM_KINDS, Manipulation, ManipulationKind, TargetStream
from app.schemas.hashing import HashFamily
from app.schemas.simnet import ClusterConfig, LedgerReport
from app.services import checkers, dataops
from app.services.faults import manipulate_slices
from app.services.simnet import run
from app.utils.config_grammar import format_perm_config, format_sum_config, parse_perm_config, parse_sum_config
from app.utils.rng import FAULT_STREAM, MODULUS_STREAM, TABLE_STREAM, TRIAL_STREAM, VALUE_STREAM, WORKLOAD_STREAM, derive_seed, make_rng

logger = logging.getLogger(__name__)


class ConfigKind(str, Enum):
    SUM = "sum"
    PERM = "perm"


class Element(str, Enum):
    PAIRS = "pairs"
    WORDS = "words"


DEFAULT_CONFIGS = {ConfigKind.SUM: "4x4m3", ConfigKind.PERM: "tab32"}


# ---------- workloads ----------


@lru_cache(maxsize=8)
def _power_law_cdf(distinct_keys: int) -> np.ndarray:
    weights = 1.0 / np.arange(1, distinct_keys + 1, dtype=np.float64)
    cdf = np.cumsum(weights)
    return cdf / cdf[-1]


def _deal(values: np.ndarray, p: int) -> List[List[int]]:
    return [values[i::p].tolist() for i in range(p)]


def gen_workload(w: Workload, p: int) -> List[List[int]]:
    """Draw `w.n` keys and deal them round-robin to `p` PEs.

    Power-law keys are ranks 1..N with frequency 1/(k*H_N), sampled by
    binary search in the cumulative weights.
    """
    rng = make_rng(w.seed, WORKLOAD_STREAM)
    if w.n == 0 or (w.kind is WorkloadKind.POWER_LAW and w.distinct_keys == 0):
        return [[] for _ in range(p)]
    if w.kind is WorkloadKind.POWER_LAW:
        ranks = np.searchsorted(_power_law_cdf(w.distinct_keys), rng.random(w.n), side="right")
        keys = np.minimum(ranks, w.distinct_keys - 1) + 1
    else:
        keys = rng.integers(w.lo, w.hi, size=w.n, endpoint=True, dtype=np.uint64)
    return _deal(keys, p)


def gen_pairs(w: Workload, p: int, value_max: Optional[int] = None) -> List[List[KeyValue]]:
    """Workload keys paired with uniform values in [1, value_max]."""
    value_max = value_max or settings.VALUE_MAX
    keys = gen_workload(w, p)
    rng = make_rng(w.seed, VALUE_STREAM)
    values = _deal(rng.integers(1, value_max, size=w.n, endpoint=True), p)
    return [[KeyValue(k, v) for k, v in zip(ks, vs)] for ks, vs in zip(keys, values)]


def _second(w: Workload) -> Workload:
    return w.model_copy(update={"seed": derive_seed(w.seed, WORKLOAD_STREAM, 1)})


def summarize_workload(w: Workload, p: int, head: int = 10) -> WorkloadSummary:
    slices = gen_workload(w, p)
    counts = Counter(k for part in slices for k in part)
    return WorkloadSummary(
        kind=w.kind,
        pe_sizes=[len(part) for part in slices],
        distinct=len(counts),
        top_keys=[[k, c] for k, c in counts.most_common(head)],
    )


# ---------- scenarios ----------


class Instance(NamedTuple):
    """Per-PE input and output streams of one dataop run; each stream holds p slices."""

    inputs: List[List[list]]
    outputs: List[List[list]]


@dataclass(frozen=True)
class Scenario:
    name: str
    element: Element
    config_kind: Optional[ConfigKind]
    # manipulations that are guaranteed to make the checked output wrong
    kinds: FrozenSet[ManipulationKind]
    inputs: Callable[[Workload, int], List[List[list]]]
    dataop: Callable
    checker: Callable
    output_element: Optional[Element] = None

    def default_workload(self) -> WorkloadKind:
        return WorkloadKind.POWER_LAW if self.element is Element.PAIRS else WorkloadKind.UNIFORM


def _pairs_input(w: Workload, p: int):
    return [gen_pairs(w, p)]


def _two_pairs_input(w: Workload, p: int):
    return [gen_pairs(w, p), gen_pairs(_second(w), p)]


def _words_input(w: Workload, p: int):
    return [gen_workload(w, p)]


def _two_words_input(w: Workload, p: int):
    return [gen_workload(w, p), gen_workload(_second(w), p)]


async def _sum_op(comm, pairs):
    return (await dataops.sum_aggregate(comm, pairs),)


async def _sum_check(comm, pairs, output, config=None):
    return await checkers.check_sum_agg(comm, pairs, output, config)


async def _count_op(comm, pairs):
    return (await dataops.count_aggregate(comm, pairs),)


async def _count_check(comm, pairs, output, config=None):
    return await checkers.check_count_agg(comm, pairs, output, config)


async def _average_op(comm, pairs):
    return (await dataops.average_aggregate(comm, pairs),)


async def _average_check(comm, pairs, output, config=None):
    return await checkers.check_average(comm, pairs, output, config)


async def _min_op(comm, pairs):
    return await dataops.min_aggregate(comm, pairs)


async def _min_check(comm, pairs, minima, certificate, config=None):
    return await checkers.check_min(comm, pairs, minima, certificate)


async def _min_bitvector_check(comm, pairs, minima, certificate, config=None):
    return await checkers.check_min_bitvector(comm, pairs, minima)


async def _max_op(comm, pairs):
    return await dataops.max_aggregate(comm, pairs)


async def _max_check(comm, pairs, maxima, certificate, config=None):
    return await checkers.check_max(comm, pairs, maxima, certificate)


async def _median_op(comm, pairs):
    return (await dataops.median_aggregate(comm, pairs),)


async def _median_check(comm, pairs, assertion, config=None):
    return await checkers.check_median(comm, pairs, assertion, config)


async def _sort_op(comm, words):
    return (await dataops.sort(comm, words),)


async def _permutation_check(comm, words, output, config=None):
    return await checkers.check_permutation(comm, words, output, config)


async def _sort_check(comm, words, output, config=None):
    return await checkers.check_sorted(comm, words, output, config)


async def _zip_op(comm, s1, s2):
    return (await dataops.zip_sequences(comm, s1, s2),)


async def _zip_check(comm, s1, s2, zipped, config=None):
    return await checkers.check_zip(comm, s1, s2, zipped, config)


async def _union_op(comm, s1, s2):
    return (await dataops.union(comm, s1, s2),)


async def _union_check(comm, s1, s2, output, config=None):
    return await checkers.check_union(comm, s1, s2, output, config)


async def _merge_op(comm, s1, s2):
    return (await dataops.merge(comm, s1, s2),)


async def _merge_check(comm, s1, s2, output, config=None):
    return await checkers.check_merge(comm, s1, s2, output, config)


async def _groupby_op(comm, pairs):
    return (await dataops.groupby_redistribute(comm, pairs),)


async def _groupby_check(comm, pairs, output, config=None):
    return await checkers.check_groupby_redistribution(comm, pairs, output, config)


async def _join_op(comm, r, s):
    return await dataops.join_redistribute(comm, r, s, JoinMode.HASH)


async def _join_check(comm, r, s, r_out, s_out, config=None):
    return await checkers.check_join_redistribution(comm, r, s, r_out, s_out, JoinMode.HASH, config)


async def _join_sortmerge_op(comm, r, s):
    return await dataops.join_redistribute(comm, r, s, JoinMode.SORT_MERGE)


async def _join_sortmerge_check(comm, r, s, r_out, s_out, config=None):
    return await checkers.check_join_redistribution(comm, r, s, r_out, s_out, JoinMode.SORT_MERGE, config)


# count ignores values, so only key moves are guaranteed to change it
_KEY_KINDS = frozenset({ManipulationKind.RAND_KEY, ManipulationKind.INC_KEY, ManipulationKind.INC_DEC})
_NONE: FrozenSet[ManipulationKind] = frozenset()

SCENARIOS = {
    s.name: s
    for s in [
        Scenario("sum", Element.PAIRS, ConfigKind.SUM, SUM_KINDS, _pairs_input, _sum_op, _sum_check, Element.PAIRS),
        Scenario("count", Element.PAIRS, ConfigKind.SUM, _KEY_KINDS, _pairs_input, _count_op, _count_check, Element.PAIRS),
        Scenario("average", Element.PAIRS, ConfigKind.SUM, SUM_KINDS, _pairs_input, _average_op, _average_check),
        Scenario("min", Element.PAIRS, None, _NONE, _pairs_input, _min_op, _min_check),
        Scenario("min_bitvector", Element.PAIRS, None, _NONE, _pairs_input, _min_op, _min_bitvector_check),
        Scenario("max", Element.PAIRS, None, _NONE, _pairs_input, _max_op, _max_check),
        Scenario("median", Element.PAIRS, ConfigKind.SUM, _NONE, _pairs_input, _median_op, _median_check),
        Scenario("permutation", Element.WORDS, ConfigKind.PERM, PERM_KINDS, _words_input, _sort_op, _permutation_check, Element.WORDS),
        Scenario("sort", Element.WORDS, ConfigKind.PERM, PERM_KINDS, _words_input, _sort_op, _sort_check, Element.WORDS),
        Scenario("zip", Element.WORDS, ConfigKind.PERM, PERM_KINDS, _two_words_input, _zip_op, _zip_check),
        Scenario("union", Element.WORDS, ConfigKind.PERM, PERM_KINDS, _two_words_input, _union_op, _union_check, Element.WORDS),
        Scenario("merge", Element.WORDS, ConfigKind.PERM, PERM_KINDS, _two_words_input, _merge_op, _merge_check, Element.WORDS),
        Scenario("groupby", Element.PAIRS, ConfigKind.PERM, SUM_KINDS, _pairs_input, _groupby_op, _groupby_check, Element.PAIRS),
        Scenario("join", Element.PAIRS, ConfigKind.PERM, SUM_KINDS, _two_pairs_input, _join_op, _join_check),
        Scenario("join_sortmerge", Element.PAIRS, ConfigKind.PERM, SUM_KINDS, _two_pairs_input, _join_sortmerge_op, _join_sortmerge_check),
    ]
}


def get_scenario(name: str) -> Scenario:
    try:
        return SCENARIOS[name]
    except KeyError:
        raise IncompatibleExperiment(f"Unknown checker: {name} (choose from {', '.join(SCENARIOS)})") from None


def configure(scenario: Scenario, text: Optional[str], seed: int, hash_family: HashFamily = HashFamily.CRC32C):
    """Parse `text` for the scenario's checker with hash tables and moduli drawn from `seed`.

    Returns (config, normalized name, expected failure bound).
    """
    if scenario.config_kind is None:
        return None, "-", 0.0
    text = text or DEFAULT_CONFIGS[scenario.config_kind]
    if scenario.config_kind is ConfigKind.SUM:
        config = parse_sum_config(
            text,
            hash_seed=derive_seed(seed, TABLE_STREAM),
            modulus_seed=derive_seed(seed, MODULUS_STREAM),
            default_hash=hash_family,
        )
        return config, format_sum_config(config), config.delta
    config = parse_perm_config(text, seed=derive_seed(seed, TABLE_STREAM))
    if scenario.name == "zip" and config.method is PermCheckMethod.POLYNOMIAL:
        raise IncompatibleExperiment("the zip checker needs a hash configuration, not poly")
    return config, format_perm_config(config), config.expected_delta


def build_instance(scenario: Scenario, w: Workload, cluster: ClusterConfig) -> Instance:
    inputs = scenario.inputs(w, cluster.p)
    result = run(cluster, scenario.dataop, *inputs)
    outputs = [list(stream) for stream in zip(*result.outputs)]
    logger.debug(f"{scenario.name}: dataop bottleneck {result.ledger.bottleneck_volume} bits")
    return Instance(inputs, outputs)


def check_compatible(scenario: Scenario, m: Optional[Manipulation]) -> None:
    if m is None:
        return
    if not scenario.kinds:
        raise IncompatibleExperiment(f"{scenario.name} only supports correct runs (no manipulator)")
    if m.target is TargetStream.INPUT:
        allowed = scenario.kinds
    elif scenario.output_element is None:
        raise IncompatibleExperiment(f"{scenario.name} outputs cannot be manipulated")
    else:
        allowed = SUM_KINDS if scenario.output_element is Element.PAIRS else PERM_KINDS
    if m.kind not in allowed:
        raise IncompatibleExperiment(f"{m.name} is not a meaningful corruption for the {scenario.name} checker")


def corrupt(scenario: Scenario, instance: Instance, m: Manipulation) -> Instance:
    """Apply `m` to the first input stream (or first output stream) of the instance."""
    inputs, outputs = list(instance.inputs), list(instance.outputs)
    if m.target is TargetStream.INPUT:
        inputs[0] = manipulate_slices(inputs[0], m, pairs=scenario.element is Element.PAIRS)
    else:
        outputs[0] = manipulate_slices(outputs[0], m, pairs=scenario.output_element is Element.PAIRS)
    return Instance(inputs, outputs)


def check_instance(scenario: Scenario, instance: Instance, config, cluster: ClusterConfig):
    result = run(cluster, scenario.checker, *instance.inputs, *instance.outputs, config=config)
    return result.outputs[0], result.ledger


# ---------- experiments ----------


def _run_trials(
    name: str,
    workload: Workload,
    config_text: Optional[str],
    manipulator: Optional[str],
    target: TargetStream,
    hash_family: HashFamily,
    cluster: ClusterConfig,
    seed: int,
    trials: List[int],
) -> Tuple[int, Optional[LedgerReport]]:
    scenario = get_scenario(name)
    failures = 0
    ledger = None
    for trial in trials:
        trial_seed = derive_seed(seed, TRIAL_STREAM, trial)
        config, _, _ = configure(scenario, config_text, trial_seed, hash_family)
        fresh = workload.model_copy(update={"seed": derive_seed(workload.seed, WORKLOAD_STREAM, trial)})
        checked = build_instance(scenario, fresh, cluster)
        if manipulator is not None:
            m = Manipulation.parse(manipulator, seed=derive_seed(trial_seed, FAULT_STREAM), target=target)
            checked = corrupt(scenario, checked, m)
        verdict, trial_ledger = check_instance(scenario, checked, config, cluster)
        if ledger is None:
            ledger = trial_ledger.report()
        # a manipulated run must be rejected, a correct one accepted
        failed = verdict.accepted if manipulator is not None else not verdict.accepted
        failures += failed
        logger.debug(f"{name} trial {trial}: {'accept' if verdict.accepted else verdict.detail}")
    return failures, ledger


def run_accuracy(
    checker: str,
    config: Optional[str],
    workload: Workload,
    manipulator: Optional[str],
    trials: int,
    p: int,
    seed: int,
    target: TargetStream = TargetStream.INPUT,
    hash_family: HashFamily = HashFamily.CRC32C,
    n_jobs: int = 1,
    cluster: Optional[ClusterConfig] = None,
    full_ledger: bool = False,
) -> ExperimentResult:
    """Count false accepts of a checker over independently seeded trials.

    Every trial reseeds the workload, reruns the dataop on it, draws fresh hash tables,
    moduli and manipulation targets and checks the corrupted instance. Without a
    manipulator every trial is a correct run and a rejection counts as failure.
    full_ledger attaches the per-PE ledger of the first trial's checker run.
    """
    scenario = get_scenario(checker)
    cluster = cluster or ClusterConfig(p=p, alpha=settings.ALPHA, beta=settings.BETA, byte_granularity=settings.BYTE_GRANULARITY)
    _, config_name, delta = configure(scenario, config, seed, hash_family)
    if manipulator is not None:
        check_compatible(scenario, Manipulation.parse(manipulator, target=target))
    else:
        delta = 0.0
    logger.info(f"accuracy {checker} {config_name} {manipulator or 'correct'}: p={p}, n={workload.n}, {trials} trials")

    args = (checker, workload, config, manipulator, target, hash_family, cluster, seed)
    if n_jobs > 1 and trials > 1:
        chunks = [c.tolist() for c in np.array_split(np.arange(trials), min(n_jobs, trials))]
        parts = Parallel(n_jobs=n_jobs)(delayed(_run_trials)(*args, chunk) for chunk in chunks)
    else:
        parts = [_run_trials(*args, list(range(trials)))]
    failures = sum(f for f, _ in parts)
    ledger = next((l for _, l in parts if l is not None), None)

    rate = failures / trials
    result = ExperimentResult(
        checker=checker,
        config=config_name,
        manipulator=manipulator or "none",
        pes=p,
        elements=workload.n,
        trials=trials,
        failures=failures,
        observed_rate=rate,
        expected_delta=delta,
        ratio=rate / delta if delta > 0 else None,
        bottleneck_volume=ledger.bottleneck_volume if ledger else 0,
        rounds=ledger.rounds if ledger else 0,
        ledger=ledger if full_ledger else None,
    )
    logger.info(f"accuracy {checker} {config_name} {result.manipulator}: {failures}/{trials} failures, ratio {result.ratio}")
    return result


def run_cost_report(
    checker: str,
    config: Optional[str],
    sizes: List[int],
    p: int,
    seed: int,
    hash_family: HashFamily = HashFamily.CRC32C,
    kind: Optional[WorkloadKind] = None,
) -> List[CostRow]:
    """Ledger of the checker alone on correct instances of each size."""
    scenario = get_scenario(checker)
    cluster = ClusterConfig(p=p, alpha=settings.ALPHA, beta=settings.BETA, byte_granularity=settings.BYTE_GRANULARITY)
    config_obj, config_name, _ = configure(scenario, config, seed, hash_family)
    rows = []
    for n in sizes:
        w = Workload(
            kind=kind or scenario.default_workload(),
            n=n,
            seed=derive_seed(seed, WORKLOAD_STREAM, n),
            distinct_keys=settings.POWER_LAW_KEYS,
            hi=settings.UNIFORM_HIGH,
        )
        instance = build_instance(scenario, w, cluster)
        verdict, ledger = check_instance(scenario, instance, config_obj, cluster)
        if not verdict:
            logger.warning(f"{checker} rejected a correct instance of size {n}: {verdict.detail}")
        rows.append(
            CostRow(
                checker=checker,
                config=config_name,
                pes=p,
                elements=n,
                bottleneck_volume=ledger.bottleneck_volume,
                rounds=ledger.rounds,
                total_bits=ledger.total_bits,
                messages=ledger.messages,
            )
        )
        logger.info(f"cost {checker} n={n}: bottleneck {ledger.bottleneck_volume} bits, {ledger.rounds} rounds")
    if scenario.config_kind is not None and len({r.bottleneck_volume for r in rows}) > 1:
        logger.warning(f"{checker} checker traffic depends on n: {[r.bottleneck_volume for r in rows]}")
    return rows
