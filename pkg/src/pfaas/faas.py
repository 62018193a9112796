"""Function gateway and autoscaler emulation.

Each deployed function has a replica count that starts at zero. Invoking a
function with no replicas starts a warm-up (``cold_start_us``); everything that
arrives during the warm-up queues behind the same single warm-up. Warm
replicas start work immediately and scale out with no extra delay once
``max_concurrency_per_replica`` is exceeded. ``idle_sweep`` scales idle
functions back to zero, and ``evict_all`` force-deletes every replica, after
which the controller recreates the pods from scratch.

Handlers are plain callables ``handler(ctx, request) -> dict`` or generators
that ``yield Call(...)`` to invoke downstream functions. A downstream call is
issued once the caller's own compute slice has finished, so one caller's
invocation intervals never overlap its callees' intervals.
"""

from __future__ import annotations

import inspect
import json
import logging
import math
from dataclasses import asdict, dataclass
from typing import Any, Callable, Iterable

from .simkernel import Kernel, US_PER_S
from .statestore import KVStore, decode_value, encode_value

logger = logging.getLogger(__name__)

R15 = "R15"
R17 = "R17"

DEFAULT_IDLE_WINDOW_US = 60 * US_PER_S
DEFAULT_COLD_START_US = 4 * US_PER_S
DEFAULT_SWEEP_INTERVAL_US = 1 * US_PER_S


class GatewayError(Exception):
    """Base for gateway-level failures (as opposed to handler failures)."""


class HandlerError(Exception):
    """Domain failure raised by a handler; travels back to the caller as an error response."""

    cause = 0x6F


class DuplicateFunction(GatewayError):
    pass


class UnknownFunction(GatewayError):
    pass


class FeatureGateDisabled(GatewayError):
    pass


@dataclass(frozen=True)
class FunctionSpec:
    name: str
    nf: str
    exec_time_us: int
    exec_jitter_pct: float = 0.0
    replica_rss_mb: float = 15.0
    invocation_alloc_mb: float = 128.0
    cold_start_us: int = DEFAULT_COLD_START_US
    feature_gate: str = R15
    max_concurrency_per_replica: int = 1000

    def __post_init__(self):
        if self.exec_time_us <= 0:
            raise ValueError(f"{self.name}: exec_time_us must be > 0")
        if self.cold_start_us < 0:
            raise ValueError(f"{self.name}: cold_start_us must be >= 0")
        if not 0.0 <= self.exec_jitter_pct < 1.0:
            raise ValueError(f"{self.name}: exec_jitter_pct must be in [0, 1)")
        if self.feature_gate not in (R15, R17):
            raise ValueError(f"{self.name}: unknown feature gate {self.feature_gate!r}")
        if self.max_concurrency_per_replica < 1:
            raise ValueError(f"{self.name}: max_concurrency_per_replica must be positive")


@dataclass
class ReplicaState:
    function: str
    count: int = 0
    last_invoked_at: int = 0
    warming_until: int | None = None
    active: int = 0


@dataclass
class InvocationRecord:
    function: str
    enqueued_at: int
    started_at: int
    finished_at: int
    cold_start: bool
    alloc_mb: float
    supi: str | None = None
    procedure: str | None = None
    error: str | None = None

    @property
    def duration_us(self) -> int:
        return self.finished_at - self.started_at

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Call:
    """Yielded by orchestrating handlers to invoke a downstream function."""

    function: str
    request: dict


@dataclass(frozen=True)
class Correlation:
    supi: str | None = None
    procedure: str | None = None


class Invocation:
    """Deferred response of one gateway call (including any nested chain)."""

    __slots__ = ("function", "record", "response", "error", "done", "_callbacks")

    def __init__(self, function: str):
        self.function = function
        self.record: InvocationRecord | None = None
        self.response: bytes | None = None
        self.error: BaseException | None = None
        self.done = False
        self._callbacks: list[Callable[["Invocation"], None]] = []

    def add_done_callback(self, fn: Callable[["Invocation"], None]) -> None:
        if self.done:
            fn(self)
        else:
            self._callbacks.append(fn)

    def _finish(self, response: bytes | None, error: BaseException | None) -> None:
        self.response, self.error, self.done = response, error, True
        callbacks, self._callbacks = self._callbacks, []
        for fn in callbacks:
            fn(self)

    def result(self) -> dict:
        if not self.done:
            raise RuntimeError("invocation still in flight")
        if self.error is not None:
            raise self.error
        return decode_value(self.response)


class HandlerContext:
    """What a handler may touch: the stores, its RNG streams and the config."""

    def __init__(self, runtime: "FunctionRuntime", record: InvocationRecord | None = None):
        self.runtime = runtime
        self.record = record
        self.store = runtime.store
        self.registry = runtime.registry
        self.config = runtime.config

    @property
    def now(self) -> int:
        return self.runtime.kernel.now()

    @property
    def r17(self) -> bool:
        return self.runtime.r17

    def rng(self, stream_id: str):
        return self.runtime.kernel.rng(stream_id)

    @staticmethod
    def call(function: str, request: dict) -> Call:
        return Call(function, request)


class _Pending:
    __slots__ = ("invocation", "request", "correlation", "enqueued_at", "cold")

    def __init__(self, invocation, request, correlation, enqueued_at, cold):
        self.invocation = invocation
        self.request = request
        self.correlation = correlation
        self.enqueued_at = enqueued_at
        self.cold = cold


class FunctionRuntime:
    def __init__(
        self,
        kernel: Kernel,
        store: KVStore | None = None,
        registry: KVStore | None = None,
        *,
        r17: bool = False,
        idle_window_us: int = DEFAULT_IDLE_WINDOW_US,
        cold_start_us: int | None = None,
        cold_start_jitter_pct: float = 0.0,
        config: dict | None = None,
    ):
        self.kernel = kernel
        self.store = store if store is not None else KVStore("transient")
        self.registry = registry if registry is not None else KVStore("registry")
        self.r17 = r17
        self.idle_window_us = int(idle_window_us)
        self.cold_start_override_us = cold_start_us
        self.cold_start_jitter_pct = cold_start_jitter_pct
        self.config = dict(config or {})
        self.specs: dict[str, FunctionSpec] = {}
        self.handlers: dict[str, Callable] = {}
        self.replicas: dict[str, ReplicaState] = {}
        self.replica_timeline: list[tuple[int, str, int]] = []
        self._ledger: list[InvocationRecord] = []
        self._waiting: dict[str, list[_Pending]] = {}
        self._ready_events: dict[str, Any] = {}
        self._sweeper = None

    # deployment

    def deploy(self, spec: FunctionSpec, handler: Callable | None = None) -> None:
        if spec.name in self.specs:
            raise DuplicateFunction(spec.name)
        self.specs[spec.name] = spec
        self.handlers[spec.name] = handler or _echo_handler
        self.replicas[spec.name] = ReplicaState(spec.name)
        self._waiting[spec.name] = []

    def gate_enabled(self, name: str) -> bool:
        return self.specs[name].feature_gate == R15 or self.r17

    def invocable(self) -> list[str]:
        return [n for n in self.specs if self.gate_enabled(n)]

    def cold_start_us(self, spec: FunctionSpec) -> int:
        base = spec.cold_start_us if self.cold_start_override_us is None else self.cold_start_override_us
        if self.cold_start_jitter_pct:
            u = self.kernel.rng("cold-jitter").uniform(-self.cold_start_jitter_pct, self.cold_start_jitter_pct)
            base = int(round(base * (1.0 + u)))
        return max(0, int(base))

    def _set_count(self, state: ReplicaState, count: int) -> None:
        if count != state.count:
            state.count = count
            self.replica_timeline.append((self.kernel.now(), state.function, count))

    def prewarm(self, names: Iterable[str] | None = None) -> None:
        """Bring functions to one warm replica immediately (a steady warm state)."""
        now = self.kernel.now()
        for name in names if names is not None else self.invocable():
            state = self.replicas[name]
            if state.count == 0 and state.warming_until is None:
                self._set_count(state, 1)
                state.last_invoked_at = now

    # invocation path

    def invoke(self, function: str, request: bytes, correlation: Correlation | None = None) -> Invocation:
        spec = self.specs.get(function)
        if spec is None:
            raise UnknownFunction(function)
        if not self.gate_enabled(function):
            raise FeatureGateDisabled(f"{function} requires {spec.feature_gate}")
        now = self.kernel.now()
        inv = Invocation(function)
        state = self.replicas[function]
        if state.warming_until is not None:
            self._waiting[function].append(_Pending(inv, request, correlation, now, True))
        elif state.count == 0:
            self._begin_warming(spec, state)
            self._waiting[function].append(_Pending(inv, request, correlation, now, True))
        else:
            self._start(_Pending(inv, request, correlation, now, False))
        return inv

    def _begin_warming(self, spec: FunctionSpec, state: ReplicaState) -> None:
        state.warming_until = self.kernel.now() + self.cold_start_us(spec)
        self._ready_events[spec.name] = self.kernel.schedule(state.warming_until, self._on_ready, spec.name)

    def _on_ready(self, name: str) -> None:
        state = self.replicas[name]
        state.warming_until = None
        self._ready_events.pop(name, None)
        if state.count == 0:
            self._set_count(state, 1)
        state.last_invoked_at = max(state.last_invoked_at, self.kernel.now())
        waiting, self._waiting[name] = self._waiting[name], []
        for pending in waiting:
            self._start(pending)

    def _start(self, pending: _Pending) -> None:
        inv = pending.invocation
        name = inv.function
        spec = self.specs[name]
        state = self.replicas[name]
        now = self.kernel.now()
        state.active += 1
        state.last_invoked_at = now
        needed = math.ceil(state.active / spec.max_concurrency_per_replica)
        if needed > state.count:
            self._set_count(state, needed)

        duration = spec.exec_time_us
        if spec.exec_jitter_pct:
            u = self.kernel.rng("exec-jitter").uniform(-spec.exec_jitter_pct, spec.exec_jitter_pct)
            duration = max(1, int(round(spec.exec_time_us * (1.0 + u))))

        corr = pending.correlation or Correlation()
        record = InvocationRecord(
            function=name,
            enqueued_at=pending.enqueued_at,
            started_at=now,
            finished_at=now + duration,
            cold_start=pending.cold,
            alloc_mb=spec.invocation_alloc_mb,
            supi=corr.supi,
            procedure=corr.procedure,
        )
        inv.record = record
        ctx = HandlerContext(self, record)
        request = decode_value(pending.request) if pending.request else {}
        gen = None
        outcome: Any = None
        error: BaseException | None = None
        try:
            outcome = self.handlers[name](ctx, request)
            if inspect.isgenerator(outcome):
                # pre-yield code runs now, at started_at
                gen = outcome
                outcome = next(gen)
        except StopIteration as stop:
            gen, outcome = None, stop.value
        except Exception as exc:
            if not isinstance(exc, HandlerError):
                logger.debug("%s raised %r", name, exc)
            gen, error = None, exc
        self.kernel.schedule(record.finished_at, self._finish, inv, corr, gen, outcome, error)

    def _finish(self, inv: Invocation, corr: Correlation, gen, outcome, error) -> None:
        state = self.replicas[inv.function]
        state.active -= 1
        state.last_invoked_at = self.kernel.now()
        if error is not None:
            inv.record.error = type(error).__name__
        self._ledger.append(inv.record)
        if gen is None:
            self._complete(inv, outcome, error)
        else:
            self._issue(inv, corr, gen, outcome)

    def _step(self, inv: Invocation, corr: Correlation, gen, value, error) -> None:
        try:
            call = gen.throw(error) if error is not None else gen.send(value)
        except StopIteration as stop:
            self._complete(inv, stop.value, None)
            return
        except Exception as exc:
            self._complete(inv, None, exc)
            return
        self._issue(inv, corr, gen, call)

    def _issue(self, inv: Invocation, corr: Correlation, gen, call) -> None:
        if not isinstance(call, Call):
            raise TypeError(f"{inv.function} yielded {call!r}, expected Call")
        try:
            child = self.invoke(call.function, encode_value(call.request), corr)
        except GatewayError as exc:
            self._step(inv, corr, gen, None, exc)
            return

        def resume(done: Invocation) -> None:
            if done.error is not None:
                self._step(inv, corr, gen, None, done.error)
            else:
                self._step(inv, corr, gen, decode_value(done.response), None)

        child.add_done_callback(resume)

    def _complete(self, inv: Invocation, outcome, error) -> None:
        if error is not None:
            inv._finish(None, error)
        else:
            inv._finish(encode_value(outcome if outcome is not None else {}), None)

    # autoscaler

    def idle_sweep(self, now: int | None = None) -> list[str]:
        now = self.kernel.now() if now is None else now
        scaled = []
        for name, state in self.replicas.items():
            if state.count > 0 and state.active == 0 and not self._waiting[name]:
                if now - state.last_invoked_at >= self.idle_window_us:
                    self._set_count(state, 0)
                    scaled.append(name)
        return scaled

    def start_autoscaler(self, interval_us: int = DEFAULT_SWEEP_INTERVAL_US) -> None:
        def tick():
            self.idle_sweep()
            self._sweeper = self.kernel.call_later(interval_us, tick)

        self._sweeper = self.kernel.call_later(interval_us, tick)

    def stop_autoscaler(self) -> None:
        if self._sweeper is not None:
            self._sweeper.cancel()
            self._sweeper = None

    def evict_all(self, now: int | None = None) -> None:
        """Force-delete every replica; the controller immediately recreates the
        pods, so each enabled function is ready again ``cold_start_us`` later.
        In-flight executions still complete."""
        for name, state in self.replicas.items():
            self._set_count(state, 0)
            old = self._ready_events.pop(name, None)
            if old is not None:
                old.cancel()
            state.warming_until = None
            if self.gate_enabled(name):
                self._begin_warming(self.specs[name], state)

    # reporting

    def ledger(self) -> list[InvocationRecord]:
        return list(self._ledger)

    def replica_counts(self) -> dict[str, int]:
        return {name: s.count for name, s in self.replicas.items()}

    def export_ledger(self, fp) -> int:
        for rec in self._ledger:
            fp.write(json.dumps(rec.to_dict(), sort_keys=True) + "\n")
        return len(self._ledger)


def _echo_handler(ctx, request):
    return request
