"""Session lifecycle: one engine-owning worker thread per live simulation.

All mutation happens on the worker thread; commands arrive through a
queue and are applied strictly between ticks, so a session replays like a
paused engine fed the same verbs in acknowledgment order. Subscribers get
immutable frame dicts through bounded per-subscriber queues; a slow
consumer loses oldest frames (decimation) but never sees reordering, and
disconnects never perturb the simulation.
"""

from __future__ import annotations

import queue
import threading
import time
import uuid
from dataclasses import dataclass, field

from otcsim.config import SimConfig
from otcsim.engine import Simulation
from otcsim.network import Role

_SUBSCRIBER_BUFFER = 4096


@dataclass
class _Command:
    verb: str
    n: int | None = None
    rate: float | None = None
    seed: int | None = None
    done: threading.Event = field(default_factory=threading.Event)
    effective_tick: int = -1
    error: str | None = None


class Subscriber:
    def __init__(self, decimation: int = 1):
        self.decimation = max(1, decimation)
        self.frames: queue.Queue = queue.Queue(maxsize=_SUBSCRIBER_BUFFER)

    def offer(self, frame: dict) -> None:
        if frame["tick"] % self.decimation != 0:
            return
        while True:
            try:
                self.frames.put_nowait(frame)
                return
            except queue.Full:
                # Drop the oldest frame; order is preserved, gaps appear.
                try:
                    self.frames.get_nowait()
                except queue.Empty:
                    pass


class Session:
    def __init__(self, config: SimConfig):
        self.id = uuid.uuid4().hex[:12]
        self.config = config
        self.sim = Simulation(config)
        self.mode = "paused"
        self.rate: float | None = None
        self._commands: queue.Queue[_Command] = queue.Queue()
        self._subscribers: list[Subscriber] = []
        self._lock = threading.Lock()
        self._stop = False
        self._thread = threading.Thread(target=self._run, daemon=True)
        self._thread.start()

    # ------------------------------------------------------------------
    # Client surface (any thread)

    def submit(self, verb: str, n=None, rate=None, seed=None, timeout=60.0) -> _Command:
        cmd = _Command(verb, n=n, rate=rate, seed=seed)
        self._commands.put(cmd)
        if not cmd.done.wait(timeout):
            raise TimeoutError(f"command {verb} did not complete")
        return cmd

    def subscribe(self, decimation: int = 1) -> Subscriber:
        sub = Subscriber(decimation)
        with self._lock:
            self._subscribers.append(sub)
        return sub

    def unsubscribe(self, sub: Subscriber) -> None:
        with self._lock:
            if sub in self._subscribers:
                self._subscribers.remove(sub)

    def close(self) -> None:
        self._stop = True
        self._commands.put(_Command("pause"))  # wake the worker
        self._thread.join(timeout=5)

    # ------------------------------------------------------------------
    # Worker thread

    def _run(self) -> None:
        next_deadline = 0.0
        while not self._stop:
            block = self.mode != "running"
            try:
                cmd = self._commands.get(block=block, timeout=0.25 if block else None)
            except queue.Empty:
                cmd = None
            if self._stop:
                if cmd is not None:
                    cmd.done.set()
                break
            if cmd is not None:
                self._apply(cmd)
                continue
            if self.mode != "running":
                continue  # paused and idle; keep waiting for commands
            # Free-running: honor the wall-clock rate, semantics unchanged.
            now = time.monotonic()
            if now < next_deadline:
                time.sleep(min(next_deadline - now, 0.05))
                continue
            next_deadline = max(next_deadline + 1.0 / self.rate, now)
            self._step_once()

    def _apply(self, cmd: _Command) -> None:
        sim = self.sim
        cmd.effective_tick = sim.tick
        if cmd.verb == "step":
            for _ in range(cmd.n or 1):
                self._step_once()
        elif cmd.verb == "run":
            self.rate = min(cmd.rate or 100.0, 1000.0)
            self.mode = "running"
        elif cmd.verb == "pause":
            self.mode = "paused"
        elif cmd.verb == "crash":
            sim.apply_crash()
        elif cmd.verb == "force_short":
            sim.force_dealers_short()
        elif cmd.verb == "remove_value_investors":
            sim.remove_value_investors()
        elif cmd.verb == "reset":
            seed = cmd.seed if cmd.seed is not None else self.config.rng_seed
            self.sim = Simulation(self.config, seed=seed)
            self.mode = "paused"
        else:
            cmd.error = f"unknown verb {cmd.verb}"
        cmd.done.set()

    def _step_once(self) -> None:
        trade = self.sim.step()
        with self._lock:
            subscribers = list(self._subscribers)
        if subscribers:
            frame = self.build_frame(trade)
            for sub in subscribers:
                sub.offer(frame)

    # ------------------------------------------------------------------
    # Views (read-only copies; called from the worker or request threads)

    def build_frame(self, trade=None) -> dict:
        sim = self.sim
        mids = sim.book.mids()
        half = sim.book.bid_offer / 2.0
        trades = []
        if trade is not None:
            trades.append(
                {
                    "tick": trade.tick,
                    "buyer": trade.buyer,
                    "seller": trade.seller,
                    "mm": trade.dealer,
                    "price": trade.price,
                    "size": trade.size,
                    "flag": trade.flag,
                }
            )
        agents = []
        for slot, vid in enumerate(sim.vi_ids):
            if sim.value_investors_removed:
                break
            agents.append(
                {
                    "id": vid,
                    "role": Role.VALUE_INVESTOR.value,
                    "inventory": float(sim.vi_inventory[slot]),
                    "target": float(sim.vi_targets[slot]),
                    "epsilon": None,
                    "profit": None,
                }
            )
        for slot, tid in enumerate(sim.ti_ids):
            agent = sim.trends[slot]
            agents.append(
                {
                    "id": tid,
                    "role": Role.TREND_INVESTOR.value,
                    "inventory": float(sim.ti_inventory[slot]),
                    "target": None,
                    "epsilon": agent.epsilon,
                    "profit": agent.realized_profit,
                }
            )
        return {
            "tick": sim.tick,
            "mids": mids.tolist(),
            "bids": (mids - half).tolist(),
            "offers": (mids + half).tolist(),
            "inventories": sim.book.inventory.tolist(),
            "mean_mid": float(mids.mean()),
            "arbitrage": sim.arbitrage_now(),
            "trades": trades,
            "agents": agents,
        }


class SessionManager:
    def __init__(self):
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    def create(self, config: SimConfig) -> Session:
        session = Session(config)
        with self._lock:
            self._sessions[session.id] = session
        return session

    def get(self, session_id: str) -> Session | None:
        with self._lock:
            return self._sessions.get(session_id)

    def delete(self, session_id: str) -> bool:
        with self._lock:
            session = self._sessions.pop(session_id, None)
        if session is None:
            return False
        session.close()
        return True

    def shutdown(self) -> None:
        with self._lock:
            sessions = list(self._sessions.values())
            self._sessions.clear()
        for session in sessions:
            session.close()
