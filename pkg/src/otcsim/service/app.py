"""HTTP/WebSocket surface of the control service.

Endpoints:
  POST   /sessions                  create a paused session
  GET    /sessions/{id}             state summary
  DELETE /sessions/{id}             drop a session
  POST   /sessions/{id}/command     step/run/pause/crash/force_short/
                                    remove_value_investors/reset
  GET    /sessions/{id}/network     node-role/edge document (+ targets)
  WS     /sessions/{id}/stream      per-tick JSON frames, ?decimation=N
"""

from __future__ import annotations

import queue
from contextlib import asynccontextmanager

import anyio
from fastapi import FastAPI, HTTPException, Query, WebSocket, WebSocketDisconnect

from otcsim.network import Role, to_edge_list_text
from otcsim.service.schemas import (
    CommandAck,
    CommandRequest,
    CreateSessionRequest,
    CreateSessionResponse,
    NetworkNode,
    NetworkResponse,
    SessionSummary,
    SimConfigModel,
)
from otcsim.service.sessions import Session, SessionManager


def create_app() -> FastAPI:
    manager = SessionManager()

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        manager.shutdown()

    app = FastAPI(title="otcsim control service", lifespan=lifespan)
    app.state.sessions = manager

    def require(session_id: str) -> Session:
        session = manager.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail="unknown session")
        return session

    @app.post("/sessions", response_model=CreateSessionResponse)
    def create_session(req: CreateSessionRequest) -> CreateSessionResponse:
        session = manager.create(req.config.to_config())
        return CreateSessionResponse(session_id=session.id, tick=session.sim.tick)

    @app.get("/sessions/{session_id}", response_model=SessionSummary)
    def session_summary(session_id: str) -> SessionSummary:
        session = require(session_id)
        sim = session.sim
        mids = sim.book.mids()
        half = sim.book.bid_offer / 2.0
        return SessionSummary(
            session_id=session.id,
            tick=sim.tick,
            mode=session.mode,
            rate=session.rate if session.mode == "running" else None,
            trained_tick=sim.trained_tick,
            mean_mid=float(mids.mean()),
            arbitrage=sim.arbitrage_now(),
            mids=mids.tolist(),
            bids=(mids - half).tolist(),
            offers=(mids + half).tolist(),
            inventories=sim.book.inventory.tolist(),
            targets=sim.vi_targets.tolist(),
            epsilons=[a.epsilon for a in sim.trends],
            profits=[a.realized_profit for a in sim.trends],
            value_investors_removed=sim.value_investors_removed,
            seed=sim.seed,
            config=SimConfigModel(**session.config.to_dict()),
        )

    @app.delete("/sessions/{session_id}")
    def delete_session(session_id: str) -> dict:
        if not manager.delete(session_id):
            raise HTTPException(status_code=404, detail="unknown session")
        return {"deleted": session_id}

    @app.post("/sessions/{session_id}/command", response_model=CommandAck)
    def command(session_id: str, req: CommandRequest) -> CommandAck:
        session = require(session_id)
        if req.verb == "step" and req.n is None:
            raise HTTPException(status_code=400, detail="step requires n")
        timeout = max(60.0, 0.01 * (req.n or 1))  # long steps take what they take
        cmd = session.submit(req.verb, n=req.n, rate=req.rate, seed=req.seed,
                             timeout=timeout)
        if cmd.error:
            raise HTTPException(status_code=400, detail=cmd.error)
        return CommandAck(
            session_id=session.id, verb=req.verb, effective_tick=cmd.effective_tick
        )

    @app.get("/sessions/{session_id}/network", response_model=NetworkResponse)
    def network_document(session_id: str) -> NetworkResponse:
        session = require(session_id)
        sim = session.sim
        nodes = []
        for node in sorted(sim.net.roles):
            role = sim.net.roles[node]
            entry = NetworkNode(id=node, role=role.value)
            if role is Role.MARKET_MAKER:
                entry.inventory = float(sim.book.inventory[node])
            elif role is Role.VALUE_INVESTOR:
                slot = sim.vi_ids.index(node)
                entry.inventory = float(sim.vi_inventory[slot])
                entry.target = float(sim.vi_targets[slot])
            else:
                slot = sim.ti_ids.index(node)
                entry.inventory = float(sim.ti_inventory[slot])
                entry.epsilon = sim.trends[slot].epsilon
            nodes.append(entry)
        return NetworkResponse(
            session_id=session.id,
            tick=sim.tick,
            link_probability=sim.net.link_probability,
            nodes=nodes,
            edges=sorted(sim.net.edges),
            edge_list_text=to_edge_list_text(sim.net),
        )

    @app.websocket("/sessions/{session_id}/stream")
    async def stream(ws: WebSocket, session_id: str, decimation: int = Query(1, ge=1)):
        session = manager.get(session_id)
        if session is None:
            await ws.close(code=4404)
            return
        await ws.accept()
        sub = session.subscribe(decimation)

        def poll_frame():
            # Bounded wait keeps the worker thread cancellable on disconnect.
            try:
                return sub.frames.get(timeout=0.2)
            except queue.Empty:
                return None

        try:
            async with anyio.create_task_group() as tg:

                async def watch_disconnect():
                    while True:
                        message = await ws.receive()
                        if message["type"] == "websocket.disconnect":
                            tg.cancel_scope.cancel()
                            return

                tg.start_soon(watch_disconnect)
                while True:
                    frame = await anyio.to_thread.run_sync(
                        poll_frame, abandon_on_cancel=True
                    )
                    if frame is not None:
                        await ws.send_json(frame)
        except (WebSocketDisconnect, RuntimeError):
            pass
        finally:
            session.unsubscribe(sub)

    return app
