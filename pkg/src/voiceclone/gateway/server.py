"""WebSocket endpoint exposing gateway sessions at /v1/session.

Handshake: query parameters ``playbook_id`` and ``adapter`` (optionally
``scenario`` and ``delay_ms``); a ``{"type": "session.start", ...}`` text
message may supply them instead. Binary frames follow the audio frame
layout; JSON text frames carry control messages (barge_in, audio.end).
The server relays adapter output as binary frames plus JSON events and
finishes every session with a session.metrics message.
"""

from __future__ import annotations

import asyncio
import itertools
import json
import logging
from pathlib import Path

from starlette.applications import Starlette
from starlette.responses import JSONResponse
from starlette.routing import Route, WebSocketRoute
from starlette.websockets import WebSocket, WebSocketDisconnect

from ..adapters import AdapterError, make_adapter
from ..config import GatewayConfig
from ..playbook import PlaybookError, parse_playbook, render_system_prompt
from .frames import FrameError, FramePayloadError, decode_frame
from .session import GatewaySession, SessionClosedError, SessionError

logger = logging.getLogger(__name__)

_session_counter = itertools.count(1)


class PlaybookStore:
    """Loads playbooks by id from a directory of canonical JSON files."""

    def __init__(self, directory: str | Path) -> None:
        self.directory = Path(directory)

    def exists(self, playbook_id: str) -> bool:
        return (self.directory / f"{playbook_id}.json").is_file()

    def system_prompt(self, playbook_id: str, slot_values: dict[str, str]) -> str:
        path = self.directory / f"{playbook_id}.json"
        playbook = parse_playbook(path.read_text(encoding="utf-8"))
        return render_system_prompt(playbook, slot_values)


def create_app(config: GatewayConfig | None = None) -> Starlette:
    config = config or GatewayConfig()
    store = PlaybookStore(config.playbook_dir)
    sessions: dict[str, GatewaySession] = {}

    async def healthz(request):
        return JSONResponse({"status": "ok", "active_sessions": len(sessions)})

    async def session_endpoint(ws: WebSocket) -> None:
        await ws.accept()
        playbook_id = ws.query_params.get("playbook_id", "")
        adapter_kind = ws.query_params.get("adapter", config.default_adapter)
        scenario = ws.query_params.get("scenario", "happy_path")
        delay_ms = int(ws.query_params.get("delay_ms", config.echo_processing_delay_ms))

        if not playbook_id:
            # In-band start: the first text message must be session.start.
            try:
                first = await ws.receive_json()
            except Exception:
                await _refuse(ws, "bad_handshake", "expected a session.start message")
                return
            if first.get("type") != "session.start":
                await _refuse(ws, "bad_handshake", "expected a session.start message")
                return
            playbook_id = str(first.get("playbook_id", ""))
            adapter_kind = str(first.get("adapter", adapter_kind))
            scenario = str(first.get("scenario", scenario))

        if not store.exists(playbook_id):
            await _refuse(ws, "unknown_playbook", f"unknown playbook '{playbook_id}'")
            return
        try:
            prompt = store.system_prompt(playbook_id, config.slot_values)
            adapter = make_adapter(
                adapter_kind, scenario=scenario, processing_delay_ms=delay_ms
            )
        except (AdapterError, PlaybookError) as exc:
            await _refuse(ws, "session_init_failed", str(exc))
            return

        session_id = f"ws-{next(_session_counter)}"
        session = GatewaySession(
            session_id=session_id,
            playbook_id=playbook_id,
            adapter=adapter,
            system_prompt=prompt,
            queue_capacity=config.queue_capacity,
        )
        sessions[session_id] = session
        logger.info(
            "session %s open: playbook=%s adapter=%s", session_id, playbook_id, adapter_kind
        )
        try:
            await session.start()
        except Exception as exc:
            sessions.pop(session_id, None)
            await _refuse(ws, "session_init_failed", str(exc))
            return

        sender = asyncio.create_task(_send_loop(ws, session))
        try:
            await _receive_loop(ws, session)
        finally:
            if session.state not in ("closed",):
                try:
                    await session.close()
                except SessionError:
                    pass
            await sender
            sessions.pop(session_id, None)
            logger.info(
                "session %s closed: frames_in=%d frames_out=%d dropped=%d",
                session_id,
                session.frames_in,
                session.frames_out,
                session.frames_dropped,
            )
            try:
                await ws.close()
            except Exception:
                pass

    routes = [
        Route("/healthz", healthz),
        WebSocketRoute("/v1/session", session_endpoint),
    ]
    app = Starlette(routes=routes)
    app.state.sessions = sessions
    app.state.gateway_config = config
    return app


async def _refuse(ws: WebSocket, code: str, message: str) -> None:
    try:
        await ws.send_text(json.dumps({"type": "error", "code": code, "message": message}))
        await ws.close()
    except Exception:
        pass


async def _receive_loop(ws: WebSocket, session: GatewaySession) -> None:
    while True:
        try:
            message = await ws.receive()
        except WebSocketDisconnect:
            return
        if message["type"] == "websocket.disconnect":
            return
        data = message.get("bytes")
        text = message.get("text")
        try:
            if data is not None:
                try:
                    frame = decode_frame(data)
                except FramePayloadError as exc:
                    session.reject_payload(exc.seq, str(exc))
                    continue
                except FrameError as exc:
                    session.emit_json(
                        {"type": "error", "code": "bad_frame", "message": str(exc)}
                    )
                    await session.close()
                    return
                await session.ingest_audio(frame)
                if session.state == "closed":
                    return
            elif text is not None:
                await _handle_control(session, text)
                if session.state == "closed":
                    return
        except SessionClosedError:
            return


async def _handle_control(session: GatewaySession, text: str) -> None:
    try:
        control = json.loads(text)
    except json.JSONDecodeError:
        session.emit_json(
            {"type": "error", "code": "bad_control", "message": "control is not JSON"}
        )
        return
    kind = control.get("type")
    if kind == "audio.end":
        await session.end_of_utterance()
    elif kind == "barge_in":
        await session.barge_in()
    elif kind == "session.start":
        pass  # already started; harmless repeat
    elif kind == "session.close":
        await session.close()
    else:
        session.emit_json(
            {
                "type": "warning",
                "code": "unknown_control",
                "message": f"unknown control type '{kind}'",
            }
        )


async def _send_loop(ws: WebSocket, session: GatewaySession) -> None:
    while True:
        message = await session.next_message()
        if message is None:
            return
        kind, body = message
        try:
            if kind == "binary":
                await ws.send_bytes(body)
            else:
                await ws.send_text(json.dumps(body))
        except Exception:
            return
