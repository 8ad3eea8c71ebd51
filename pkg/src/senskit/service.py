"""Event-sourced bench sessions over HTTP.

Each session is one append-only JSONL file: a ``created`` event holding
the design spec, then one ``outcome`` event per trial.  The log is the
only store — every request folds it back through the real design state
machines, so a crash can lose at most an unsent response, never a
recorded trial, and any inconsistency (a missing coin, an outcome after
termination, a broken sequence) surfaces as a load error instead of a
silently wrong state.

Outcome posts echo the sequence number of the recommendation they
answer; a stale echo (double submit, out-of-date operator screen) is
rejected without touching the log.  Coin flips for biased-coin sessions
are drawn server-side from the session's seeded stream and written into
the event, so a replayed log walks the exact same ladder even if the
generator ever changes.  An outcome may carry an explicit ``stimulus``
when the apparatus could not deliver the recommended load; the ladder
itself stays on course (biased-coin sessions only).
"""

from __future__ import annotations

import json
import math
import os
import secrets
import threading
import uuid
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

from pydantic import BaseModel, Field

from .data import Dataset, format_dataset, level_stats
from .designs import (
    BcdConfig,
    BcdState,
    RmjConfig,
    RmjState,
    UnStaircaseConfig,
    UnState,
    UpDownConfig,
    UpDownState,
    bcd_next,
    bcd_start,
    rmj_next,
    rmj_start,
    un_next,
    un_result,
    un_start,
    up_down_next,
    up_down_start,
)
from .errors import ConfigError, DesignStateError, EstimationError, GridError, SenskitError
from .estimators import cir, cir_quantile, rmj_estimate
from .rng import replicate_rng, stream_seed
from .serialize import design_from_dict, design_to_dict

__all__ = [
    "Session",
    "SessionNotFoundError",
    "SessionStore",
    "StaleEchoError",
    "create_app",
    "run_server",
    "session_snapshot",
]

DATA_DIR_ENV = "SENSKIT_DATA_DIR"
BIND_ENV = "SENSKIT_BIND"
MASTER_SEED_ENV = "SENSKIT_MASTER_SEED"
DEFAULT_DATA_DIR = "senskit-sessions"
DEFAULT_BIND = "127.0.0.1:8440"

_KIND = {
    UpDownConfig: "up-down",
    BcdConfig: "bcd",
    RmjConfig: "rmj",
    UnStaircaseConfig: "un-staircase",
}


class SessionNotFoundError(SenskitError):
    """No event log exists for the requested session id."""


class StaleEchoError(SenskitError):
    """The posted outcome answers an out-of-date recommendation."""

    def __init__(self, message: str, expected: int):
        super().__init__(message)
        self.expected = expected


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="milliseconds")


def _start_state(config):
    if isinstance(config, UpDownConfig):
        return up_down_start(config)
    if isinstance(config, BcdConfig):
        return bcd_start(config)
    if isinstance(config, RmjConfig):
        return rmj_start(config)
    if isinstance(config, UnStaircaseConfig):
        return un_start(config)
    raise ConfigError(f"not a design config: {type(config).__name__}")


def _advance(state, y: int, *, coin: float | None = None,
             stimulus: float | None = None):
    if isinstance(state, BcdState):
        return bcd_next(state, y, coin=coin, stimulus=stimulus)
    if stimulus is not None:
        raise ConfigError("stimulus override is only supported for biased-coin sessions")
    if isinstance(state, UpDownState):
        return up_down_next(state, y)
    if isinstance(state, RmjState):
        return rmj_next(state, y)
    if isinstance(state, UnState):
        return un_next(state, y)
    raise ConfigError(f"not a design state: {type(state).__name__}")


@dataclass(frozen=True)
class Session:
    """A folded view of one event log: design state plus trial annotations."""

    sid: str
    created_at: str
    material: str
    unit: str
    seed: int
    design: Any
    state: Any
    notes: tuple[str | None, ...]
    overrides: tuple[float | None, ...]

    @property
    def kind(self) -> str:
        return _KIND[type(self.design)]

    @property
    def trials(self) -> int:
        return len(self.state.history)

    @property
    def terminated(self) -> bool:
        return bool(self.state.terminated)


class SessionStore:
    """Append-only JSONL persistence with fold-on-load state.

    Events are fsynced before any response is produced, so an
    interruption between append and reply leaves the extra trial safely
    in the log.  A torn trailing line (the one partial write a crash can
    leave behind) is dropped on load and overwritten by the next append.
    """

    def __init__(self, root: str | Path, master_seed: int | None = None):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.master_seed = master_seed
        self._registry_lock = threading.Lock()
        self._locks: dict[str, threading.Lock] = {}

    @classmethod
    def from_env(cls, env=None) -> "SessionStore":
        env = os.environ if env is None else env
        root = env.get(DATA_DIR_ENV, DEFAULT_DATA_DIR)
        seed = env.get(MASTER_SEED_ENV)
        try:
            master = int(seed) if seed is not None else None
        except ValueError:
            raise ConfigError(f"{MASTER_SEED_ENV} must be an integer, got {seed!r}") from None
        return cls(root, master_seed=master)

    # -- storage ------------------------------------------------------------

    def _lock_for(self, sid: str) -> threading.Lock:
        with self._registry_lock:
            return self._locks.setdefault(sid, threading.Lock())

    def _path(self, sid: str) -> Path:
        return self.root / f"{sid}.jsonl"

    def list_ids(self) -> list[str]:
        return sorted(p.stem for p in self.root.glob("*.jsonl"))

    def _read_events(self, sid: str) -> tuple[list[dict], int, bool]:
        """Parse the log; returns (events, end of last intact line, whether
        that end is missing its newline)."""
        path = self._path(sid)
        if not path.exists():
            raise SessionNotFoundError(f"no session {sid!r}")
        raw = path.read_bytes()
        lines = raw.splitlines(keepends=True)
        events: list[dict] = []
        good_end = 0
        needs_newline = False
        for i, line in enumerate(lines):
            text = line.strip()
            if not text:
                good_end += len(line)
                continue
            try:
                events.append(json.loads(text))
            except json.JSONDecodeError:
                if i == len(lines) - 1 and not line.endswith(b"\n"):
                    break  # torn trailing write; everything before is intact
                raise ConfigError(f"session {sid}: corrupt event log at line {i + 1}") from None
            good_end += len(line)
            needs_newline = not line.endswith(b"\n")
        return events, good_end, needs_newline

    def _append(self, sid: str, event: dict, good_end: int, needs_newline: bool) -> None:
        with open(self._path(sid), "r+b") as fh:
            fh.seek(good_end)
            fh.truncate()
            prefix = b"\n" if needs_newline else b""
            fh.write(prefix + json.dumps(event).encode("utf-8") + b"\n")
            fh.flush()
            os.fsync(fh.fileno())

    # -- folding ------------------------------------------------------------

    def _fold(self, sid: str, events: list[dict]) -> Session:
        if not events or events[0].get("type") != "created":
            raise ConfigError(f"session {sid}: log does not begin with a created event")
        head = events[0]
        try:
            design = design_from_dict(head["design"])
            seed = int(head["seed"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"session {sid}: malformed created event: {exc}") from exc
        state = _start_state(design)
        notes: list[str | None] = []
        overrides: list[float | None] = []
        for k, evt in enumerate(events[1:], start=1):
            if evt.get("type") != "outcome":
                raise ConfigError(f"session {sid}: unexpected event type {evt.get('type')!r}")
            if evt.get("seq") != k:
                raise ConfigError(f"session {sid}: event sequence broken at entry {k}")
            try:
                state = _advance(state, int(evt["y"]), coin=evt.get("coin"),
                                 stimulus=evt.get("stimulus"))
            except (KeyError, ValueError, DesignStateError) as exc:
                raise ConfigError(f"session {sid}: log does not replay: {exc}") from exc
            notes.append(evt.get("note"))
            overrides.append(evt.get("stimulus"))
        return Session(
            sid=sid,
            created_at=str(head.get("ts", "")),
            material=str(head.get("material", "")),
            unit=str(head.get("unit", "N")),
            seed=seed,
            design=design,
            state=state,
            notes=tuple(notes),
            overrides=tuple(overrides),
        )

    # -- operations ---------------------------------------------------------

    def create(self, design_spec: dict, material: str = "", unit: str = "N",
               seed: int | None = None) -> Session:
        design = design_from_dict(design_spec)
        if seed is None:
            if self.master_seed is not None:
                seed = stream_seed(self.master_seed, len(self.list_ids()))
            else:
                seed = secrets.randbits(63)
        sid = uuid.uuid4().hex[:12]
        event = {
            "seq": 0,
            "type": "created",
            "ts": _now(),
            "design": design_to_dict(design),
            "material": material,
            "unit": unit,
            "seed": int(seed),
        }
        with self._lock_for(sid):
            with open(self._path(sid), "xb") as fh:
                fh.write(json.dumps(event).encode("utf-8") + b"\n")
                fh.flush()
                os.fsync(fh.fileno())
        return self._fold(sid, [event])

    def get(self, sid: str) -> Session:
        events, _, _ = self._read_events(sid)
        return self._fold(sid, events)

    def record_outcome(self, sid: str, outcome: int, echo: int,
                       note: str | None = None,
                       stimulus: float | None = None) -> Session:
        outcome = int(outcome)
        if outcome not in (0, 1):
            raise ConfigError(f"outcome must be 0 or 1, got {outcome}")
        if stimulus is not None and not float(stimulus) > 0.0:
            raise ConfigError(f"stimulus override must be positive, got {stimulus}")
        with self._lock_for(sid):
            events, good_end, needs_newline = self._read_events(sid)
            session = self._fold(sid, events)
            if session.terminated:
                raise DesignStateError(
                    f"session {sid} is terminated; the outcome was not recorded")
            expected = session.trials
            if int(echo) != expected:
                raise StaleEchoError(
                    f"stale echo {echo}: the open recommendation is #{expected}",
                    expected=expected)
            if stimulus is not None and not isinstance(session.state, BcdState):
                raise ConfigError(
                    "stimulus override is only supported for biased-coin sessions")
            coin = None
            if isinstance(session.state, BcdState):
                # candidate draw; the design consumes it only on a coin branch
                coin = float(replicate_rng(session.seed, expected).random())
            new_state = _advance(session.state, outcome, coin=coin,
                                 stimulus=None if stimulus is None else float(stimulus))
            used_coin = new_state.coins[-1] if isinstance(new_state, BcdState) else None
            event = {
                "seq": len(events),
                "type": "outcome",
                "ts": _now(),
                "y": outcome,
                "stimulus": None if stimulus is None else float(stimulus),
                "coin": used_coin,
                "note": note,
            }
            self._append(sid, event, good_end, needs_newline)
        return Session(
            sid=session.sid,
            created_at=session.created_at,
            material=session.material,
            unit=session.unit,
            seed=session.seed,
            design=session.design,
            state=new_state,
            notes=session.notes + (note,),
            overrides=session.overrides + (stimulus,),
        )

    def export_csv(self, sid: str) -> str:
        session = self.get(sid)
        comments = [f"session {session.sid}"]
        if session.material:
            comments.append(f"material {session.material}")
        dataset = Dataset(trials=session.state.history, unit=session.unit,
                          name=session.sid)
        return format_dataset(dataset, comments=comments)


# ---------------------------------------------------------------------------
# snapshots


def _json_number(x: float | None) -> float | None:
    if x is None or not math.isfinite(x):
        return None
    return float(x)


def _grid_label(design, stimulus: float) -> str | None:
    grid = getattr(design, "grid", None)
    if grid is None or stimulus is None:
        return None
    try:
        return grid.label_at(grid.index_of(stimulus))
    except GridError:
        return None


def _estimate_payload(session: Session) -> dict | None:
    state = session.state
    if isinstance(state, BcdState):
        if len(state.history) < 2:
            return None
        try:
            fit = cir(level_stats(list(state.history)),
                      shrink_target=state.config.p)
            est = cir_quantile(fit, state.config.p, level=0.9)
        except (EstimationError, ConfigError):
            return None
    elif isinstance(state, RmjState) and state.terminated:
        est = rmj_estimate(state, level=0.9).exp()
    else:
        return None
    return {
        "p": est.p,
        "point": _json_number(est.point),
        "lo": _json_number(est.lo),
        "hi": _json_number(est.hi),
        "level": est.level,
        "method": est.method,
        "kind": est.kind,
    }


def session_snapshot(session: Session) -> dict:
    """The JSON view of a session an operator screen renders from."""
    state = session.state
    history = []
    for i, t in enumerate(state.history):
        history.append({
            "index": t.index,
            "stimulus": t.stimulus,
            "label": t.grid_label,
            "outcome": t.outcome,
            "note": session.notes[i],
            "override": session.overrides[i] is not None,
        })
    nxt = None
    if not session.terminated:
        stimulus = state.next_stimulus
        if isinstance(state, UnState):
            label = session.design.grid.label_at(state.level_index)
        else:
            label = _grid_label(session.design, stimulus)
        nxt = {"seq": session.trials, "stimulus": stimulus, "label": label}
    snapshot = {
        "id": session.sid,
        "created_at": session.created_at,
        "material": session.material,
        "unit": session.unit,
        "kind": session.kind,
        "design": design_to_dict(session.design),
        "status": "terminated" if session.terminated else "active",
        "trials": session.trials,
        "next": nxt,
        "history": history,
        "estimate": _estimate_payload(session),
    }
    if isinstance(state, UnState):
        provisional = state.provisional_values()
        snapshot["provisional"] = {
            "type_i": provisional["I"],
            "type_ii": provisional["II"],
        }
        if session.terminated:
            result = un_result(state)
            snapshot["result"] = {
                "value": result.value,
                "limiting_type": result.limiting_type,
                "floor_hit": result.floor_hit,
            }
    return snapshot


# ---------------------------------------------------------------------------
# HTTP surface


class CreateSessionRequest(BaseModel):
    design: dict
    material: str = ""
    unit: str = "N"
    seed: int | None = Field(default=None, ge=0)


class OutcomeRequest(BaseModel):
    outcome: int = Field(ge=0, le=1)
    echo: int = Field(ge=0)
    note: str | None = None
    stimulus: float | None = Field(default=None, gt=0)


def create_app(store: SessionStore | None = None):
    """Build the FastAPI application around a store (from env by default)."""
    from fastapi import FastAPI
    from fastapi.middleware.cors import CORSMiddleware
    from fastapi.responses import JSONResponse, PlainTextResponse

    if store is None:
        store = SessionStore.from_env()

    app = FastAPI(title="senskit sessions", docs_url=None, redoc_url=None)
    app.state.store = store
    # the operator console is served from a different origin (static file
    # server or dev server); the API is bound to loopback by default
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])

    @app.exception_handler(SenskitError)
    def _senskit_error(request, exc: SenskitError):
        if isinstance(exc, SessionNotFoundError):
            code = 404
        elif isinstance(exc, (StaleEchoError, DesignStateError)):
            code = 409
        else:
            code = 422
        body: dict = {"error": str(exc)}
        if isinstance(exc, StaleEchoError):
            body["expected"] = exc.expected
        return JSONResponse(body, status_code=code)

    @app.post("/sessions", status_code=201)
    def create_session(req: CreateSessionRequest):
        session = store.create(req.design, material=req.material,
                               unit=req.unit, seed=req.seed)
        return session_snapshot(session)

    @app.get("/sessions")
    def list_sessions():
        summaries = []
        for sid in store.list_ids():
            s = store.get(sid)
            summaries.append({
                "id": s.sid,
                "kind": s.kind,
                "material": s.material,
                "status": "terminated" if s.terminated else "active",
                "trials": s.trials,
                "created_at": s.created_at,
            })
        return {"sessions": summaries}

    @app.get("/sessions/{sid}")
    def get_session(sid: str):
        return session_snapshot(store.get(sid))

    @app.post("/sessions/{sid}/outcomes")
    def post_outcome(sid: str, req: OutcomeRequest):
        session = store.record_outcome(sid, req.outcome, req.echo,
                                       note=req.note, stimulus=req.stimulus)
        return session_snapshot(session)

    @app.get("/sessions/{sid}/export")
    def export_session(sid: str, format: str = "csv"):
        if format != "csv":
            raise ConfigError(f"unknown export format {format!r}; only 'csv' is available")
        return PlainTextResponse(store.export_csv(sid), media_type="text/csv")

    return app


def run_server(store: SessionStore | None = None, bind: str | None = None) -> None:
    """Serve the app with uvicorn on host:port (env SENSKIT_BIND by default)."""
    import uvicorn

    if bind is None:
        bind = os.environ.get(BIND_ENV, DEFAULT_BIND)
    host, _, port_text = bind.rpartition(":")
    if not host or not port_text.isdigit():
        raise ConfigError(f"bind address must look like host:port, got {bind!r}")
    uvicorn.run(create_app(store), host=host, port=int(port_text), log_level="warning")
