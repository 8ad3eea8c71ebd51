"""Tests for the event-sourced session service.

The store's invariant under test throughout: the on-disk event log is
the only state, and folding it back through the design state machines
reproduces exactly the state the API answered with -- after crashes,
torn writes, and arbitrary interleavings of sessions.
"""

import json
import math
import random

import pytest
from fastapi.testclient import TestClient

from senskit.data import parse_dataset
from senskit.designs import BcdState
from senskit.errors import ConfigError, DesignStateError
from senskit.estimators import cir, cir_quantile
from senskit.service import (
    MASTER_SEED_ENV,
    DATA_DIR_ENV,
    SessionNotFoundError,
    SessionStore,
    StaleEchoError,
    create_app,
    session_snapshot,
)


@pytest.fixture()
def store(tmp_path):
    return SessionStore(tmp_path / "sessions", master_seed=424242)


@pytest.fixture()
def client(store):
    return TestClient(create_app(store))


UD_SPEC = {"kind": "up-down", "x1": 100.0, "d": 0.3}
BCD_SPEC = {"kind": "bcd", "x1": 60.0, "d": 0.405, "p": 0.1, "grid": None}
BCD_HALF_SPEC = {"kind": "bcd", "x1": 60.0, "d": 0.405, "p": 0.5, "grid": None}
RMJ_SPEC = {"kind": "rmj", "p": 0.1, "n": 4, "x1": 80.0}
F1_SPEC = {"kind": "un-staircase", "preset": "f1", "grid": "notch6"}


def create_session(client, spec, **extra):
    resp = client.post("/sessions", json={"design": spec, **extra})
    assert resp.status_code == 201, resp.text
    return resp.json()


def post_outcome(client, sid, outcome, echo, **extra):
    return client.post(f"/sessions/{sid}/outcomes",
                       json={"outcome": outcome, "echo": echo, **extra})


class TestStaircaseWalk:
    def test_notch_run_over_http(self, client, table3):
        """Replaying the packaged staircase run trial by trial must retrace
        its loads exactly and land on the 80 N type-I limiting stimulus."""
        snap = create_session(client, F1_SPEC, material="PETN", unit="N")
        sid = snap["id"]
        assert snap["kind"] == "un-staircase"
        assert snap["status"] == "active"
        for t in table3.trials:
            assert snap["next"]["stimulus"] == pytest.approx(t.stimulus)
            assert snap["next"]["label"] == t.grid_label
            resp = post_outcome(client, sid, t.outcome, snap["next"]["seq"])
            assert resp.status_code == 200, resp.text
            snap = resp.json()
        assert snap["status"] == "terminated"
        assert snap["trials"] == 12
        assert snap["result"] == {"value": 80.0, "limiting_type": "I",
                                  "floor_hit": False}
        assert snap["provisional"] == {"type_i": 80.0, "type_ii": 60.0}

    def test_provisional_values_midrun(self, client, table3):
        snap = create_session(client, F1_SPEC)
        sid = snap["id"]
        for t in table3.trials[:5]:
            snap = post_outcome(client, sid, t.outcome, snap["next"]["seq"]).json()
        # after 360..120 positive and one negative at 80: the smallest
        # positive so far is 120, the current rung 80
        assert snap["provisional"] == {"type_i": 120.0, "type_ii": 80.0}
        assert snap["status"] == "active"


class TestEchoGuard:
    def test_stale_echo_rejected_and_state_untouched(self, client):
        snap = create_session(client, UD_SPEC)
        sid = snap["id"]
        ok = post_outcome(client, sid, 1, 0)
        assert ok.status_code == 200
        # double submit of the same screen: echo 0 again
        dup = post_outcome(client, sid, 1, 0)
        assert dup.status_code == 409
        body = dup.json()
        assert "stale echo" in body["error"]
        assert body["expected"] == 1
        assert client.get(f"/sessions/{sid}").json()["trials"] == 1

    def test_echo_ahead_rejected(self, client):
        snap = create_session(client, UD_SPEC)
        assert post_outcome(client, snap["id"], 0, 5).status_code == 409

    def test_next_seq_is_the_echo(self, client):
        snap = create_session(client, UD_SPEC)
        sid = snap["id"]
        for k in range(4):
            assert snap["next"]["seq"] == k
            snap = post_outcome(client, sid, k % 2, snap["next"]["seq"]).json()


class TestTerminationGuard:
    def test_outcome_after_termination_conflicts(self, client):
        snap = create_session(client, RMJ_SPEC)
        sid = snap["id"]
        for _ in range(4):
            snap = post_outcome(client, sid, 0, snap["next"]["seq"]).json()
        assert snap["status"] == "terminated"
        resp = post_outcome(client, sid, 0, 4)
        assert resp.status_code == 409
        assert "terminated" in resp.json()["error"]
        assert client.get(f"/sessions/{sid}").json()["trials"] == 4


class TestValidation:
    def test_unknown_session_404(self, client):
        assert client.get("/sessions/nope").status_code == 404
        assert post_outcome(client, "nope", 1, 0).status_code == 404

    def test_bad_design_spec_422(self, client):
        resp = client.post("/sessions", json={"design": {"kind": "simplex"}})
        assert resp.status_code == 422
        assert "unknown design kind" in resp.json()["error"]

    def test_out_of_range_outcome_rejected(self, client):
        snap = create_session(client, UD_SPEC)
        resp = post_outcome(client, snap["id"], 2, 0)
        assert resp.status_code == 422

    def test_nonpositive_stimulus_override_rejected(self, client):
        snap = create_session(client, BCD_SPEC)
        resp = post_outcome(client, snap["id"], 1, 0, stimulus=-5.0)
        assert resp.status_code == 422

    def test_export_format_guard(self, client):
        snap = create_session(client, UD_SPEC)
        resp = client.get(f"/sessions/{snap['id']}/export", params={"format": "xml"})
        assert resp.status_code == 422


class TestBiasedCoinSessions:
    def test_running_estimate_matches_direct_cir(self, client, store):
        snap = create_session(client, BCD_SPEC)
        sid = snap["id"]
        assert snap["estimate"] is None  # nothing to invert yet
        outcomes = [0, 0, 1, 0, 0, 1, 0, 0]
        for y in outcomes:
            snap = post_outcome(client, sid, y, snap["next"]["seq"]).json()
        est = snap["estimate"]
        session = store.get(sid)
        tallies = {}
        for t in session.state.history:
            slot = tallies.setdefault(t.stimulus, [0, 0])
            slot[0] += 1
            slot[1] += t.outcome
        fit = cir([(x, n, r) for x, (n, r) in sorted(tallies.items())],
                  shrink_target=0.1)
        ref = cir_quantile(fit, 0.1, level=0.9)
        assert est["method"] == "cir-band"
        assert est["p"] == 0.1
        assert est["point"] == pytest.approx(ref.point)
        assert (est["lo"] is None) == math.isinf(ref.lo)
        if est["lo"] is not None:
            assert est["lo"] == pytest.approx(ref.lo)
        assert est["hi"] == pytest.approx(ref.hi)

    def test_coins_logged_only_when_consumed(self, client, store):
        snap = create_session(client, BCD_SPEC)
        sid = snap["id"]
        for y in (1, 0, 0, 1):
            snap = post_outcome(client, sid, y, snap["next"]["seq"]).json()
        events = [json.loads(line) for line in
                  (store.root / f"{sid}.jsonl").read_text().splitlines()]
        outcome_events = [e for e in events if e["type"] == "outcome"]
        # p = 0.1: positives step down without a coin, negatives flip one
        assert outcome_events[0]["coin"] is None
        assert isinstance(outcome_events[1]["coin"], float)
        assert isinstance(outcome_events[2]["coin"], float)
        assert outcome_events[3]["coin"] is None

    def test_median_target_never_flips_coins(self, client, store):
        snap = create_session(client, BCD_HALF_SPEC)
        sid = snap["id"]
        for y in (0, 1, 0):
            snap = post_outcome(client, sid, y, snap["next"]["seq"]).json()
        events = [json.loads(line) for line in
                  (store.root / f"{sid}.jsonl").read_text().splitlines()]
        assert all(e["coin"] is None for e in events if e["type"] == "outcome")

    def test_same_seed_same_walk(self, tmp_path):
        walks = []
        for sub in ("a", "b"):
            store = SessionStore(tmp_path / sub)
            client = TestClient(create_app(store))
            snap = create_session(client, BCD_SPEC, seed=777)
            stimuli = []
            for y in (0, 0, 0, 1, 0, 0):
                stimuli.append(snap["next"]["stimulus"])
                snap = post_outcome(client, snap["id"], y, snap["next"]["seq"]).json()
            walks.append(stimuli)
        assert walks[0] == walks[1]

    def test_stimulus_override_records_but_does_not_steer(self, client):
        snap = create_session(client, BCD_HALF_SPEC)
        sid = snap["id"]
        recommended = snap["next"]["stimulus"]
        resp = post_outcome(client, sid, 1, 0, stimulus=70.0,
                            note="machine jammed at 60")
        snap = resp.json()
        rec = snap["history"][0]
        assert rec["stimulus"] == 70.0
        assert rec["override"] is True
        assert rec["note"] == "machine jammed at 60"
        # the ladder stepped down from the nominal 60, not from 70
        assert snap["next"]["stimulus"] == pytest.approx(
            math.exp(math.log(recommended) - 0.405))

    def test_override_rejected_for_other_designs(self, client):
        snap = create_session(client, UD_SPEC)
        resp = post_outcome(client, snap["id"], 1, 0, stimulus=70.0)
        assert resp.status_code == 422
        assert "biased-coin" in resp.json()["error"]


class TestRmjSessions:
    def test_estimate_only_at_termination(self, client):
        snap = create_session(client, RMJ_SPEC)
        sid = snap["id"]
        for k in range(4):
            assert snap["estimate"] is None
            snap = post_outcome(client, sid, k % 2, snap["next"]["seq"]).json()
        est = snap["estimate"]
        assert est is not None
        assert est["method"] == "rmj-normal"
        # natural units: strictly positive with a finite symmetric band
        assert est["lo"] > 0.0 and est["hi"] > est["point"] > est["lo"]


class TestCrashTolerance:
    def test_torn_trailing_line_is_dropped_and_repaired(self, client, store):
        snap = create_session(client, UD_SPEC)
        sid = snap["id"]
        for y in (1, 0):
            snap = post_outcome(client, sid, y, snap["next"]["seq"]).json()
        path = store.root / f"{sid}.jsonl"
        with open(path, "ab") as fh:
            fh.write(b'{"seq": 3, "type": "outc')  # simulated torn write
        assert client.get(f"/sessions/{sid}").json()["trials"] == 2
        resp = post_outcome(client, sid, 1, 2)
        assert resp.status_code == 200
        lines = path.read_text().splitlines()
        assert len(lines) == 4  # created + three intact outcomes
        assert all(json.loads(line) for line in lines)

    def test_intact_line_missing_newline_is_kept(self, client, store):
        snap = create_session(client, BCD_HALF_SPEC)
        sid = snap["id"]
        snap = post_outcome(client, sid, 0, 0).json()
        path = store.root / f"{sid}.jsonl"
        event = {"seq": 2, "type": "outcome", "ts": "later", "y": 1,
                 "stimulus": None, "coin": None, "note": None}
        with open(path, "ab") as fh:
            fh.write(json.dumps(event).encode())  # crash before the newline
        assert client.get(f"/sessions/{sid}").json()["trials"] == 2
        resp = post_outcome(client, sid, 0, 2)
        assert resp.status_code == 200
        lines = path.read_text().splitlines()
        assert [json.loads(line)["seq"] for line in lines] == [0, 1, 2, 3]

    def test_corrupt_interior_line_is_an_error(self, client, store):
        snap = create_session(client, UD_SPEC)
        sid = snap["id"]
        post_outcome(client, sid, 1, 0)
        path = store.root / f"{sid}.jsonl"
        lines = path.read_bytes().splitlines(keepends=True)
        lines[0] = b'{"broken": \n'
        path.write_bytes(b"".join(lines))
        resp = client.get(f"/sessions/{sid}")
        assert resp.status_code == 422
        assert "corrupt" in resp.json()["error"] or "created" in resp.json()["error"]

    def test_broken_sequence_fails_loudly(self, client, store):
        snap = create_session(client, UD_SPEC)
        sid = snap["id"]
        post_outcome(client, sid, 1, 0)
        path = store.root / f"{sid}.jsonl"
        text = path.read_text().splitlines()
        forged = json.loads(text[1])
        forged["seq"] = 7
        path.write_text(text[0] + "\n" + json.dumps(forged) + "\n")
        resp = client.get(f"/sessions/{sid}")
        assert resp.status_code == 422
        assert "sequence" in resp.json()["error"]


class TestExportAndListing:
    def test_export_round_trips_the_history(self, client, store, table3):
        snap = create_session(client, F1_SPEC, material="PETN")
        sid = snap["id"]
        for t in table3.trials[:6]:
            snap = post_outcome(client, sid, t.outcome, snap["next"]["seq"]).json()
        resp = client.get(f"/sessions/{sid}/export")
        assert resp.status_code == 200
        assert resp.headers["content-type"].startswith("text/csv")
        ds = parse_dataset(resp.text)
        session = store.get(sid)
        assert ds.trials == session.state.history
        assert "material PETN" in resp.text

    def test_listing(self, client):
        a = create_session(client, UD_SPEC, material="A")
        b = create_session(client, RMJ_SPEC, material="B")
        post_outcome(client, a["id"], 1, 0)
        listing = client.get("/sessions").json()["sessions"]
        by_id = {s["id"]: s for s in listing}
        assert by_id[a["id"]]["trials"] == 1
        assert by_id[a["id"]]["status"] == "active"
        assert by_id[b["id"]]["material"] == "B"


class TestStoreSemantics:
    def test_fold_from_disk_equals_returned_state(self, store):
        """Randomised sessions: every record_outcome return value must equal
        a cold fold of the log it just wrote."""
        rng = random.Random(2024)
        specs = [UD_SPEC, BCD_SPEC, BCD_HALF_SPEC, RMJ_SPEC, F1_SPEC]
        for _ in range(40):
            spec = rng.choice(specs)
            session = store.create(spec, material="m")
            for _ in range(rng.randint(1, 10)):
                if session.terminated:
                    break
                y = rng.randint(0, 1)
                stim = None
                if isinstance(session.state, BcdState) and rng.random() < 0.2:
                    stim = round(rng.uniform(30.0, 150.0), 3)
                session = store.record_outcome(session.sid, y, session.trials,
                                               stimulus=stim)
                refolded = store.get(session.sid)
                assert refolded.state == session.state
                assert refolded.notes == session.notes
                assert refolded.overrides == session.overrides
                assert session_snapshot(refolded) == session_snapshot(session)

    def test_master_seed_yields_reproducible_session_seeds(self, tmp_path):
        seeds = []
        for sub in ("x", "y"):
            store = SessionStore(tmp_path / sub, master_seed=99)
            seeds.append([store.create(UD_SPEC).seed for _ in range(3)])
        assert seeds[0] == seeds[1]
        assert len(set(seeds[0])) == 3

    def test_without_master_seed_sessions_differ(self, tmp_path):
        store = SessionStore(tmp_path / "z")
        a = store.create(BCD_SPEC)
        b = store.create(BCD_SPEC)
        assert a.seed != b.seed  # 63-bit entropy collision is negligible

    def test_explicit_seed_wins(self, store):
        session = store.create(BCD_SPEC, seed=12345)
        assert session.seed == 12345

    def test_from_env(self, tmp_path):
        env = {DATA_DIR_ENV: str(tmp_path / "envstore"), MASTER_SEED_ENV: "55"}
        store = SessionStore.from_env(env)
        assert store.root == tmp_path / "envstore"
        assert store.master_seed == 55

    def test_from_env_bad_seed(self, tmp_path):
        env = {DATA_DIR_ENV: str(tmp_path), MASTER_SEED_ENV: "many"}
        with pytest.raises(ConfigError, match="must be an integer"):
            SessionStore.from_env(env)

    def test_missing_session(self, store):
        with pytest.raises(SessionNotFoundError):
            store.get("missing")

    def test_stale_echo_error_carries_expected(self, store):
        session = store.create(UD_SPEC)
        with pytest.raises(StaleEchoError) as err:
            store.record_outcome(session.sid, 1, 5)
        assert err.value.expected == 0

    def test_terminated_store_level(self, store):
        session = store.create(RMJ_SPEC)
        for _ in range(4):
            session = store.record_outcome(session.sid, 0, session.trials)
        with pytest.raises(DesignStateError, match="terminated"):
            store.record_outcome(session.sid, 0, 4)
