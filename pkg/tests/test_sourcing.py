"""Three-stage filtering loop: thresholds, verdict folding, journal replay."""

import json
import logging

import pytest

from screenkit.sourcing.backends import CLASSES, ScriptedClassifierBackend
from screenkit.sourcing.journal import Journal, read_events
from screenkit.sourcing.orchestrator import (
    Orchestrator,
    OrchestratorConfig,
    OutstandingReviewError,
    Phase,
    PhaseError,
    SeedError,
    Verdict,
)
from screenkit.sourcing.queue import ConflictError

TS = 1000.0

SEED_SETS = {cls: [f"seed-{cls}-{i}" for i in range(10)] for cls in CLASSES}

TEST_CONFIG = OrchestratorConfig().scaled_for_test_profile()


def versions_full():
    """Four scripted model versions driving the reference scenario.

    v1 classifies the round-1 batch; absorbing each round trains the next
    version, whose accuracy drives the freeze check: 0.80, 0.90, then 0.96
    which crosses the strict 0.95 bar. v4 also serves the bulk stage.
    """
    return [
        {"accuracy": 0.50, "classifications": {
            "b1": ["valid", 0.95], "b2": ["invalid", 0.85], "b3": ["valid", 0.80],
            "b4": ["unrelated", 0.81], "b5": ["valid", 0.79], "b6": ["valid", 0.801],
        }},
        {"accuracy": 0.80, "classifications": {
            "b1": ["valid", 0.95], "c1": ["valid", 0.90], "c2": ["valid", 0.80],
            "c3": ["invalid", 0.99],
        }},
        {"accuracy": 0.90, "classifications": {"d1": ["valid", 0.96]}},
        {"accuracy": 0.96, "classifications": {
            "e1": ["valid", 0.95], "e2": ["valid", 0.90], "e3": ["valid", 0.89],
            "e4": ["invalid", 0.99], "e5": ["unrelated", 0.95],
        }},
    ]


def make_orch(tmp_path, versions=None, name="journal.jsonl"):
    backend = ScriptedClassifierBackend(versions or versions_full())
    return Orchestrator(
        TEST_CONFIG,
        backend,
        tmp_path / name,
        intake_path=tmp_path / "intake.txt",
        clock=lambda: TS,
    )


def accept(orch, image_id):
    orch.submit_verdict(Verdict(image_id, "accept", "alice", TS))


def reject(orch, image_id):
    orch.submit_verdict(Verdict(image_id, "reject", "alice", TS))


def relabel(orch, image_id, cls):
    orch.submit_verdict(Verdict(image_id, "relabel", "alice", TS, relabel_class=cls))


def run_round1(orch):
    orch.stage1_seed(SEED_SETS)
    orch.stage2_ingest_batch(["b1", "b2", "b3", "b4", "b5", "b6"])
    accept(orch, "b1")
    relabel(orch, "b2", "valid")
    reject(orch, "b4")
    accept(orch, "b6")
    orch.stage2_absorb_verdicts_and_retrain()


def run_round2(orch):
    orch.stage2_ingest_batch(["b1", "c1", "c2", "c3"])
    accept(orch, "b1")  # duplicate of a pool member; absorb must skip it
    accept(orch, "c1")
    reject(orch, "c3")
    orch.stage2_absorb_verdicts_and_retrain()


def run_round3_and_bulk(orch):
    orch.stage2_ingest_batch(["d1"])
    accept(orch, "d1")
    orch.stage2_absorb_verdicts_and_retrain()
    return orch.stage3_bulk_filter(["e1", "e2", "e3", "e4", "e5"])


def run_full(orch):
    run_round1(orch)
    run_round2(orch)
    return run_round3_and_bulk(orch)


class TestStage1:
    def test_seed_populates_pool_and_holdout(self, tmp_path):
        orch = make_orch(tmp_path)
        state = orch.stage1_seed(SEED_SETS)
        assert state.phase is Phase.ITERATING
        assert state.round == 1
        assert state.model_version == "v1"
        assert state.train_count == 1
        # 10 per class, holdout fraction 0.1 -> 1 held out per class
        assert len(orch.holdout) == 3
        assert len(orch.pool) == 27
        assert all(e.provenance == "seed" for e in orch.pool.values())
        assert not set(orch.pool) & set(orch.holdout)
        for cls in CLASSES:
            held = [i for i, c in orch.holdout.items() if c == cls]
            assert len(held) == 1

    def test_holdout_split_deterministic(self, tmp_path):
        a = make_orch(tmp_path, name="a.jsonl")
        b = make_orch(tmp_path, name="b.jsonl")
        a.stage1_seed(SEED_SETS)
        b.stage1_seed(SEED_SETS)
        assert a.holdout == b.holdout

    def test_missing_class_rejected(self, tmp_path):
        orch = make_orch(tmp_path)
        bad = {k: v for k, v in SEED_SETS.items() if k != "invalid"}
        with pytest.raises(SeedError):
            orch.stage1_seed(bad)

    def test_below_minimum_rejected(self, tmp_path):
        orch = make_orch(tmp_path)
        bad = dict(SEED_SETS)
        bad["valid"] = ["only-4-a", "only-4-b", "only-4-c", "only-4-d"]
        with pytest.raises(SeedError):
            orch.stage1_seed(bad)

    def test_duplicate_ids_rejected(self, tmp_path):
        orch = make_orch(tmp_path)
        bad = dict(SEED_SETS)
        bad["valid"] = ["dup"] * 10
        with pytest.raises(SeedError):
            orch.stage1_seed(bad)

    def test_reseed_rejected(self, tmp_path):
        orch = make_orch(tmp_path)
        orch.stage1_seed(SEED_SETS)
        with pytest.raises(PhaseError):
            orch.stage1_seed(SEED_SETS)


class TestStage2:
    def test_retention_threshold_is_strict(self, tmp_path):
        orch = make_orch(tmp_path)
        orch.stage1_seed(SEED_SETS)
        items = orch.stage2_ingest_batch(["b1", "b2", "b3", "b4", "b5", "b6"])
        retained = [i.image_id for i in items]
        # 0.80 exactly and below are dropped; 0.801 survives
        assert retained == ["b1", "b2", "b4", "b6"]
        assert orch.queue.counts(1)["pending"] == 4

    def test_ingest_requires_iterating_phase(self, tmp_path):
        orch = make_orch(tmp_path)
        with pytest.raises(PhaseError):
            orch.stage2_ingest_batch(["b1"])

    def test_oversize_batch_rejected(self, tmp_path):
        orch = make_orch(tmp_path)
        orch.stage1_seed(SEED_SETS)
        with pytest.raises(ValueError):
            orch.stage2_ingest_batch([f"x{i}" for i in range(21)])

    def test_absorb_blocks_on_pending_items(self, tmp_path):
        orch = make_orch(tmp_path)
        orch.stage1_seed(SEED_SETS)
        orch.stage2_ingest_batch(["b1", "b2", "b3", "b4", "b5", "b6"])
        accept(orch, "b1")
        with pytest.raises(OutstandingReviewError) as err:
            orch.stage2_absorb_verdicts_and_retrain()
        assert set(err.value.image_ids) == {"b2", "b4", "b6"}

    def test_verdicts_fold_into_pool(self, tmp_path):
        orch = make_orch(tmp_path)
        run_round1(orch)
        assert orch.pool["b1"].label == "valid"
        assert orch.pool["b1"].provenance == "human_verified"
        assert orch.pool["b1"].round_added == 1
        # relabel overrides the predicted class
        assert orch.pool["b2"].label == "valid"
        assert "b4" not in orch.pool  # rejected
        assert "b3" not in orch.pool  # dropped before review
        assert orch.state.round == 2
        assert orch.state.model_version == "v2"
        assert orch.state.phase is Phase.ITERATING

    def test_duplicate_pool_member_skipped_with_warning(self, tmp_path, caplog):
        orch = make_orch(tmp_path)
        run_round1(orch)
        with caplog.at_level(logging.WARNING, logger="screenkit.sourcing.orchestrator"):
            run_round2(orch)
        assert "b1" in caplog.text
        assert orch.pool["b1"].round_added == 1  # original entry untouched
        assert orch.pool["c1"].round_added == 2

    def test_zero_accepted_skips_retraining(self, tmp_path, caplog):
        orch = make_orch(tmp_path)
        orch.stage1_seed(SEED_SETS)
        orch.stage2_ingest_batch(["b1", "b2", "b3", "b4", "b5", "b6"])
        for image_id in ("b1", "b2", "b4", "b6"):
            reject(orch, image_id)
        with caplog.at_level(logging.WARNING, logger="screenkit.sourcing.orchestrator"):
            state = orch.stage2_absorb_verdicts_and_retrain()
        assert "retrain skipped" in caplog.text
        assert state.round == 2
        assert state.model_version == "v1"
        assert state.train_count == 1

    def test_freeze_requires_strictly_better_accuracy(self, tmp_path):
        versions = versions_full()
        versions[1]["accuracy"] = 0.95  # exactly at the bar: not enough
        orch = make_orch(tmp_path, versions=versions)
        run_round1(orch)
        assert orch.state.phase is Phase.ITERATING
        assert orch.state.frozen_version is None
        assert orch.state.round == 2

    def test_freeze_at_configured_round(self, tmp_path):
        orch = make_orch(tmp_path)
        run_round1(orch)
        run_round2(orch)
        orch.stage2_ingest_batch(["d1"])
        accept(orch, "d1")
        state = orch.stage2_absorb_verdicts_and_retrain()
        assert state.phase is Phase.FROZEN
        assert state.frozen_version == "v4"
        assert state.train_count == 4

    def test_conflicting_verdict_leaves_journal_untouched(self, tmp_path):
        orch = make_orch(tmp_path)
        orch.stage1_seed(SEED_SETS)
        orch.stage2_ingest_batch(["b1", "b2", "b3", "b4", "b5", "b6"])
        accept(orch, "b1")
        before = len(read_events(orch.journal.path))
        with pytest.raises(ConflictError):
            reject(orch, "b1")
        assert len(read_events(orch.journal.path)) == before

    def test_verdict_validation(self):
        with pytest.raises(ValueError):
            Verdict("x", "maybe", "alice", TS)
        with pytest.raises(ValueError):
            Verdict("x", "relabel", "alice", TS)  # missing relabel_class
        with pytest.raises(ValueError):
            Verdict("x", "relabel", "alice", TS, relabel_class="bogus")
        with pytest.raises(ValueError):
            Verdict("x", "accept", "alice", TS, relabel_class="valid")


class TestStage3:
    def test_bulk_requires_frozen_model(self, tmp_path):
        orch = make_orch(tmp_path)
        orch.stage1_seed(SEED_SETS)
        with pytest.raises(PhaseError):
            orch.stage3_bulk_filter(["e1"])

    def test_final_threshold_is_inclusive_and_class_gated(self, tmp_path):
        orch = make_orch(tmp_path)
        kept = run_full(orch)
        # 0.90 exactly is kept; valid below 0.9 and other classes drop
        assert kept == ["e1", "e2"]
        assert orch.state.phase is Phase.BULK_FILTERING
        assert orch.intake == ["e1", "e2"]

    def test_intake_file_written_and_idempotent(self, tmp_path):
        orch = make_orch(tmp_path)
        run_full(orch)
        intake = tmp_path / "intake.txt"
        first = intake.read_text(encoding="utf-8")
        assert first == "e1\ne2\n"
        orch.write_intake()
        assert intake.read_text(encoding="utf-8") == first


class TestReplay:
    def test_full_run_replays_to_identical_state(self, tmp_path):
        orch = make_orch(tmp_path)
        run_full(orch)
        replayed = Orchestrator.replay(
            TEST_CONFIG,
            ScriptedClassifierBackend(versions_full()),
            tmp_path / "journal.jsonl",
            intake_path=tmp_path / "intake.txt",
        )
        assert replayed.state_snapshot() == orch.state_snapshot()
        assert replayed.backend.model_version == "v4"

    def test_crash_mid_round_then_resume_matches_uninterrupted(self, tmp_path):
        # reference: uninterrupted run
        ref = make_orch(tmp_path, name="ref.jsonl")
        ref_kept = run_full(ref)

        # crashed run: stops right after absorbing round 1
        crashed = make_orch(tmp_path, name="crash.jsonl")
        run_round1(crashed)
        del crashed  # simulate process death; leases and memory are gone

        resumed = Orchestrator.replay(
            TEST_CONFIG,
            ScriptedClassifierBackend(versions_full()),
            tmp_path / "crash.jsonl",
            intake_path=tmp_path / "intake.txt",
            clock=lambda: TS,
        )
        assert resumed.state.round == 2
        assert resumed.state.model_version == "v2"
        run_round2(resumed)
        kept = run_round3_and_bulk(resumed)
        assert kept == ref_kept
        assert resumed.state_snapshot() == ref.state_snapshot()

    def test_leases_are_volatile(self, tmp_path):
        orch = make_orch(tmp_path)
        orch.stage1_seed(SEED_SETS)
        orch.stage2_ingest_batch(["b1", "b2", "b3", "b4", "b5", "b6"])
        leased = orch.queue_next("alice")
        assert leased.lease_reviewer == "alice"

        replayed = Orchestrator.replay(
            TEST_CONFIG,
            ScriptedClassifierBackend(versions_full()),
            tmp_path / "journal.jsonl",
            clock=lambda: TS,
        )
        item = replayed.queue.get(leased.image_id, 1)
        assert item.lease_reviewer is None
        # and the snapshot ignores leases entirely
        assert replayed.state_snapshot() == orch.state_snapshot()

    def test_torn_tail_ignored(self, tmp_path):
        orch = make_orch(tmp_path)
        run_round1(orch)
        snapshot = orch.state_snapshot()
        with (tmp_path / "journal.jsonl").open("a", encoding="utf-8") as fh:
            fh.write('{"event": "enqueued", "round": 2, "items": [["x",')
        replayed = Orchestrator.replay(
            TEST_CONFIG,
            ScriptedClassifierBackend(versions_full()),
            tmp_path / "journal.jsonl",
            clock=lambda: TS,
        )
        assert replayed.state_snapshot() == snapshot

    def test_torn_middle_line_is_corruption(self, tmp_path):
        path = tmp_path / "journal.jsonl"
        path.write_text('{"event": "trained", "model_ver\n{"event": "phase", "phase": "iterating", "round": 1}\n')
        with pytest.raises(json.JSONDecodeError):
            read_events(path)

    def test_unknown_event_rejected(self, tmp_path):
        path = tmp_path / "journal.jsonl"
        Journal(path).append({"event": "gremlin"})
        with pytest.raises(ValueError):
            Orchestrator.replay(TEST_CONFIG, ScriptedClassifierBackend(versions_full()), path)

    def test_phase_regression_rejected(self, tmp_path):
        path = tmp_path / "journal.jsonl"
        journal = Journal(path)
        journal.append({"event": "phase", "phase": "iterating", "round": 1})
        journal.append({"event": "phase", "phase": "seeding"})
        with pytest.raises(PhaseError):
            Orchestrator.replay(TEST_CONFIG, ScriptedClassifierBackend(versions_full()), path)


class TestScriptedBackend:
    def test_versions_advance_on_train(self):
        backend = ScriptedClassifierBackend(versions_full())
        assert backend.model_version == "v0"
        assert backend.train({}) == "v1"
        assert backend.classify(["b1"]) == [("valid", 0.95)]

    def test_classify_before_training_rejected(self):
        backend = ScriptedClassifierBackend(versions_full())
        with pytest.raises(RuntimeError):
            backend.classify(["b1"])

    def test_exhausted_versions_rejected(self):
        backend = ScriptedClassifierBackend(versions_full()[:1])
        backend.train({})
        with pytest.raises(RuntimeError):
            backend.train({})

    def test_unknown_image_rejected(self):
        backend = ScriptedClassifierBackend(versions_full())
        backend.train({})
        with pytest.raises(KeyError):
            backend.classify(["who-is-this"])

    def test_seek_bounds(self):
        backend = ScriptedClassifierBackend(versions_full())
        backend.seek(4)
        assert backend.model_version == "v4"
        with pytest.raises(ValueError):
            backend.seek(5)

    def test_from_file(self, tmp_path):
        path = tmp_path / "classifier.json"
        path.write_text(json.dumps({"versions": versions_full()}), encoding="utf-8")
        backend = ScriptedClassifierBackend.from_file(path)
        backend.train({})
        assert backend.evaluate({}) == 0.50
