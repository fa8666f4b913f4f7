"""Session tests: lifecycle, labeling flow, training trigger, persistence."""

from __future__ import annotations

import pytest

from datanno.corpus import ParseError, parse_corpus
from datanno.quality import StoppingThresholds
from datanno.scorer import ModelConfig, TrainConfig
from datanno.session import ExportBundle, Session, SessionConfig, create_session

TINY_MODEL = ModelConfig(dim=16, layers=1, heads=2, ff_dim=16, max_len=32)
TINY_TRAIN = TrainConfig(learning_rate=0.05, batch_size=8, epochs=1, max_len=32, seed=0)


def fixture_text(n: int = 100) -> str:
    rows = []
    for i in range(n):
        if i % 2 == 0:
            rows.append(f"name:R{i % 7},eatType:pub")
        else:
            area = "city" if i % 4 else "river"
            rows.append(f"name:S{i % 5},food:Thai,area:{area}")
    return "\n".join(rows)


def make_session(n: int = 100, **overrides) -> Session:
    cfg = dict(
        k=2,
        seed=0,
        retrain_interval=10_000,
        model=TINY_MODEL,
        train=TINY_TRAIN,
    )
    cfg.update(overrides)
    return create_session(fixture_text(n), SessionConfig(**cfg))


class TestCreate:
    def test_partitions_all_ids(self):
        s = make_session(100)
        assert s.index.all_ids() == set(str(i) for i in range(100))

    def test_empty_file_rejected(self):
        with pytest.raises(ParseError):
            create_session("")

    def test_same_seed_same_index(self):
        a = make_session(60)
        b = make_session(60)
        assert a.index == b.index

    def test_conservation_at_start(self):
        s = make_session(40)
        assert s.labeled_count() + len(s.unlabeled_ids()) == len(s.corpus)


class TestBatchFlow:
    def test_first_batch_has_no_suggestions(self):
        s = make_session(30)
        batch = s.request_batch(5)
        assert len(batch) == 5
        assert all(item.suggestion is None for item in batch.items)

    def test_suggestions_after_first_label(self):
        s = make_session(30)
        first = s.request_batch(1)
        s.submit_label(first.items[0].record_id, "a cosy pub .")
        nxt = s.request_batch(3)
        assert all(item.suggestion is not None for item in nxt.items)
        assert all(item.suggestion.text == "a cosy pub ." for item in nxt.items)

    def test_batch_size_zero_rejected(self):
        with pytest.raises(ValueError):
            make_session(10).request_batch(0)

    def test_unknown_strategy_rejected(self):
        with pytest.raises(ValueError):
            make_session(10).request_batch(1, strategy="oracle")

    def test_random_strategy_draws_fresh_ids(self):
        s = make_session(20)
        a = s.request_batch(5, strategy="random")
        b = s.request_batch(5, strategy="random")
        assert not set(a.ids()) & set(b.ids())


class TestSubmit:
    def test_increments_count_and_history(self):
        s = make_session(20)
        batch = s.request_batch(2)
        s.submit_label(batch.items[0].record_id, "one label .")
        assert s.labeled_count() == 1
        s.submit_label(batch.items[1].record_id, "two labels .")
        assert s.labeled_count() == 2
        counts = [n for n, _ in s.history]
        assert counts == [1, 2]

    def test_source_classification(self):
        s = make_session(30)
        first = s.request_batch(1)
        lab0 = s.submit_label(first.items[0].record_id, "plain text .")
        assert lab0.source == "human"
        nxt = s.request_batch(2)
        accepted = s.submit_label(
            nxt.items[0].record_id, nxt.items[0].suggestion.text
        )
        corrected = s.submit_label(nxt.items[1].record_id, "something else .")
        assert accepted.source == "suggested_accepted"
        assert corrected.source == "suggested_corrected"

    def test_double_submit_rejected(self):
        s = make_session(10)
        rid = s.request_batch(1).items[0].record_id
        s.submit_label(rid, "once .")
        with pytest.raises(ValueError, match="already labeled"):
            s.submit_label(rid, "twice .")

    def test_unknown_id_rejected(self):
        with pytest.raises(ValueError, match="unknown id"):
            make_session(10).submit_label("no-such-id", "text")

    def test_empty_text_rejected(self):
        s = make_session(10)
        rid = s.request_batch(1).items[0].record_id
        with pytest.raises(ValueError, match="empty text"):
            s.submit_label(rid, "   ")

    def test_conservation_invariant(self):
        s = make_session(25)
        for _ in range(4):
            batch = s.request_batch(3)
            for item in batch.items:
                s.submit_label(item.record_id, f"label for {item.record_id} .")
            assert s.labeled_count() + len(s.unlabeled_ids()) == 25

    def test_submit_without_batch_is_human(self):
        s = make_session(10)
        lab = s.submit_label("3", "typed directly .")
        assert lab.source == "human"


class TestTrainingTrigger:
    def test_interval_launches_sync_training(self):
        s = make_session(30, retrain_interval=3)
        assert s.model.snapshot_version == 0
        batch = s.request_batch(3)
        for item in batch.items:
            s.submit_label(item.record_id, f"text {item.record_id} .")
        assert s.model.snapshot_version == 1
        assert s.status.state == "idle"
        assert s.sampler.scores  # scores published for unlabeled ids
        assert set(s.sampler.scores) == set(s.unlabeled_ids())

    def test_counter_resets_after_training(self):
        s = make_session(30, retrain_interval=2)
        batch = s.request_batch(4)
        for item in batch.items[:2]:
            s.submit_label(item.record_id, "x .")
        v1 = s.model.snapshot_version
        for item in batch.items[2:]:
            s.submit_label(item.record_id, "y .")
        assert s.model.snapshot_version == v1 + 1

    def test_train_now_and_stats_fields(self):
        s = make_session(20)
        s.submit_label("0", "seed label .")
        s.train_now()
        stats = s.stats()
        assert stats["model_version"] == 1
        assert stats["training.state"] == "idle"
        assert stats["labeled_count"] == 1
        assert stats["unlabeled_count"] == 19
        assert stats["corpus_size"] == 20
        assert 0.0 <= stats["training.until_next"] <= 1.0

    def test_background_training_publishes(self):
        s = make_session(20, retrain_interval=2, background_training=True)
        batch = s.request_batch(2)
        for item in batch.items:
            s.submit_label(item.record_id, "bg label .")
        s.wait_training(timeout=120)
        assert s.status.state == "idle"
        assert s.model.snapshot_version == 1

    def test_train_now_while_running_rejected(self):
        s = make_session(20, background_training=True)
        s.submit_label("0", "one .")
        s.train_now(wait=False)
        if s.status.state == "running":
            with pytest.raises(RuntimeError, match="already running"):
                s.train_now(wait=False)
        s.wait_training(timeout=120)

    def test_stopping_thresholds_in_stats(self):
        s = make_session(10, thresholds=StoppingThresholds(min_labeled=1))
        assert s.stats()["should_stop"] is False
        s.submit_label("0", "enough .")
        stats = s.stats()
        assert stats["should_stop"] is True
        assert stats["stop_reason"] == "labeled"


class TestExport:
    def test_single_label_predicts_rest(self):
        s = make_session(10)
        s.submit_label("0", "the only label .")
        bundle = s.export()
        assert len(bundle.annotated) == 1
        assert len(bundle.predicted) == 9
        assert all(lab.text == "the only label ." for _, lab in bundle.predicted)

    def test_fully_labeled_no_predictions(self):
        s = make_session(6)
        for rid in list(s.unlabeled_ids()):
            s.submit_label(rid, f"label {rid} .")
        bundle = s.export()
        assert len(bundle.annotated) == 6
        assert bundle.predicted == ()

    def test_partition_disjoint_exhaustive(self):
        s = make_session(15)
        for rid in ("0", "3", "7"):
            s.submit_label(rid, f"labelled {rid} .")
        bundle = s.export()
        ann = {r.id for r, *_ in bundle.annotated}
        pred = {r.id for r, _ in bundle.predicted}
        assert ann | pred == set(s.corpus.ids())
        assert not ann & pred

    def test_lines_reimport_losslessly(self):
        s = make_session(12)
        for rid in ("0", "5"):
            s.submit_label(rid, f"written {rid} .")
        text = s.export().to_lines(s.config.delim)
        back = parse_corpus(text, delim=s.config.delim)
        assert back.ids() == s.corpus.ids()
        for rec in back:
            orig = [r for r in s.corpus if r.id == rec.id][0]
            assert rec.pairs == orig.pairs
            assert rec.gold_label  # every line carries its label text

    def test_no_labels_annotated_only(self):
        bundle = make_session(5).export()
        assert bundle.annotated == ()
        assert bundle.predicted == ()


class TestPersistence:
    def test_round_trip_equality(self, tmp_path):
        s = make_session(20, retrain_interval=3)
        batch = s.request_batch(3)
        for item in batch.items:
            s.submit_label(item.record_id, f"note {item.record_id} .")
        path = tmp_path / "session.zip"
        s.save(path)
        back = Session.load(path)
        assert back.labels == s.labels
        assert [n for n, _ in back.history] == [n for n, _ in s.history]
        assert back.history[-1][1] == s.history[-1][1]
        assert back.sampler.cursor == s.sampler.cursor
        assert back.sampler.scores == s.sampler.scores
        assert back.sampler.labeled_ids == s.sampler.labeled_ids
        assert back.index == s.index
        assert back.model.snapshot_version == s.model.snapshot_version
        assert back.config == s.config

    def test_reload_gives_same_next_batch(self, tmp_path):
        s = make_session(20)
        batch = s.request_batch(2)
        for item in batch.items:
            s.submit_label(item.record_id, "pre-save label .")
        path = tmp_path / "session.zip"
        s.save(path)
        back = Session.load(path)
        a = s.request_batch(4)
        b = back.request_batch(4)
        assert a.ids() == b.ids()
        assert [i.suggestion.text for i in a.items] == [
            i.suggestion.text for i in b.items
        ]

    def test_inflight_reissued_after_reload(self, tmp_path):
        s = make_session(10)
        issued = s.request_batch(3).ids()
        path = tmp_path / "session.zip"
        s.save(path)
        back = Session.load(path)
        again = back.request_batch(10).ids()
        assert set(issued) <= set(again)

    def test_truncated_file_rejected(self, tmp_path):
        s = make_session(8)
        path = tmp_path / "session.zip"
        s.save(path)
        path.write_bytes(path.read_bytes()[:100])
        with pytest.raises(ValueError, match="corrupt"):
            Session.load(path)

    def test_wrong_format_names_expected_version(self, tmp_path):
        import json
        import zipfile

        s = make_session(8)
        path = tmp_path / "session.zip"
        s.save(path)
        bad = tmp_path / "bad.zip"
        with zipfile.ZipFile(path) as zin, zipfile.ZipFile(bad, "w") as zout:
            for name in zin.namelist():
                data = zin.read(name)
                if name == "meta.json":
                    meta = json.loads(data)
                    meta["format"] = 99
                    data = json.dumps(meta).encode()
                zout.writestr(name, data)
        with pytest.raises(ValueError, match="expected 1"):
            Session.load(bad)


class TestQualityHistory:
    def test_monotone_and_appendonly(self):
        s = make_session(30)
        for i, rid in enumerate(["0", "1", "2", "3"]):
            s.submit_label(rid, f"text number {i} .")
        counts = [n for n, _ in s.history]
        assert counts == sorted(counts)
        assert len(set(counts)) == len(counts)

    def test_coverage_tracks_signatures(self):
        s = make_session(20)
        s.submit_label("0", "pub line .")  # record 0 is in the eatType|name group
        rep = s.report()
        assert rep.per_signature_coverage["eatType|name"] > 0
        assert rep.per_signature_coverage["area|food|name"] == 0.0
