import json

import pytest

from cadprompt.errors import RatingsError
from cadprompt.ratings import RatingRecord, RatingStore, elapsed_by_rater, load_ratings


def test_score_range_enforced():
    RatingRecord("r", "a", 1, 7)
    with pytest.raises(RatingsError, match="feasibility"):
        RatingRecord("r", "a", 8, 4)
    with pytest.raises(RatingsError, match="novelty"):
        RatingRecord("r", "a", 4, 0)
    with pytest.raises(RatingsError, match="integer"):
        RatingRecord("r", "a", 4.5, 4)
    with pytest.raises(RatingsError, match="elapsed"):
        RatingRecord("r", "a", 4, 4, elapsed_ms=-1)


def test_store_append_and_reload(tmp_path):
    path = tmp_path / "ratings.jsonl"
    store = RatingStore(path)
    store.append(RatingRecord("r1", "a", 5, 3, 2500))
    store.append(RatingRecord("r1", "b", 2, 6, 1800))
    store.append(RatingRecord("r2", "a", 7, 1, 4000))
    assert len(store) == 3
    assert store.has("r1", "a")
    assert store.count_for_rater("r1") == 2

    reopened = RatingStore(path)
    assert len(reopened) == 3
    assert reopened.records == store.records


def test_store_rejects_duplicates(tmp_path):
    store = RatingStore(tmp_path / "r.jsonl")
    store.append(RatingRecord("r1", "a", 5, 3))
    with pytest.raises(RatingsError, match="duplicate"):
        store.append(RatingRecord("r1", "a", 1, 1))
    assert len(store) == 1


def test_load_rejects_bad_lines(tmp_path):
    path = tmp_path / "r.jsonl"
    path.write_text('{"rater_id": "r", "artifact_id": "a", "feasibility": 9, "novelty": 1}\n')
    with pytest.raises(RatingsError, match="line 0"):
        load_ratings(path)
    record = RatingRecord("r", "a", 3, 3).to_dict()
    path.write_text(json.dumps(record) + "\n" + json.dumps(record) + "\n")
    with pytest.raises(RatingsError, match="duplicate"):
        load_ratings(path)
    with pytest.raises(RatingsError, match="no ratings file"):
        load_ratings(tmp_path / "absent.jsonl")


def test_elapsed_by_rater():
    records = [
        RatingRecord("r1", "a", 4, 4, 100),
        RatingRecord("r2", "a", 4, 4, 300),
        RatingRecord("r1", "b", 4, 4, 200),
    ]
    assert elapsed_by_rater(records) == {"r1": [100, 200], "r2": [300]}
