import numpy as np
import pandas as pd
import pytest

import oracles
from linkshare._index import DAY
from linkshare.accounts import AccountLog, AccountRecord, MissingAccountError
from linkshare.embeddings import ColdUserError, EmbeddingSpace, TasteIndex
from linkshare.engagement import PlaybackLog
from linkshare.features import (COL, FEATURE_COLUMNS, MISSING, ExtractionContext, FeatureSetId, FeatureVector,
                                build_dataset, engagement_labels, extract_batch, extract_features, group_indices,
                                read_dataset, to_matrix, write_dataset)
from linkshare.multiplex import LayerKind, MultiplexNetwork
from linkshare.shares import ShareEvent, classify_app_mode

START = 100 * DAY


def tiny_context():
    """Users 1 (sender), 2 (receiver), 3 and 4 (receiver's friends), 5 (not a friend)."""
    net = MultiplexNetwork()
    net.ingest_arrays(LayerKind.SOCIAL_LISTENING, [1, 2, 2], [2, 3, 4], [START - 50 * DAY, START - 40 * DAY, START - 30 * DAY])
    net.ingest_arrays(LayerKind.COLLAB_PLAYLIST, [2], [1], [START - 10 * DAY])
    net.ingest_arrays(LayerKind.LINK_SHARE, [2, 1, 5], [1, 2, 2], [START - 5 * DAY, START + 3 * DAY, START - DAY])
    space = EmbeddingSpace([10, 11, 12, 20], np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [2.0, 0.0]]))
    plays = [(1, 10, 7, START - 20 * DAY, 60.0), (2, 11, 8, START - 20 * DAY, 60.0),
             (1, 20, 9, START + DAY, 60.0), (1, 20, 9, START + DAY + 5, 60.0), (1, 20, 9, START + 2 * DAY, 60.0)]
    # user 3 is an engaged friend of artist 9: 150 days x 2 tracks
    for d in range(1, 151):
        plays.append((3, 20, 9, START - d * DAY, 60.0))
        plays.append((3, 21, 9, START - d * DAY + 10, 60.0))
    # label week for the receiver: two tracks on the open day
    plays += [(2, 20, 9, START + 3 * DAY + 7200, 60.0), (2, 21, 9, START + 3 * DAY + 9000, 45.0)]
    pb = PlaybackLog(*zip(*plays))
    taste = TasteIndex.from_playback(space, pb, (START - 90 * DAY, START))
    accounts = AccountLog([AccountRecord(2, registered_ts=START - 400 * DAY, subscriber_since=START - DAY,
                                         usage_start_day=START // DAY - 10, daily_hours=[1.0] * 20)])
    return ExtractionContext(net, taste, pb, accounts, START)


def share(**kw):
    base = dict(sender=1, receiver=2, track_id=20, album_id=900, artist_id=9, artist_popularity_rank=42,
                album_release_age=3 * DAY, app_type="whatsapp", share_ts=START + 3 * DAY + 60,
                open_ts=START + 3 * DAY + 3600, playback_30s=True)
    base.update(kw)
    return ShareEvent(**base)


def test_hand_computed_feature_vector():
    fv = extract_features(share(), tiny_context())
    assert fv.sum_social_interactions == 1 + 1 + 1 + 1   # listening, playlist, 2->1 share, the 1->2 share at START+3d
    assert fv.direct_link_share is True
    assert fv.reciprocal_link_sharing is True              # receiver shared to sender before
    assert fv.receiver_share_in_degree == 2
    assert fv.receiver_share_out_degree == 1
    assert fv.sender_share_out_degree == 1
    # friends of 2 at share time: 1 (listening), 3, 4; engaged with artist 9: only 3
    assert fv.fraction_engaged_friends == pytest.approx(1 / 3)
    assert fv.sr_cosine == pytest.approx(0.0)               # sender taste [1,0], receiver [0,1]
    assert fv.rt_cosine == pytest.approx(0.0)               # track 20 = [2,0]
    assert fv.artist_popularity_rank == 42 and fv.release_age_s == 3 * DAY
    assert fv.sender_artist_engagement_7d == 2.0      # one unique track on each of two days
    assert fv.is_subscriber is True
    assert fv.receiver_streaming_hours_7d == 7.0
    assert fv.receiver_days_on_platform == 403


def test_labels_from_open_day():
    E, y = engagement_labels([share()], tiny_context().playback)
    assert E[0] == pytest.approx(1.30103, abs=1e-5) and bool(y[0])
    E2, y2 = engagement_labels([share(open_ts=None, playback_30s=False)], tiny_context().playback)
    assert E2[0] == 0.0 and not y2[0]


def test_missing_friends_sentinel_and_roundtrip():
    ctx = tiny_context()
    X = extract_batch([share(sender=2, receiver=1, track_id=10, artist_id=7)], ctx, strict_accounts=False)
    assert X.X[0, COL["fraction_engaged_friends_available"]] == 1.0
    v = FeatureVector.from_array(np.where(np.isnan(X.X[0]), 0.0, X.X[0]))
    assert np.array_equal(FeatureVector.from_array(v.to_array()).to_array(), v.to_array())
    none = FeatureVector(0, False, False, 0, 0, 0, None, 0.1, 0.2, 1, 0, 0.0, False, 0.0, 0)
    arr = none.to_array()
    assert arr[COL["fraction_engaged_friends"]] == MISSING and arr[COL["fraction_engaged_friends_available"]] == 0
    assert FeatureVector.from_array(arr).fraction_engaged_friends is None


def test_error_paths():
    ctx = tiny_context()
    with pytest.raises(ColdUserError):
        extract_features(share(sender=5), ctx)
    with pytest.raises(KeyError):
        extract_features(share(track_id=999), ctx)
    with pytest.raises(MissingAccountError):
        extract_features(share(receiver=1, sender=2, track_id=10, artist_id=7), ctx)


def test_future_events_do_not_change_features():
    ctx = tiny_context()
    before = extract_batch([share()], ctx).X
    ctx.network.ingest_arrays(LayerKind.SOCIAL_LISTENING, [1, 2], [2, 6], [START + 3 * DAY + 60, START + 50 * DAY])
    ctx.network.ingest_arrays(LayerKind.LINK_SHARE, [2], [1], [START + 4 * DAY])
    assert np.array_equal(extract_batch([share()], ctx).X, before, equal_nan=True)


def test_groups_partition_columns():
    idx = sorted(i for cols in group_indices().values() for i in cols)
    assert idx == list(range(len(FEATURE_COLUMNS)))
    assert FeatureSetId.SA.columns == ("sender_artist_engagement_7d",)


def brute_force_row(ev, net_events, plays_by_user, accounts, taste, start_ts):
    """Every feature recomputed from raw records with loops and sets."""
    r, s, a, t = ev.receiver, ev.sender, ev.artist_id, ev.share_ts
    anchor = ev.open_ts if ev.open_ts is not None else t
    mine = [e for e in net_events if r in (e[1], e[2]) or s in (e[1], e[2])]
    out = {}
    out["sum_social_interactions"] = sum(oracles.layer_weight(mine, lay, r, s, t) for lay in ("listening", "playlist")) \
        + oracles.layer_weight(mine, "share", r, s, t) + oracles.layer_weight(mine, "share", s, r, t)
    out["direct_link_share"] = classify_app_mode(ev.app_type).value == "direct"
    out["reciprocal_link_sharing"] = oracles.layer_weight(mine, "share", r, s, t) > 0
    out["receiver_share_in_degree"] = sum(1 for lay, x, y, tt in mine if lay == "share" and y == r and tt < t)
    out["receiver_share_out_degree"] = sum(1 for lay, x, y, tt in mine if lay == "share" and x == r and tt < t)
    out["sender_share_out_degree"] = sum(1 for lay, x, y, tt in mine if lay == "share" and x == s and tt < t)
    friends = oracles.friend_sets([e for e in mine if r in (e[1], e[2])], t).get(r, set())
    sd = start_ts // DAY
    engaged = [f for f in friends if oracles.engagement(plays_by_user.get(f, []), f, a, sd - 180, sd) > 180]
    out["fraction_engaged_friends"] = len(engaged) / len(friends) if friends else MISSING
    out["fraction_engaged_friends_available"] = bool(friends)
    vr, vs = taste.vector(r), taste.vector(s)
    vt = taste.space.vector(ev.track_id)
    cos = lambda u, v: float(np.dot(u, v) / (np.linalg.norm(u) * np.linalg.norm(v)))
    out["sr_cosine"], out["rt_cosine"] = cos(vr, vs), cos(vr, vt)
    out["artist_popularity_rank"] = ev.artist_popularity_rank
    out["release_age_s"] = ev.album_release_age
    out["sender_artist_engagement_7d"] = oracles.engagement(plays_by_user.get(s, []), s, a, t // DAY - 7, t // DAY)
    rec = next(x for x in accounts.records if x.user == r)
    out["is_subscriber"] = rec.subscriber_since is not None and rec.subscriber_since <= anchor
    od = anchor // DAY
    out["receiver_streaming_hours_7d"] = sum(h for k, h in enumerate(rec.daily_hours)
                                             if od - 7 <= rec.usage_start_day + k < od)
    out["receiver_days_on_platform"] = od - rec.registered_ts // DAY
    label = oracles.engagement(plays_by_user.get(r, []), r, a, od, od + 7) > 1.3
    return np.array([float(out[c]) for c in FEATURE_COLUMNS]), label


def test_small_world_rows_match_brute_force(small_world, small_ctx, small_dataset):
    ds, _ = small_dataset
    net_events = [(kind.value, int(x), int(y), int(tt)) for kind in LayerKind
                  for x, y, tt in zip(*small_world.network.layer_arrays(kind))]
    pb = small_world.playback
    rng = np.random.default_rng(0)
    rows = rng.choice(len(ds), 60, replace=False)
    users = set(ds.loc[rows, "sender"]) | set(ds.loc[rows, "receiver"])
    for kind in LayerKind:
        for x, y, tt in zip(*small_world.network.layer_arrays(kind)):
            if x in users or y in users:
                users |= {int(x), int(y)}
    keep = np.isin(pb.user, list(users))
    plays_by_user = {}
    for rec in zip(pb.user[keep].tolist(), pb.track[keep].tolist(), pb.artist[keep].tolist(),
                   pb.ts[keep].tolist(), pb.duration_s[keep].tolist()):
        plays_by_user.setdefault(rec[0], []).append(rec)
    events = small_world.events.set_index(["share_ts", "sender", "receiver", "track_id"])
    for i in rows:
        key = tuple(int(ds.loc[i, c]) for c in ("share_ts", "sender", "receiver", "track_id"))
        e = events.loc[key]
        ev = ShareEvent(key[1], key[2], key[3], int(e["album_id"]), int(e["artist_id"]),
                        int(e["artist_popularity_rank"]), int(e["album_release_age"]), e["app_type"], key[0],
                        int(e["open_ts"]), bool(e["playback_30s"]))
        want, label = brute_force_row(ev, net_events, plays_by_user, small_world.world.accounts,
                                      small_ctx.taste, small_ctx.analysis_start_ts)
        got = ds.loc[i, list(FEATURE_COLUMNS)].to_numpy(np.float64)
        np.testing.assert_allclose(got, want, rtol=0, atol=1e-9)
        assert ds.loc[i, "label"] == label


def test_dataset_labels_equal_planted_outcomes(small_world, small_dataset):
    ds, report = small_dataset
    truth = small_world.truth.frame()
    truth = truth[truth["extractable"]]
    merged = ds.merge(truth, on=["share_ts", "sender", "receiver", "track_id"], how="outer", indicator=True)
    assert (merged["_merge"] == "both").all()
    assert (merged["label_x"] == merged["label_y"]).all()
    assert report.n_examples == len(ds) and sum(report.drops.values()) + len(ds) == report.n_events


def test_dataset_sorted_and_roundtrip(tmp_path, small_dataset):
    ds, _ = small_dataset
    keys = list(zip(ds["share_ts"], ds["sender"], ds["receiver"], ds["track_id"]))
    assert keys == sorted(keys)
    write_dataset(ds, tmp_path / "d.csv", tmp_path / "s.json")
    back = read_dataset(tmp_path / "d.csv")
    X, y = to_matrix(ds)
    X2, y2 = to_matrix(back)
    assert np.array_equal(X, X2) and np.array_equal(y, y2)
    with pytest.raises(ValueError):
        read_dataset_missing = pd.DataFrame({"a": [1]})
        read_dataset_missing.to_csv(tmp_path / "bad.csv", index=False)
        read_dataset(tmp_path / "bad.csv")
