import math

import pytest
from hypothesis import given, strategies as st

from coopcar.cam import CoopAwarenessMsg
from coopcar.ldm import LocalDynamicMap
from coopcar.positioning.frames import GeoPoint
from oracles import brute_force_distance

CENTER = GeoPoint(44.0, 11.0)


def cam(sid, gdt=0, lat=44.0, lon=11.0, speed=None, heading=None):
    return CoopAwarenessMsg(
        stationId=sid, genDeltaTime=gdt, latitude=round(lat * 1e7), longitude=round(lon * 1e7), speed=speed, heading=heading
    )


def test_latest_wins():
    ldm = LocalDynamicMap()
    assert ldm.upsert(cam(1, 0), 0.0)
    assert ldm.upsert(cam(1, 100, lat=44.001), 100.0)
    assert len(ldm) == 1
    assert ldm.get(1).position.latitude == pytest.approx(44.001)


def test_two_stations():
    ldm = LocalDynamicMap()
    ldm.upsert(cam(1), 0.0)
    ldm.upsert(cam(2), 0.0)
    assert len(ldm) == 2 and 1 in ldm and 2 in ldm


def test_duplicate_is_noop():
    ldm = LocalDynamicMap()
    ldm.upsert(cam(1, 7, speed=100), 0.0)
    before = ldm.entries()
    assert not ldm.upsert(cam(1, 7, lat=45.0, speed=200), 50.0)
    assert ldm.entries() == before


def test_no_position_and_stale_receive():
    ldm = LocalDynamicMap()
    assert not ldm.upsert(CoopAwarenessMsg(stationId=1, latitude=None, longitude=None), 0.0)
    ldm.upsert(cam(1, 1), 100.0)
    assert not ldm.upsert(cam(1, 2), 50.0)


def test_empty_query():
    assert LocalDynamicMap().query(CENTER, 0.0) == []


def test_entry_at_center():
    ldm = LocalDynamicMap()
    ldm.upsert(cam(1), 0.0)
    (r,) = ldm.query(CENTER, 10.0)
    assert r.distance == 0.0 and r.ageMs == 10.0


def test_one_millidegree_north():
    ldm = LocalDynamicMap()
    ldm.upsert(cam(1, lat=44.001), 0.0)
    (r,) = ldm.query(CENTER, 0.0)
    assert r.distance == pytest.approx(111.19, abs=0.2)
    assert r.distance == pytest.approx(math.radians(0.001) * 6371000.0, rel=1e-9)


def test_gc_default_age():
    ldm = LocalDynamicMap()
    ldm.upsert(cam(1), 0.0)
    ldm.upsert(cam(2), 200.0)
    assert ldm.gc(1600.0) == [1]
    assert 2 in ldm  # aged 1400 ms
    assert ldm.gc(1600.0) == []


def test_query_max_age_override():
    ldm = LocalDynamicMap()
    ldm.upsert(cam(1), 0.0)
    assert ldm.query(CENTER, 500.0, max_age_ms=400) == []
    assert len(ldm.query(CENTER, 500.0, max_age_ms=500)) == 1


def test_ordering_ties_by_station_id():
    ldm = LocalDynamicMap()
    for sid in (9, 3, 5):
        ldm.upsert(cam(sid, lat=44.0005), 0.0)
    ldm.upsert(cam(1, lat=44.002), 0.0)
    assert [r.entry.stationId for r in ldm.query(CENTER, 0.0)] == [3, 5, 9, 1]


ops = st.lists(
    st.tuples(
        st.integers(0, 6),  # station
        st.integers(0, 20),  # genDeltaTime
        st.floats(-0.005, 0.005),
        st.floats(-0.005, 0.005),
        st.floats(0, 300),  # time advance
    ),
    max_size=60,
)


@given(ops, st.floats(100, 3000))
def test_store_properties(operations, max_age):
    ldm = LocalDynamicMap(max_age_ms=max_age)
    now = 0.0
    seen = set()
    for sid, gdt, dlat, dlon, dt in operations:
        now += dt
        current = ldm.get(sid)
        before = ldm.entries()
        changed = ldm.upsert(cam(sid, gdt, 44.0 + dlat, 11.0 + dlon), now)
        seen.add(sid)
        if current is not None and current.lastCamGenDeltaTime == gdt:
            assert not changed and ldm.entries() == before
        if changed and current is not None:
            assert ldm.get(sid).insertTime >= current.insertTime
        assert len(ldm) <= len(seen)
        results = ldm.query(CENTER, now)
        assert all(r.ageMs <= max_age and r.ageMs >= 0 and r.distance >= 0 for r in results)
        keys = [(r.distance, r.entry.stationId) for r in results]
        assert keys == sorted(keys)
        assert len({r.entry.stationId for r in results}) == len(results)
        if dt > 250:
            ldm.gc(now)
            assert all(now - e.insertTime <= max_age for e in ldm.entries())


@given(st.floats(-60, 60), st.floats(-170, 170), st.floats(0, 2 * math.pi), st.floats(1.0, 999.0))
def test_haversine_matches_brute_force(lat, lon, bearing, dist):
    # place a point ~dist metres away, then compare both distance methods
    dlat = math.degrees(dist * math.cos(bearing) / 6371000.0)
    dlon = math.degrees(dist * math.sin(bearing) / (6371000.0 * math.cos(math.radians(lat))))
    ldm = LocalDynamicMap()
    ldm.upsert(cam(1, lat=lat + dlat, lon=lon + dlon), 0.0)
    (r,) = ldm.query(GeoPoint(lat, lon), 0.0)
    e = ldm.get(1).position
    oracle = brute_force_distance(lat, lon, e.latitude, e.longitude)
    assert r.distance == pytest.approx(oracle, rel=1e-3)
