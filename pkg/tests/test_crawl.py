from __future__ import annotations

import json
from datetime import date

import pytest

from wpslab.crawl import (
    CheckpointError,
    CrawlState,
    checkpoint,
    global_sweep,
    region_crawl,
    resume,
    state_to_dict,
)
from wpslab.geo import BoxRegion, GeoPosition
from wpslab.mac import Oui, build_seed_set, OuiRegistry
from wpslab.protocol import TransportError
from wpslab.sim import ClusterSpec, LocalTransport, MitigationSpec, WorldConfig, WorldModel, generate_world

from conftest import local_client, make_cluster_world

OUI = Oui.parse("74:24:9f")
D0 = date(2024, 1, 1)


def seed_set_for(*ouis: str):
    registry = OuiRegistry()
    for text in ouis:
        registry.add(Oui.parse(text), f"Vendor {text}")
    return build_seed_set(registry)


class KillSwitch(RuntimeError):
    """Raised by the killing transport to simulate a mid-run crash."""


class KillingTransport:
    def __init__(self, inner, kill_after: int):
        self.inner = inner
        self.kill_after = kill_after
        self.sent = 0

    def __call__(self, body):
        if self.sent >= self.kill_after:
            raise KillSwitch(f"killed after {self.sent} requests")
        self.sent += 1
        return self.inner(body)


class CountingTransport:
    def __init__(self, inner):
        self.inner = inner
        self.bodies = []

    def __call__(self, body):
        self.bodies.append(body)
        return self.inner(body)


class TestGlobalSweep:
    def test_empty_world_yields_nothing(self):
        cfg = WorldConfig(seed=1, vendor_mix=((OUI, 1.0),))
        world = WorldModel(cfg, [])
        client = local_client(world)
        state = global_sweep(client, seed_set_for("74:24:9f"), per_oui=512,
                             rng_seed=0, observed_date=D0)
        assert state.direct_hits == 0
        assert state.discovered == {}
        assert state.requests_sent > 0

    def test_hits_and_amplification_on_clustered_world(self):
        # 2000 live BSSIDs under one prefix, densely clustered: a handful of
        # random guesses land, and each landing reveals hundreds of neighbors
        world = make_cluster_world(count=2000, seed=31, stddev_km=0.5)
        client = local_client(world)
        state = global_sweep(client, seed_set_for("74:24:9f"), per_oui=1 << 15,
                             rng_seed=3, observed_date=D0)
        assert state.direct_hits >= 1
        assert state.amplification >= 10
        assert len(state.discovered) > state.direct_hits
        live = {ap.bssid for ap in world.aps}
        assert set(state.discovered) <= live

    def test_no_bssid_queried_twice(self):
        world = make_cluster_world(count=100, seed=32)
        counting = CountingTransport(LocalTransport(world))
        client = local_client(world)
        client.transport = counting
        global_sweep(client, seed_set_for("74:24:9f", "00:00:0c"), per_oui=2048,
                     rng_seed=1, observed_date=D0)
        asked = [b for body in counting.bodies for b in json.loads(body)["bssids"]]
        assert len(asked) == len(set(asked))
        assert len(asked) == 4 * 2048  # two prefixes, each with its local twin

    def test_discovered_never_sentinel(self):
        world = make_cluster_world(count=50, seed=33)
        client = local_client(world)
        state = global_sweep(client, seed_set_for("74:24:9f"), per_oui=4096,
                             rng_seed=2, observed_date=D0)
        assert all(not rec.pos.is_sentinel for rec in state.discovered.values())

    def test_counters_monotone_and_consistent(self):
        world = make_cluster_world(count=500, seed=34, stddev_km=0.3)
        client = local_client(world)
        state = global_sweep(client, seed_set_for("74:24:9f"), per_oui=8192,
                             rng_seed=4, observed_date=D0)
        assert state.direct_hits + state.nearby_learned == len(state.discovered)
        assert state.queried  # every guess marked
        assert state.requests_sent >= len(state.queried) // 100

    def test_chunk_failures_requeued_once(self):
        world = make_cluster_world(count=30, seed=35)

        class FlakyOnce:
            def __init__(self, inner):
                self.inner = inner
                self.failed = False

            def __call__(self, body):
                if not self.failed:
                    self.failed = True
                    raise TransportError("transient outage")
                return self.inner(body)

        client = local_client(world, max_attempts=1)
        client.transport = FlakyOnce(LocalTransport(world))
        state = global_sweep(client, seed_set_for("74:24:9f"), per_oui=256,
                             rng_seed=5, observed_date=D0)
        # the failed chunk was requeued and its BSSIDs ended up queried
        assert len(state.queried) == 512


class TestRegionCrawl:
    def test_single_cluster_fully_discovered(self):
        world = make_cluster_world(count=50, seed=36, stddev_km=0.5)
        region = BoxRegion(39.5, 40.5, -75.5, -74.5)
        client = local_client(world)
        state = region_crawl(client, [world.aps[0].bssid], region, observed_date=D0)
        assert set(state.discovered) == {ap.bssid for ap in world.aps}
        assert all(rec.in_region for rec in state.discovered.values())

    def test_matches_reachability_oracle(self):
        # The response graph depends on request composition: BSSIDs requested
        # together are excluded from each other's nearby lists, letting the
        # cap-sized list reach past them. Exact equality with the one-query-
        # per-BSSID graph oracle therefore holds at batch size 1; batching can
        # only widen discovery, never narrow it.
        from oracles import reachable_in_region

        for seed, cap in ((37, 25), (38, 400), (39, 5)):
            world = make_cluster_world(count=300, seed=seed, stddev_km=4.0,
                                       mitigations=MitigationSpec(nearby_cap=cap))
            region = BoxRegion(39.8, 40.2, -75.3, -74.7)
            seed_mac = world.aps[0].bssid
            expected_all, expected_in = reachable_in_region(world, [seed_mac], region, cap)

            single = region_crawl(local_client(world, batch_size=1), [seed_mac],
                                  region, observed_date=D0)
            assert set(single.discovered) == expected_all, f"seed={seed} cap={cap}"
            got_in = {m for m, rec in single.discovered.items() if rec.in_region}
            assert got_in == expected_in

            batched = region_crawl(local_client(world), [seed_mac], region,
                                   observed_date=D0)
            assert set(batched.discovered) >= expected_all
            batched_in = {m for m, rec in batched.discovered.items() if rec.in_region}
            assert batched_in >= expected_in

    def test_out_of_region_recorded_but_not_expanded(self):
        # two tight clusters 30 km apart; region covers only the first
        cfg = WorldConfig(
            seed=40,
            clusters=(
                ClusterSpec(40.0, -75.0, 0.3, 40),
                ClusterSpec(40.27, -75.0, 0.3, 40),  # ~30 km north
            ),
            vendor_mix=((OUI, 1.0),),
        )
        world = generate_world(cfg)
        region = BoxRegion(39.8, 40.13, -75.5, -74.5)
        north = {ap.bssid for ap in world.aps if ap.true_pos.lat > 40.2}
        south_seed = next(ap.bssid for ap in world.aps if ap.true_pos.lat < 40.13)
        counting = CountingTransport(LocalTransport(world))
        client = local_client(world)
        client.transport = counting
        state = region_crawl(client, [south_seed], region, observed_date=D0)
        asked = {b for body in counting.bodies for b in json.loads(body)["bssids"]}
        assert not (asked & {str(m) for m in north}), "out-of-region BSSIDs were queried"
        flagged_out = {m for m, rec in state.discovered.items() if rec.in_region is False}
        assert flagged_out <= north
        if flagged_out:
            assert all(not state.discovered[m].in_region for m in flagged_out)

    def test_unknown_seed_yields_empty_crawl(self):
        world = make_cluster_world(count=20, seed=41)
        client = local_client(world)
        state = region_crawl(client, [OUI.bssid(0xDDDDDD)],
                             BoxRegion(-1, 1, -1, 1), observed_date=D0)
        assert state.discovered == {}
        assert state.requests_sent == 1

    def test_requires_seeds(self):
        world = make_cluster_world(count=5, seed=42)
        with pytest.raises(ValueError):
            region_crawl(local_client(world), [], BoxRegion(-1, 1, -1, 1))

    def test_frontier_disjoint_from_queried(self):
        state = CrawlState()
        mac = OUI.bssid(1)
        assert state.enqueue(mac)
        assert not state.enqueue(mac)
        popped = state.pop_frontier()
        state.queried.add(popped)
        assert not state.enqueue(mac)


class TestMergeSemantics:
    def test_rediscovery_keeps_first_position_until_changed(self):
        state = CrawlState()
        mac = OUI.bssid(7)
        here = GeoPosition(40.0, -75.0)
        state.merge_record(mac, here, D0, "direct")
        state.merge_record(mac, here, date(2024, 1, 5), "nearby")
        rec = state.discovered[mac]
        assert rec.first_seen == D0
        assert rec.last_seen == date(2024, 1, 5)
        assert len(rec.history) == 1
        there = GeoPosition(40.1, -75.0)
        state.merge_record(mac, there, date(2024, 1, 9), "nearby")
        assert rec.history == [(D0, here), (date(2024, 1, 9), there)]
        assert rec.pos == there

    def test_sentinel_merge_rejected(self):
        state = CrawlState()
        with pytest.raises(ValueError):
            state.merge_record(OUI.bssid(1), GeoPosition(-180.0, -180.0), D0, "direct")


class TestCheckpointResume:
    def test_round_trip(self, tmp_path):
        world = make_cluster_world(count=120, seed=43)
        client = local_client(world)
        state = global_sweep(client, seed_set_for("74:24:9f"), per_oui=4096,
                             rng_seed=6, observed_date=D0)
        path = tmp_path / "state.json"
        checkpoint(state, path)
        again = resume(path)
        assert state_to_dict(again) == state_to_dict(state)

    def test_kill_midway_then_resume_equals_uninterrupted(self, tmp_path):
        seeds = seed_set_for("74:24:9f", "00:00:0c", "8c:49:62")
        per_oui = 2048
        rng_seed = 9

        def fresh_world():
            cfg = WorldConfig(
                seed=44,
                clusters=(ClusterSpec(40.0, -75.0, 0.4, 600),),
                vendor_mix=((OUI, 0.5), (Oui.parse("00:00:0c"), 0.5)),
            )
            return generate_world(cfg)

        uninterrupted = global_sweep(
            local_client(fresh_world()), seeds, per_oui, rng_seed, observed_date=D0
        )

        world = fresh_world()
        total_requests = (len(seeds) * per_oui) // 100 + len(seeds)
        killer = KillingTransport(LocalTransport(world), kill_after=total_requests // 2)
        client = local_client(world)
        client.transport = killer
        path = tmp_path / "ckpt.json"
        with pytest.raises(KillSwitch):
            global_sweep(client, seeds, per_oui, rng_seed, observed_date=D0,
                         checkpoint_path=path, checkpoint_every=3)
        partial = resume(path)
        assert 0 < len(partial.queried) < len(uninterrupted.queried)

        finished = global_sweep(local_client(world), seeds, per_oui, rng_seed,
                                state=partial, observed_date=D0, checkpoint_path=path)
        assert set(finished.discovered) == set(uninterrupted.discovered)
        for mac, rec in finished.discovered.items():
            assert rec.pos == uninterrupted.discovered[mac].pos
        assert finished.queried == uninterrupted.queried

    def test_resume_rejects_empty_file(self, tmp_path):
        path = tmp_path / "empty.json"
        path.write_text("")
        with pytest.raises(CheckpointError, match="empty"):
            resume(path)

    def test_resume_rejects_corrupt_json(self, tmp_path):
        path = tmp_path / "corrupt.json"
        path.write_text('{"format": "wps-crawl/1", "queried": [')
        with pytest.raises(CheckpointError):
            resume(path)

    def test_resume_rejects_wrong_format(self, tmp_path):
        path = tmp_path / "other.json"
        path.write_text(json.dumps({"format": "nope"}))
        with pytest.raises(CheckpointError):
            resume(path)

    def test_resume_rejects_missing_file(self, tmp_path):
        with pytest.raises(CheckpointError):
            resume(tmp_path / "missing.json")

    def test_resume_rejects_mangled_record(self, tmp_path):
        doc = {
            "format": "wps-crawl/1",
            "queried": [],
            "frontier": [],
            "counters": {"requests_sent": 0, "direct_hits": 0, "nearby_learned": 0},
            "discovered": {"74:24:9f:00:00:01": {"lat": 1.0}},
        }
        path = tmp_path / "mangled.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(CheckpointError, match="corrupt"):
            resume(path)
