from __future__ import annotations

import json
import os
import signal
import subprocess
import sys
import time
from datetime import date, timedelta

import pytest
import requests

from wpslab.cli import main_crawl, main_report, main_sim, main_track
from wpslab.geo import region_to_dict, BoxRegion
from wpslab.sim import SimServer, load_world

WORLD_CONFIG = {
    "seed": 11,
    "epoch": "2024-01-01",
    "noise_sigma_m": 0.0,
    "clusters": [{"lat": 40.0, "lon": -75.0, "stddev_km": 0.5, "count": 120}],
    "vendor_mix": {"74:24:9f": 0.7, "1c:3b:f3": 0.3},
}


@pytest.fixture
def world_file(tmp_path):
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(json.dumps(WORLD_CONFIG))
    out = tmp_path / "world.json"
    assert main_sim(["gen", "--config", str(cfg_path), "--out", str(out)]) == 0
    return out


@pytest.fixture
def served_world(world_file):
    world = load_world(world_file)
    with SimServer(world, port=0) as server:
        yield server


class TestSimCommands:
    def test_gen_is_seed_overridable(self, tmp_path, capsys):
        cfg_path = tmp_path / "config.json"
        cfg_path.write_text(json.dumps(WORLD_CONFIG))
        out1 = tmp_path / "w1.json"
        out2 = tmp_path / "w2.json"
        main_sim(["gen", "--config", str(cfg_path), "--out", str(out1)])
        main_sim(["gen", "--config", str(cfg_path), "--out", str(out2), "--seed", "99"])
        assert json.loads(out1.read_text())["config"]["seed"] == 11
        assert json.loads(out2.read_text())["config"]["seed"] == 99

    def test_tick(self, world_file):
        assert main_sim(["tick", "--world", str(world_file), "--days", "3"]) == 0
        assert json.loads(world_file.read_text())["day"] == 3

    def test_gen_bad_config_is_data_error(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        out = tmp_path / "w.json"
        assert main_sim(["gen", "--config", str(bad), "--out", str(out)]) == 3

    def test_usage_error_exit_code(self):
        with pytest.raises(SystemExit) as exc:
            main_sim(["gen"])  # missing required flags
        assert exc.value.code == 2


class TestServeProcess:
    def test_serve_and_query(self, world_file, tmp_path):
        env = dict(os.environ)
        proc = subprocess.Popen(
            [sys.executable, "-u", "-c",
             "import sys; from wpslab.cli import main_sim; "
             f"sys.exit(main_sim(['serve', '--world', r'{world_file}', "
             "'--port', '0']))"],
            stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True, env=env,
        )
        try:
            line = proc.stdout.readline()
            assert "serving day 0" in line
            url = line.strip().rsplit(" on ", 1)[1]
            status = requests.get(url + "/v1/status", timeout=5).json()
            assert status["listed"] == 120
        finally:
            proc.send_signal(signal.SIGINT)
            try:
                proc.wait(timeout=10)
            except subprocess.TimeoutExpired:
                proc.kill()


class TestCrawlCommands:
    def test_sweep_export_report(self, served_world, tmp_path, sample_registry_path, capsys):
        state_path = tmp_path / "state.json"
        rc = main_crawl([
            "sweep",
            "--endpoint", served_world.url,
            "--oui-db", str(sample_registry_path),
            "--per-oui", "1024",
            "--out", str(state_path),
            "--seed", "5",
            "--date", "2024-01-01",
            "--config", str(_client_config(tmp_path)),
        ])
        assert rc == 0
        out = capsys.readouterr().out
        assert "sweep done" in out
        assert state_path.exists()

        csv_path = tmp_path / "corpus.csv"
        assert main_crawl(["export", "--state", str(state_path),
                           "--format", "csv", "--out", str(csv_path)]) == 0
        text = csv_path.read_text()
        assert text.startswith("bssid,lat,lon,first_seen,last_seen")

        geojson_path = tmp_path / "corpus.geojson"
        assert main_crawl(["export", "--state", str(state_path),
                           "--format", "geojson", "--out", str(geojson_path)]) == 0
        assert json.loads(geojson_path.read_text())["type"] == "FeatureCollection"

        bins_path = tmp_path / "bins.csv"
        assert main_crawl(["export", "--state", str(state_path),
                           "--format", "bins", "--out", str(bins_path)]) == 0
        assert bins_path.read_text().startswith("geohash,count")

        rc = main_report(["vendors", "--state", str(state_path),
                          "--oui-db", str(sample_registry_path), "--top", "3"])
        assert rc == 0
        out = capsys.readouterr().out
        assert "total BSSIDs" in out

        bins2 = tmp_path / "bins2.csv"
        assert main_report(["bins", "--state", str(state_path), "--out", str(bins2)]) == 0

    def test_region_crawl_cli(self, served_world, tmp_path, capsys):
        world = served_world.world
        seeds_path = tmp_path / "seeds.csv"
        seeds_path.write_text("bssid\n" + str(world.aps[0].bssid) + "\n")
        region_path = tmp_path / "region.json"
        region_path.write_text(json.dumps(region_to_dict(BoxRegion(39.5, 40.5, -75.5, -74.5))))
        state_path = tmp_path / "rstate.json"
        rc = main_crawl([
            "region",
            "--endpoint", served_world.url,
            "--seeds", str(seeds_path),
            "--region", str(region_path),
            "--out", str(state_path),
            "--date", "2024-01-01",
        ])
        assert rc == 0
        assert "region crawl done" in capsys.readouterr().out
        state = json.loads(state_path.read_text())
        assert len(state["discovered"]) == 120

    def test_unreachable_endpoint_is_network_error(self, tmp_path, sample_registry_path, capsys):
        rc = main_crawl([
            "sweep",
            "--endpoint", "http://127.0.0.1:1",
            "--oui-db", str(sample_registry_path),
            "--per-oui", "16",
            "--out", str(tmp_path / "s.json"),
        ])
        assert rc == 4
        assert "network error" in capsys.readouterr().err

    def test_missing_registry_is_data_error(self, served_world, tmp_path, capsys):
        rc = main_crawl([
            "sweep",
            "--endpoint", served_world.url,
            "--oui-db", str(tmp_path / "nope.txt"),
            "--per-oui", "16",
            "--out", str(tmp_path / "s.json"),
        ])
        assert rc == 3


def _client_config(tmp_path):
    path = tmp_path / "client.json"
    path.write_text(json.dumps({"rate": 5000, "in_flight": 4}))
    return path


class TestTrackCommands:
    def run_daily(self, server, tmp_path, days=12):
        world = server.world
        sample_path = tmp_path / "sample.csv"
        sample_path.write_text("\n".join(str(ap.bssid) for ap in world.aps[:60]))
        snaps_dir = tmp_path / "snaps"
        epoch = date(2024, 1, 1)
        for n in range(days):
            rc = main_track([
                "resample",
                "--endpoint", server.url,
                "--sample", str(sample_path),
                "--snapshots", str(snaps_dir),
                "--date", (epoch + timedelta(days=n)).isoformat(),
                "--config", str(_client_config(tmp_path)),
            ])
            assert rc == 0
            server.tick()
        return snaps_dir

    def test_longitudinal_pipeline(self, world_file, tmp_path, capsys):
        world = load_world(world_file)
        # script one mover so the movers command has something to find
        from oracles import offset_position

        ap = world.aps[0]
        ap.moves.append((4, offset_position(ap.true_pos.lat, ap.true_pos.lon,
                                            north_m=5000.0, east_m=0.0)))
        with SimServer(world, port=0) as server:
            snaps_dir = self.run_daily(server, tmp_path)

            decay_csv = tmp_path / "decay.csv"
            assert main_track(["decay", "--snapshots", str(snaps_dir),
                               "--baseline", "2024-01-01", "--out", str(decay_csv)]) == 0
            first = decay_csv.read_text().splitlines()[1]
            assert first == "2024-01-01,1.000000"

            lt_csv = tmp_path / "lifetimes.csv"
            assert main_track(["lifetimes", "--snapshots", str(snaps_dir),
                               "--out", str(lt_csv)]) == 0
            assert lt_csv.read_text().splitlines()[0] == "days,count,cumulative_fraction"

            movers_csv = tmp_path / "movers.csv"
            assert main_track(["movers", "--snapshots", str(snaps_dir),
                               "--threshold-km", "1.0", "--out", str(movers_csv)]) == 0
            lines = movers_csv.read_text().splitlines()
            assert len(lines) == 2  # header + the scripted mover
            assert str(world.aps[0].bssid) in lines[1]

            region_path = tmp_path / "region.json"
            region_path.write_text(json.dumps(region_to_dict(BoxRegion(39.5, 40.5, -75.5, -74.5))))
            assert main_track(["disappear", "--snapshots", str(snaps_dir),
                               "--region", str(region_path),
                               "--t0", "2024-01-01", "--t1", "2024-01-10",
                               "--out", str(tmp_path / "dis")]) == 0
            assert (tmp_path / "dis_vanished.csv").exists()
            assert (tmp_path / "dis_bins.csv").exists()

            assert main_track(["inflow", "--snapshots", str(snaps_dir),
                               "--region", str(region_path),
                               "--out", str(tmp_path / "inf")]) == 0
            assert (tmp_path / "inf_origins.csv").exists()

    def test_validate_command(self, tmp_path, capsys):
        ref = tmp_path / "ref.csv"
        cand = tmp_path / "cand.csv"
        rows = ["bssid,lat,lon"]
        cand_rows = ["bssid,lat,lon"]
        for i in range(1, 11):
            rows.append(f"74:24:9f:00:00:{i:02x},40.{i:04d},-75.0")
            if i == 1:
                cand_rows.append(f"74:24:9f:00:00:{i:02x},-180,-180")
            else:
                cand_rows.append(f"74:24:9f:00:00:{i:02x},40.{i:04d},-75.0")
        rows.append("74:24:9f:00:00:ff,0,0")  # null island
        ref.write_text("\n".join(rows))
        cand.write_text("\n".join(cand_rows))
        assert main_track(["validate", "--reference", str(ref),
                           "--candidate", str(cand)]) == 0
        out = capsys.readouterr().out
        assert "dropped at (0,0):      1" in out
        assert "unknown to candidate:  1 (10.0%)" in out


class TestEndpointResolution:
    def test_env_var_respected_and_flag_wins(self, served_world, tmp_path, sample_registry_path, monkeypatch):
        monkeypatch.setenv("WPS_ENDPOINT", "http://127.0.0.1:1")
        rc = main_crawl([
            "sweep",
            "--oui-db", str(sample_registry_path),
            "--per-oui", "16",
            "--out", str(tmp_path / "s.json"),
        ])
        assert rc == 4  # env pointed at a dead port
        rc = main_crawl([
            "sweep",
            "--endpoint", served_world.url,  # flag beats env
            "--oui-db", str(sample_registry_path),
            "--per-oui", "16",
            "--out", str(tmp_path / "s2.json"),
        ])
        assert rc == 0

    def test_config_document_supplies_endpoint(self, served_world, tmp_path, sample_registry_path, monkeypatch):
        monkeypatch.delenv("WPS_ENDPOINT", raising=False)
        cfg = tmp_path / "settings.json"
        cfg.write_text(json.dumps({"endpoint": served_world.url, "rate": 5000}))
        rc = main_crawl([
            "sweep",
            "--config", str(cfg),
            "--oui-db", str(sample_registry_path),
            "--per-oui", "16",
            "--out", str(tmp_path / "s3.json"),
        ])
        assert rc == 0
