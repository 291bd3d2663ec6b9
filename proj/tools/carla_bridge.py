#!/usr/bin/env python3
"""Line-oriented bridge between the egoexo CARLA adapter and a CARLA 0.9.15 server.

Reads one JSON request per line on stdin and answers with one JSON object per
line on stdout. Images and point clouds are written into --data-dir and
referenced by file name. Everything printed by the CARLA client library goes
to stderr so stdout carries protocol lines only.

Requests: hello, load, tick, remove_dynamic_vehicles, close.
Errors are reported as {"error": message, "kind": not-found|spawn|unavailable|backend}.
"""

import argparse
import json
import math
import os
import queue
import random
import struct
import sys
import zlib

REQUIRED_VERSION = "0.9.15"
LARGE_VEHICLES = ("carlacola", "firetruck", "fusorosa", "ambulance", "european_hgv", "sprinter", "cybertruck")
EGO_BLUEPRINT = "vehicle.tesla.model3"
TAG_PEDESTRIAN = 12
TAG_BY_BASE_TYPE = {"car": 14, "van": 14, "truck": 15, "bus": 16, "motorcycle": 18, "bicycle": 19}

PROTOCOL_OUT = sys.stdout
sys.stdout = sys.stderr


class BridgeError(Exception):
    def __init__(self, message, kind="backend"):
        super().__init__(message)
        self.kind = kind


def reply(obj):
    PROTOCOL_OUT.write(json.dumps(obj) + "\n")
    PROTOCOL_OUT.flush()


# --------------------------------------------------------------------------
# encodings


def write_png_rgb(path, rgb):
    """Minimal 8-bit RGB PNG writer for an (h, w, 3) uint8 array."""
    h, w, _ = rgb.shape
    raw = b"".join(b"\x00" + rgb[y].tobytes() for y in range(h))

    def chunk(tag, data):
        body = tag + data
        return struct.pack(">I", len(data)) + body + struct.pack(">I", zlib.crc32(body) & 0xFFFFFFFF)

    with open(path, "wb") as f:
        f.write(b"\x89PNG\r\n\x1a\n")
        f.write(chunk(b"IHDR", struct.pack(">IIBBBBB", w, h, 8, 2, 0, 0, 0)))
        f.write(chunk(b"IDAT", zlib.compress(raw, 6)))
        f.write(chunk(b"IEND", b""))


def bgra_to_rgb(image, np):
    arr = np.frombuffer(image.raw_data, dtype=np.uint8).reshape(image.height, image.width, 4)
    return np.ascontiguousarray(arr[:, :, 2::-1])


def transform_json(tf):
    return {
        "location": [tf.location.x, tf.location.y, tf.location.z],
        "rotation": [tf.rotation.pitch, tf.rotation.yaw, tf.rotation.roll],
    }


def rotation_from_matrix(m):
    """Inverse of CARLA's rotation convention (degrees)."""
    pitch = math.degrees(math.asin(max(-1.0, min(1.0, m[2][0]))))
    if abs(m[2][0]) > 1.0 - 1e-12:
        return pitch, math.degrees(math.atan2(-m[0][1], m[1][1])), 0.0
    yaw = math.degrees(math.atan2(m[1][0], m[0][0]))
    roll = math.degrees(math.atan2(-m[2][1], m[2][2]))
    return pitch, yaw, roll


# --------------------------------------------------------------------------
# session


class Bridge:
    def __init__(self, args):
        self.args = args
        self.data_dir = args.data_dir
        os.makedirs(self.data_dir, exist_ok=True)
        try:
            import carla  # noqa: F401
            import numpy  # noqa: F401
        except ImportError as e:
            raise BridgeError("python module missing: %s" % e, "unavailable")
        self.carla = carla
        self.np = numpy
        self.client = None
        self.world = None
        self.original_settings = None
        self.actors = []  # every spawned actor, destroyed on close
        self.vehicles = {}  # id -> (actor, record)
        self.walkers = {}
        self.sensors = []  # (actor_id, group, camera index, kind, sensor, queue)
        self.lidars = {}
        self.ticks = 0
        self.dt = 0.1
        self.config = {}

    # --- commands ---------------------------------------------------------

    def hello(self, _req):
        try:
            self.client = self.carla.Client(self.args.host, self.args.port)
            self.client.set_timeout(self.args.timeout)
            version = self.client.get_server_version()
        except RuntimeError as e:
            raise BridgeError(str(e), "unavailable")
        return {"carla_version": version, "client_version": self.client.get_client_version()}

    def load(self, req):
        carla = self.carla
        cfg = req["config"]
        self.config = cfg
        self.dt = float(req["fixed_delta_seconds"])
        if not req.get("synchronous_mode", False):
            raise BridgeError("synchronous mode is required")
        rng = random.Random(int(cfg.get("seed", 0)))

        town = cfg.get("town", "Town01")
        available = [m.split("/")[-1] for m in self.client.get_available_maps()]
        if town not in available:
            raise BridgeError("unknown town %s" % town, "not-found")
        self.world = self.client.load_world(town)
        self.original_settings = self.world.get_settings()
        settings = self.world.get_settings()
        settings.synchronous_mode = True
        settings.fixed_delta_seconds = self.dt
        self.world.apply_settings(settings)
        weather = cfg.get("weather", "ClearNoon")
        if not hasattr(carla.WeatherParameters, weather):
            raise BridgeError("unknown weather preset %s" % weather, "not-found")
        self.world.set_weather(getattr(carla.WeatherParameters, weather))
        self.world.set_pedestrians_seed(int(cfg.get("seed", 0)) & 0x7FFFFFFF)
        tm = self.client.get_trafficmanager(self.args.tm_port)
        tm.set_synchronous_mode(True)
        tm.set_random_device_seed(int(cfg.get("seed", 0)) & 0x7FFFFFFF)
        self.tm = tm

        library = self.world.get_blueprint_library()
        spawn_points = self.world.get_map().get_spawn_points()
        index = int(cfg.get("spawn_point", 0))
        if index < 0 or index >= len(spawn_points):
            raise BridgeError("spawn point %d out of range (%d available)" % (index, len(spawn_points)), "not-found")

        speed_lo, speed_hi = cfg.get("vehicle_speed_range_mps", [3.0, 10.0])
        ego_bp = library.find(EGO_BLUEPRINT)
        ego_bp.set_attribute("role_name", "hero")
        ego = self.world.try_spawn_actor(ego_bp, spawn_points[index])
        if ego is None:
            raise BridgeError("spawn collision: could not place the ego vehicle", "spawn")
        self._add_vehicle(ego, is_ego=True, parked=False, speed=rng.uniform(speed_lo, speed_hi))

        candidates = [bp for bp in library.filter("vehicle.*")]
        if cfg.get("exclude_large_vehicles", True):
            candidates = [bp for bp in candidates if not any(k in bp.id for k in LARGE_VEHICLES)]
        others = [p for i, p in enumerate(spawn_points) if i != index]
        rng.shuffle(others)
        wanted = int(cfg.get("n_vehicles", 0))
        placed = 0
        for point in others:
            if placed == wanted:
                break
            bp = rng.choice(candidates)
            actor = self.world.try_spawn_actor(bp, point)
            if actor is None:
                continue
            parked = rng.random() < float(cfg.get("parked_fraction", 0.25))
            self._add_vehicle(actor, is_ego=False, parked=parked, speed=0.0 if parked else rng.uniform(speed_lo, speed_hi))
            placed += 1
        if placed < wanted:
            raise BridgeError("spawn collision: could not place actor index %d" % (placed + 1), "spawn")

        walker_bps = library.filter("walker.pedestrian.*")
        controller_bp = library.find("controller.ai.walker")
        for n in range(int(cfg.get("n_pedestrians", 0))):
            for _attempt in range(50):
                loc = self.world.get_random_location_from_navigation()
                if loc is None:
                    continue
                walker = self.world.try_spawn_actor(rng.choice(walker_bps), carla.Transform(loc))
                if walker is not None:
                    break
            else:
                raise BridgeError("spawn collision: could not place pedestrian %d" % n, "spawn")
            controller = self.world.spawn_actor(controller_bp, carla.Transform(), attach_to=walker)
            self.actors += [walker, controller]
            self.walkers[walker.id] = (walker, controller)
        self.world.tick()
        for walker, controller in self.walkers.values():
            controller.start()
            controller.go_to_location(self.world.get_random_location_from_navigation())
            controller.set_max_speed(1.4)

        for vid, (actor, rec) in self.vehicles.items():
            if rec["parked"]:
                actor.apply_control(carla.VehicleControl(hand_brake=True))
            else:
                actor.set_autopilot(True, tm.get_port())
                tm.set_desired_speed(actor, rec["speed_mps"] * 3.6)

        equip_all = cfg.get("equip", "ego") == "all"
        for vid, (actor, rec) in list(self.vehicles.items()):
            rec["equipped"] = rec["is_ego"] or (equip_all and not any(k in actor.type_id for k in LARGE_VEHICLES))
        include_ego = cfg.get("include_ego_vehicle", True)
        for vid, (actor, rec) in list(self.vehicles.items()):
            if rec["equipped"]:
                self._equip(actor, req["rigs"], detach=(rec["is_ego"] and not include_ego))
        if not include_ego:
            # Sensors were placed at fixed world poses; the body itself goes.
            ego_actor, ego_rec = self.vehicles[ego.id]
            ego_rec["hidden"] = True
            ego_actor.destroy()
            self.actors.remove(ego_actor)

        offset = cfg.get("start_offset_s")
        if offset is None:
            lo, hi = cfg.get("start_offset_range_s", [1.0, 3.0])
            offset = rng.uniform(lo, hi)
        for _ in range(int(round(offset / self.dt))):
            self._advance()
        self.ticks = 0
        return {
            "start_offset_s": offset,
            "sim_time": self.world.get_snapshot().timestamp.elapsed_seconds,
            "actors": self._actor_records(),
        }

    def tick(self, _req):
        frame = self._advance()
        self.ticks += 1
        stem_base = "t%d" % self.ticks
        outputs = {}
        for actor_id, group, idx, kind, sensor, q in self.sensors:
            data = self._wait(q, frame)
            stem = "%s_%d_%s_%d" % (stem_base, actor_id, group, idx)
            entry = outputs.setdefault(actor_id, {}).setdefault(group, {}).setdefault(idx, {})
            if kind == "rgb":
                name = stem + "_rgb.png"
                write_png_rgb(os.path.join(self.data_dir, name), bgra_to_rgb(data, self.np))
                entry.update(transform_json(data.transform))
            elif kind == "optical_flow":
                name = stem + "_flow.bin"
                with open(os.path.join(self.data_dir, name), "wb") as f:
                    f.write(bytes(data.raw_data))
                kind = "flow"
            else:
                name = "%s_%s.png" % (stem, kind)
                write_png_rgb(os.path.join(self.data_dir, name), bgra_to_rgb(data, self.np))
            entry[kind] = name
        actors = []
        for actor_id in sorted(outputs):
            groups = []
            for group in ("nuscenes", "sphere"):
                cams = outputs[actor_id].get(group, {})
                groups.append({"group": group, "cameras": [cams[i] for i in sorted(cams)]})
            record = {"actor_id": actor_id, "groups": groups}
            if actor_id in self.lidars:
                sensor, q = self.lidars[actor_id]
                data = self._wait(q, frame)
                name = "%s_%d_lidar.bin" % (stem_base, actor_id)
                with open(os.path.join(self.data_dir, name), "wb") as f:
                    f.write(bytes(data.raw_data))
                record["lidar"] = dict(transform_json(data.transform), points=name)
            actors.append(record)
        snapshot = self.world.get_snapshot()
        return {
            "sim_time": snapshot.timestamp.elapsed_seconds,
            "elapsed": self.ticks * self.dt,
            "bboxes": self._bboxes(),
            "actors": actors,
        }

    def remove_dynamic_vehicles(self, _req):
        removed = []
        for vid, (actor, rec) in list(self.vehicles.items()):
            if rec["parked"] or rec["equipped"] or rec.get("hidden"):
                continue
            actor.set_autopilot(False, self.tm.get_port())
            actor.destroy()
            self.actors.remove(actor)
            del self.vehicles[vid]
            removed.append(vid)
        self.world.tick()
        return {"removed": removed}

    def close(self, _req):
        self.shutdown()
        return {}

    # --- helpers ----------------------------------------------------------

    def shutdown(self):
        for _, _, _, _, sensor, _ in self.sensors:
            sensor.stop()
        for sensor, _ in self.lidars.values():
            sensor.stop()
        for walker, controller in self.walkers.values():
            controller.stop()
        if self.client is not None:
            everything = [s for _, _, _, _, s, _ in self.sensors] + [s for s, _ in self.lidars.values()] + self.actors
            self.client.apply_batch_sync([self.carla.command.DestroyActor(a.id) for a in everything], False)
        self.sensors, self.lidars, self.actors = [], {}, []
        if self.world is not None and self.original_settings is not None:
            self.world.apply_settings(self.original_settings)
            self.tm.set_synchronous_mode(False)
            self.original_settings = None

    def _add_vehicle(self, actor, is_ego, parked, speed):
        self.actors.append(actor)
        self.vehicles[actor.id] = (
            actor,
            {"is_ego": is_ego, "parked": parked, "speed_mps": speed, "equipped": False, "type_id": actor.type_id},
        )

    def _advance(self):
        return self.world.tick()

    def _wait(self, q, frame):
        while True:
            try:
                data = q.get(timeout=self.args.timeout)
            except queue.Empty:
                raise BridgeError("sensor data for frame %d did not arrive" % frame)
            if data.frame == frame:
                return data

    def _sensor(self, blueprint, attrs, local, parent, detach):
        carla = self.carla
        bp = self.world.get_blueprint_library().find(blueprint)
        for k, v in attrs.items():
            bp.set_attribute(k, str(v))
        if detach:
            m = self.np.array(parent.get_transform().get_matrix()) @ self.np.array(local.get_matrix())
            p, y, r = rotation_from_matrix(m)
            tf = carla.Transform(carla.Location(float(m[0][3]), float(m[1][3]), float(m[2][3])), carla.Rotation(p, y, r))
            sensor = self.world.spawn_actor(bp, tf)
        else:
            sensor = self.world.spawn_actor(bp, local, attach_to=parent)
        q = queue.Queue()
        sensor.listen(q.put)
        return sensor, q

    def _equip(self, actor, rigs, detach):
        carla = self.carla
        center = actor.bounding_box.location
        kinds = ["rgb", "depth", "semantic_segmentation", "instance_segmentation"]
        if self.config.get("optical_flow", False):
            kinds.append("optical_flow")
        for group in ("nuscenes", "sphere"):
            for idx, cam in enumerate(rigs[group]):
                loc = cam["location"]
                pitch, yaw, roll = cam["rotation"]
                local = carla.Transform(
                    carla.Location(center.x + loc[0], center.y + loc[1], center.z + loc[2]),
                    carla.Rotation(pitch=pitch, yaw=yaw, roll=roll),
                )
                attrs = {"image_size_x": cam["width"], "image_size_y": cam["height"], "fov": cam["fov_deg"]}
                for kind in kinds:
                    sensor, q = self._sensor("sensor.camera." + kind, attrs, local, actor, detach)
                    label = {"semantic_segmentation": "semantic", "instance_segmentation": "instance"}.get(kind, kind)
                    self.sensors.append((actor.id, group, idx, label, sensor, q))
        lidar = self.config.get("lidar", {})
        if lidar.get("enabled", True):
            mount = lidar.get("mount_m", [0.0, 0.0, 1.0])
            # Body frame is forward-left-up; CARLA's y axis points right.
            local = carla.Transform(carla.Location(center.x + mount[0], center.y - mount[1], center.z + mount[2]))
            attrs = {
                "channels": lidar.get("channels", 32),
                "range": lidar.get("range_m", 50.0),
                "points_per_second": int(lidar.get("points_per_tick", 4096) / self.dt),
                "rotation_frequency": 1.0 / self.dt,
                "upper_fov": lidar.get("upper_fov_deg", 10.0),
                "lower_fov": lidar.get("lower_fov_deg", -30.0),
            }
            self.lidars[actor.id] = self._sensor("sensor.lidar.ray_cast", attrs, local, actor, detach)

    def _box(self, actor, class_id):
        bb = actor.bounding_box
        tf = actor.get_transform()
        c = tf.transform(bb.location)
        return {
            "actor_id": actor.id,
            "class_id": class_id,
            "center": [c.x, c.y, c.z],
            "extent": [bb.extent.x, bb.extent.y, bb.extent.z],
            "yaw_deg": tf.rotation.yaw,
        }

    def _vehicle_tag(self, actor):
        base = actor.attributes.get("base_type", "car").lower()
        return TAG_BY_BASE_TYPE.get(base, 14)

    def _bboxes(self):
        boxes = [self._box(a, self._vehicle_tag(a)) for a, rec in self.vehicles.values() if not rec.get("hidden")]
        boxes += [self._box(w, TAG_PEDESTRIAN) for w, _ in self.walkers.values()]
        return boxes

    def _actor_records(self):
        out = []
        for vid, (actor, rec) in self.vehicles.items():
            out.append(
                {
                    "id": vid,
                    "kind": "vehicle",
                    "type_id": rec["type_id"],
                    "is_ego": rec["is_ego"],
                    "equipped": rec["equipped"],
                    "parked": rec["parked"],
                    "speed_mps": rec["speed_mps"],
                    "bbox": self._box(actor, self._vehicle_tag(actor)) if not rec.get("hidden") else self._hidden_box(vid),
                }
            )
        for wid, (walker, _) in self.walkers.items():
            out.append({"id": wid, "kind": "pedestrian", "type_id": walker.type_id, "bbox": self._box(walker, TAG_PEDESTRIAN)})
        return out

    def _hidden_box(self, vid):
        return {"actor_id": vid, "class_id": 14, "center": [0, 0, 0], "extent": [0, 0, 0], "yaw_deg": 0}


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--host", default="localhost")
    parser.add_argument("--port", type=int, default=2000)
    parser.add_argument("--tm-port", type=int, default=8000)
    parser.add_argument("--timeout", type=float, default=10.0)
    parser.add_argument("--data-dir", required=True)
    args = parser.parse_args()

    bridge = None
    startup_error = None
    try:
        bridge = Bridge(args)
    except BridgeError as e:
        startup_error = e

    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        try:
            req = json.loads(line)
            cmd = req["cmd"]
        except (ValueError, KeyError) as e:
            reply({"error": "malformed request: %s" % e, "kind": "backend"})
            continue
        if startup_error is not None:
            reply({"cmd": cmd, "error": str(startup_error), "kind": startup_error.kind})
            continue
        handler = getattr(bridge, cmd, None) if cmd in ("hello", "load", "tick", "remove_dynamic_vehicles", "close") else None
        if handler is None:
            reply({"cmd": cmd, "error": "unknown command %s" % cmd, "kind": "backend"})
            continue
        try:
            out = handler(req)
            out["cmd"] = cmd
            reply(out)
        except BridgeError as e:
            reply({"cmd": cmd, "error": str(e), "kind": e.kind})
        except Exception as e:  # CARLA raises RuntimeError for most failures
            reply({"cmd": cmd, "error": "%s: %s" % (type(e).__name__, e), "kind": "backend"})
        if cmd == "close":
            break
    if bridge is not None:
        try:
            bridge.shutdown()
        except Exception:
            pass


if __name__ == "__main__":
    main()
