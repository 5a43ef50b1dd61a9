#!/usr/bin/env python3
"""Regenerate reference.json and lab_map.json.

Run from anywhere; files are written next to this script.
"""
import json
import os

HERE = os.path.dirname(os.path.abspath(__file__))

RES = 0.1
NX, NY, NZ = 80, 60, 25  # 8 m x 6 m x 2.5 m


def box(x0, x1, y0, y1, z0, z1):
    """Voxels covering [x0,x1) x [y0,y1) metres and layers z0..z1 inclusive."""
    out = []
    for ix in range(round(x0 / RES), round(x1 / RES)):
        for iy in range(round(y0 / RES), round(y1 / RES)):
            for iz in range(z0, z1 + 1):
                out.append((ix, iy, iz))
    return out


def lab_map():
    vox = set()
    vox.update(box(0, 8, 0, 6, 0, 0))  # floor slab, below the nav band
    for wall in [(0, 8, 0, 0.1), (0, 8, 5.9, 6), (0, 0.1, 0, 6), (7.9, 8, 0, 6)]:
        vox.update(box(*wall, 0, NZ - 1))
    vox.update(box(3.5, 3.6, 0, 1.6, 0, NZ - 1))  # partition
    # rack rows, 2.0 m tall
    vox.update(box(1.8, 6.0, 2.0, 2.6, 0, 19))
    vox.update(box(1.0, 5.0, 4.0, 4.6, 0, 19))
    vox.update(box(6.5, 7.5, 0.5, 1.3, 0, 8))  # desk
    vox.update(box(0.1, 7.9, 3.0, 3.2, 22, 22))  # overhead cable tray
    return {
        "resolution_m": RES,
        "dims": [NX, NY, NZ],
        "origin_m": [0.0, 0.0, 0.0],
        "occupied": sorted(list(v) for v in vox),
    }


def card(node, shelf, slot, kind, model):
    return {
        "id": f"{node}/{shelf}/{slot}/{kind}",
        "kind": kind,
        "model": model,
        "node": node,
        "shelf": f"{node}/{shelf}",
        "slot": slot,
    }


def span(a, b):
    return {"id": f"SPAN/{a}-{b}", "kind": "FIBER_SPAN", "model": "SSMF", "node": a}


def reference():
    wl1 = [
        card("TN1", "S1", 1, "OT", "PH-OT200"),
        card("TN1", "S1", 4, "WSS", "PH-WSS20"),
        card("TN1", "S1", 6, "LA", "PH-AMP-B"),
        span("TN1", "TN3"),
        card("TN3", "S1", 2, "LA", "PH-AMP-B"),
        span("TN3", "TN2"),
        card("TN2", "S1", 6, "LA", "PH-AMP-B"),
        card("TN2", "S1", 4, "WSS", "PH-WSS20"),
        card("TN2", "S1", 1, "OT", "PH-OT200"),
    ]
    # The 500G transponder feeds its booster directly; the receive side at
    # TN5 demultiplexes through a WSS.
    wl2 = [
        card("TN4", "S2", 1, "OT", "D5X500Q"),
        card("TN4", "S2", 6, "LA", "ASWG"),
        span("TN4", "TN5"),
        card("TN5", "S1", 5, "WSS", "PH-WSS20"),
        card("TN5", "S1", 1, "OT", "PH-OT100"),
    ]
    wl3 = [
        card("TN6", "S1", 1, "OT", "PH-OT100"),
        card("TN6", "S1", 2, "WSS", "PH-WSS20"),
        card("TN6", "S1", 6, "LA", "PH-AMP-A"),
        span("TN6", "TN4"),
        card("TN4", "S2", 4, "LA", "ASWG"),
        card("TN4", "S1", 5, "WSS", "PH-WSS20"),
        card("TN4", "S1", 3, "MCS", "PH-MCS16"),
        card("TN4", "S1", 2, "OT", "PH-OT100"),
    ]
    spare = [
        card("TN4", "S2", 3, "LA", "ASWG"),
        card("TN4", "S2", 5, "LA", "ASWG"),
        card("TN1", "S1", 8, "AA", "PH-OSC"),
        card("TN2", "S1", 8, "AA", "PH-OSC"),
        card("TN3", "S1", 8, "AA", "PH-PSU"),
        card("TN5", "S1", 8, "AA", "PH-FAN"),
        card("TN5", "S1", 4, "LA", "PH-AMP-A"),
        card("TN5", "S1", 3, "MCS", "PH-MCS16"),
        card("TN6", "S1", 8, "AA", "PH-PSU"),
    ]
    paths = []
    edges = []
    for pid, route, rate in [("WL1", wl1, 200), ("WL2", wl2, 500), ("WL3", wl3, 100)]:
        ids = [e["id"] for e in route]
        paths.append({"id": pid, "route": ids, "line_rate_gbps": rate})
        edges += [[a, b] for a, b in zip(ids, ids[1:])]
    elements = wl1 + wl2 + wl3 + spare

    shelves = []
    for sid, node, model, point, level in [
        ("TN1/S1", "TN1", "SHELF-A", "P2", 0),
        ("TN2/S1", "TN2", "SHELF-A", "P2", 1),
        ("TN3/S1", "TN3", "SHELF-B", "P3", 0),
        ("TN4/S1", "TN4", "SHELF-A", "P4", 0),
        ("TN4/S2", "TN4", "SHELF-B", "P4", 1),
        ("TN5/S1", "TN5", "SHELF-A", "P3", 1),
        ("TN6/S1", "TN6", "SHELF-B", None, 0),
    ]:
        s = {"id": sid, "node": node, "model": model, "level": level}
        if point:
            s["point"] = point
        shelves.append(s)

    return {
        "schema_version": 1,
        "name": "six-node reference lab",
        "elements": elements,
        "edges": edges,
        "paths": paths,
        "fiber_lengths_km": {"SPAN/TN1-TN3": 50.0, "SPAN/TN3-TN2": 36.0, "SPAN/TN4-TN5": 25.0, "SPAN/TN6-TN4": 40.0},
        "shelves": shelves,
        "alarms": [
            {"element_id": "TN4/S2/1/OT", "text": "Loss of signal - card failure", "timestamp_ms": 1000},
            {"element_id": "TN4/S2/6/LA", "text": "Frame loss on WL2", "timestamp_ms": 1004},
            {"element_id": "TN5/S1/5/WSS", "text": "Frame loss on WL2", "timestamp_ms": 1009},
        ],
        "envmap_ref": "lab_map.json",
        "points": {"P1": [0.55, 0.55], "P2": [2.55, 1.55], "P3": [6.55, 3.55], "P4": [4.45, 3.65]},
        "nav": {"slab_m": [0.1, 1.8], "arrow_spacing_m": 1.0, "flag_heights": {"lower_m": 0.6, "upper_m": 1.5}},
        "qos": {"ar_gbps": 0.33, "cbr_gbps": 100.0, "duration_s": 10.0, "path": "WL1"},
        "layouts": {
            "tn4_s2": {"rows": [{"shelf": "TN4/S2", "capacity": 8}]},
            "tn4_both_shelves": {
                "rows": [{"shelf": "TN4/S2", "capacity": 8}, {"shelf": "TN4/S1", "capacity": 8}],
                "jitter_sigma": 0.01,
                "seed": 7,
            },
            "tn4_ot_hidden": {"rows": [{"shelf": "TN4/S2", "capacity": 8}], "hidden": ["TN4/S2/1/OT"]},
        },
    }


def dump(name, obj, compact=False):
    with open(os.path.join(HERE, name), "w") as f:
        if compact:
            json.dump(obj, f, separators=(",", ":"))
        else:
            json.dump(obj, f, indent=2)
        f.write("\n")


if __name__ == "__main__":
    dump("lab_map.json", lab_map(), compact=True)
    dump("reference.json", reference())
