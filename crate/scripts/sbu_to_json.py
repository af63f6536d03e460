#!/usr/bin/env python3
"""Convert the SBU Kinect Interaction dataset to the tvsvm skeleton JSON layout.

The SBU release is a tree of the form

    <root>/<pair>/<class>/<take>/skeleton_pos.txt

where <class> is a two-digit action id (01..08). Every line of
skeleton_pos.txt is one frame:

    frame_id, x1, y1, z1, ..., x15, y15, z15, x1', y1', z1', ..., x15', y15', z15'

i.e. 1 + 2 * 15 * 3 = 91 comma-separated numbers, the first person's 15
joints followed by the second person's. The converter emits one video per
take with 30 joints of 3 coordinates each, joint order preserved.

Usage:
    sbu_to_json.py ROOT OUT.json [--pairs s01s02,s01s03,...]
    sbu_to_json.py --synthetic 3 OUT.json     # fixture in the same layout
"""

import argparse
import json
import math
import os
import sys

JOINTS_PER_PERSON = 15
COORDS = 3
FIELDS = 1 + 2 * JOINTS_PER_PERSON * COORDS


def read_take(path):
    frames = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            values = [float(v) for v in line.split(",")]
            if len(values) != FIELDS:
                raise ValueError(f"{path}:{lineno}: expected {FIELDS} fields, found {len(values)}")
            coords = values[1:]
            frames.append([coords[i : i + COORDS] for i in range(0, len(coords), COORDS)])
    if not frames:
        raise ValueError(f"{path}: no frames")
    return frames


def convert(root, pairs):
    videos = []
    for pair in sorted(os.listdir(root)):
        if pairs and pair not in pairs:
            continue
        pair_dir = os.path.join(root, pair)
        if not os.path.isdir(pair_dir):
            continue
        for cls in sorted(os.listdir(pair_dir)):
            cls_dir = os.path.join(pair_dir, cls)
            if not (os.path.isdir(cls_dir) and cls.isdigit()):
                continue
            for take in sorted(os.listdir(cls_dir)):
                path = os.path.join(cls_dir, take, "skeleton_pos.txt")
                if os.path.isfile(path):
                    videos.append({"label": int(cls), "frames": read_take(path)})
    return videos


def synthetic(n_videos):
    """Deterministic smooth two-person motions; no randomness involved."""
    videos = []
    for v in range(n_videos):
        n_frames = 10 + 3 * v
        frames = []
        for t in range(n_frames):
            phase = t / (n_frames - 1)
            frame = []
            for person in range(2):
                for j in range(JOINTS_PER_PERSON):
                    x = 0.3 + 0.4 * person + 0.02 * j + 0.05 * math.sin(math.pi * phase * (v + 1))
                    y = 0.2 + 0.04 * j + 0.03 * math.cos(math.pi * phase + j)
                    z = 2.5 + 0.1 * person + 0.2 * phase * (1 - 2 * person)
                    frame.append([round(x, 6), round(y, 6), round(z, 6)])
            frames.append(frame)
        videos.append({"label": v + 1, "frames": frames})
    return videos


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("root", nargs="?", help="SBU root directory")
    ap.add_argument("out", help="output JSON path")
    ap.add_argument("--pairs", help="comma-separated subject pairs to include")
    ap.add_argument("--synthetic", type=int, metavar="N", help="write N synthetic videos instead")
    args = ap.parse_args()

    if args.synthetic is not None:
        videos = synthetic(args.synthetic)
    elif args.root:
        pairs = set(args.pairs.split(",")) if args.pairs else None
        videos = convert(args.root, pairs)
    else:
        ap.error("need ROOT or --synthetic")
    if not videos:
        sys.exit("no videos found")
    with open(args.out, "w", encoding="utf-8", newline="\n") as f:
        json.dump({"videos": videos}, f, separators=(",", ":"))
        f.write("\n")
    print(f"wrote {len(videos)} videos to {args.out}", file=sys.stderr)


if __name__ == "__main__":
    main()
