# Copyright 2026 The sliceprop Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Serves one sliceprop request directory with a SAM2-family model.

Reads request.json, frames.raw and cond.raw from the directory given on the
command line and writes masks.raw (one uint8 plane per frame) plus
response.json. Requires the `sam2` package; the model config defaults to
$MEDSAM2_MODEL_CFG or sam2_hiera_t.yaml.
"""

import json
import os
import random
import sys
import tempfile

import numpy as np


def fail(out_dir, message):
    with open(os.path.join(out_dir, "response.json"), "w") as fh:
        json.dump({"error": message}, fh)
    sys.exit(1)


def main(out_dir):
    with open(os.path.join(out_dir, "request.json")) as fh:
        req = json.load(fh)
    size = req["image_size"]
    n = req["frame_count"]
    frames = np.fromfile(os.path.join(out_dir, "frames.raw"), dtype=np.uint8).reshape(n, size, size, 3)
    cond_raw = np.fromfile(os.path.join(out_dir, "cond.raw"), dtype=np.uint8)
    cond = cond_raw.reshape(len(req["conditioning"]), size, size) if req["conditioning"] else None

    try:
        import torch
        from sam2.build_sam import build_sam2, build_sam2_video_predictor
        from sam2.sam2_image_predictor import SAM2ImagePredictor
    except ImportError as exc:
        fail(out_dir, f"sam2 is not installed: {exc}")

    seed = int(req.get("seed", 0))
    random.seed(seed)
    np.random.seed(seed)
    torch.manual_seed(seed)
    cfg = os.environ.get("MEDSAM2_MODEL_CFG", "sam2_hiera_t.yaml")
    device = req["device"]
    masks = np.zeros((n, size, size), dtype=np.uint8)

    with torch.inference_mode():
        if req["mode"] == "segment":
            predictor = SAM2ImagePredictor(build_sam2(cfg, req["checkpoint"], device=device))
            predictor.set_image(frames[0])
            p = req["prompts"][0]
            kwargs = {"box": np.array(p["box"], dtype=np.float32), "multimask_output": False}
            if p["points"]:
                pts = np.array(p["points"], dtype=np.float32)
                kwargs["point_coords"] = pts[:, :2]
                kwargs["point_labels"] = pts[:, 2].astype(np.int32)
            out, _, _ = predictor.predict(**kwargs)
            masks[0] = (out[0] > 0).astype(np.uint8)
        else:
            from PIL import Image

            predictor = build_sam2_video_predictor(cfg, req["checkpoint"], device=device)
            with tempfile.TemporaryDirectory() as video_dir:
                for i in range(n):
                    Image.fromarray(frames[i]).save(os.path.join(video_dir, f"{i:05d}.jpg"), quality=95)
                state = predictor.init_state(video_path=video_dir)
                for k, frame in enumerate(req["conditioning"]):
                    predictor.add_new_mask(state, frame_idx=frame, obj_id=1, mask=cond[k].astype(bool))
                start = max(req["conditioning"]) if req["reverse"] else min(req["conditioning"])
                for idx, _, logits in predictor.propagate_in_video(
                    state, start_frame_idx=start, reverse=req["reverse"]
                ):
                    masks[idx] = (logits[0, 0] > 0).cpu().numpy().astype(np.uint8)

    masks.tofile(os.path.join(out_dir, "masks.raw"))
    with open(os.path.join(out_dir, "response.json"), "w") as fh:
        json.dump({"ok": True}, fh)


if __name__ == "__main__":
    if len(sys.argv) != 2:
        print("usage: medsam2_runner.py <request_dir>", file=sys.stderr)
        sys.exit(2)
    main(sys.argv[1])
