#!/usr/bin/env python3
# Copyright 2026 The supdict Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#  http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Regenerates data/corpus and data/test from the images bundled with scikit-image.

Training and test images are disjoint. Everything is stored as 8-bit
grayscale PNG, cropped to at most 512x512 from the top-left corner.
"""
import os
import sys

import numpy as np
import skimage.data
import skimage.io

TRAIN = ["chelsea.png", "rocket.jpg", "coins.png", "motorcycle_left.png", "brick.png",
         "grass.png", "gravel.png", "moon.png", "page.png", "text.png", "ihc.png",
         "hubble_deep_field.jpg", "cell.png"]
TEST = ["camera.png", "astronaut.png", "coffee.png"]


def luma(img):
    if img.ndim == 2:
        return img.astype(np.uint8)
    rgb = img[..., :3].astype(np.float64)
    y = 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]
    return np.clip(np.floor(y + 0.5), 0, 255).astype(np.uint8)


def main(root):
    src = os.path.dirname(skimage.data.__file__)
    for names, sub in ((TRAIN, "corpus"), (TEST, "test")):
        out = os.path.join(root, "data", sub)
        os.makedirs(out, exist_ok=True)
        for name in names:
            img = luma(skimage.io.imread(os.path.join(src, name)))[:512, :512]
            stem = os.path.splitext(name)[0]
            skimage.io.imsave(os.path.join(out, stem + ".png"), img, check_contrast=False)
            print(sub, stem, img.shape)


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else os.path.join(os.path.dirname(__file__), ".."))
