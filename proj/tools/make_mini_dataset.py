"""Writes the bundled 128x128 grayscale PGM image set from scikit-image's sample data.

Usage: python3 tools/make_mini_dataset.py [output_dir]
"""
import sys
from pathlib import Path

import numpy as np
from skimage import color, data, transform, util

TRAIN = ["camera", "coins", "moon", "astronaut", "coffee", "brick", "grass", "clock"]
TEST = ["chelsea", "rocket", "immunohistochemistry", "gravel"]
SIZE = 128


def load_gray(name):
    img = getattr(data, name)()
    if img.ndim == 3:
        img = color.rgb2gray(img[..., :3])
    img = util.img_as_float(img)
    h, w = img.shape
    side = min(h, w)
    top, left = (h - side) // 2, (w - side) // 2
    img = img[top:top + side, left:left + side]
    img = transform.resize(img, (SIZE, SIZE), anti_aliasing=True)
    return np.clip(np.round(img * 255.0), 0, 255).astype(np.uint8)


def write_pgm(path, pixels):
    h, w = pixels.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(pixels.tobytes())


def main():
    root = Path(sys.argv[1] if len(sys.argv) > 1 else "data")
    for split, names in (("train", TRAIN), ("test", TEST)):
        (root / split).mkdir(parents=True, exist_ok=True)
        for name in names:
            write_pgm(root / split / f"{name}.pgm", load_gray(name))


if __name__ == "__main__":
    main()
