#!/usr/bin/env python3
"""Convert the digit JSON files of the npm `mnist` package into IDX files.

The package ships roughly 1000 MNIST digits per class as flattened 28x28
intensities in [0, 1]. Each class is split deterministically: the first
`--train-frac` of its images go to the training pair, the rest to the test
pair. Output names follow the standard MNIST file names.
"""
import argparse
import json
import pathlib
import struct


def write_pair(out_dir, prefix, images, labels):
    with open(out_dir / f"{prefix}-images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(images), 28, 28))
        for img in images:
            f.write(bytes(img))
    with open(out_dir / f"{prefix}-labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(bytes(labels))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("digits_dir", type=pathlib.Path)
    ap.add_argument("out_dir", type=pathlib.Path)
    ap.add_argument("--train-frac", type=float, default=0.7)
    args = ap.parse_args()

    per_class = []
    for digit in range(10):
        raw = json.loads((args.digits_dir / f"{digit}.json").read_text())["data"]
        n = len(raw) // 784
        imgs = [[max(0, min(255, round(v * 255))) for v in raw[i * 784:(i + 1) * 784]] for i in range(n)]
        per_class.append(imgs)

    train, test = [], []
    for digit, imgs in enumerate(per_class):
        cut = int(round(len(imgs) * args.train_frac))
        train += [(img, digit) for img in imgs[:cut]]
        test += [(img, digit) for img in imgs[cut:]]

    # Interleave classes so files are not sorted by label.
    def interleave(items):
        buckets = [[x for x in items if x[1] == d] for d in range(10)]
        out = []
        for i in range(max(len(b) for b in buckets)):
            out += [b[i] for b in buckets if i < len(b)]
        return out

    args.out_dir.mkdir(parents=True, exist_ok=True)
    for prefix, items in (("train", interleave(train)), ("t10k", interleave(test))):
        write_pair(args.out_dir, prefix, [x[0] for x in items], [x[1] for x in items])
        print(f"{prefix}: {len(items)} images")


if __name__ == "__main__":
    main()
