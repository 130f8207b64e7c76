"""Class corpora and the train/val/test split.

Two ways to obtain a corpus with identical structure:

- ``load_alphabets(data_root)`` reads an image-folder tree
  (``<root>/<collection>/<alphabet>/<character>/*.png``), binarizing and
  resizing each glyph image.
- ``synthetic_alphabets(seed)`` draws stroke-based glyphs so the full
  pipeline runs on machines without the real dataset. Same alphabet/
  character/sample nesting, same class counts after rotation expansion.

``make_splits`` turns either corpus into the canonical three-way split:
every character spawns four classes (0/90/180/270-degree rotations), the
split is alphabet-disjoint, and the rotation-expanded class counts must be
exactly (4112, 688, 1692) — totalling 6492 = 4 x 1623.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

SPLIT_SIZES = (4112, 688, 1692)          # rotation-expanded class counts
BASE_SIZES = tuple(s // 4 for s in SPLIT_SIZES)   # (1028, 172, 423) characters
IMAGE_SIZE = 28


class SplitError(ValueError):
    pass


@dataclass(frozen=True)
class CharClass:
    """One class: a character under one fixed rotation."""

    alphabet: str
    name: str
    images: np.ndarray   # (samples, S, S) uint8 in {0, 1}


@dataclass(frozen=True)
class Splits:
    train: tuple
    val: tuple
    test: tuple

    def __iter__(self):
        return iter((self.train, self.val, self.test))


# ---------------------------------------------------------------- folder tree

def load_alphabets(data_root) -> dict[str, list[tuple[str, np.ndarray]]]:
    """alphabet -> [(character name, (samples, 28, 28) binary images)]."""
    from PIL import Image

    root = os.fspath(data_root)
    if not os.path.isdir(root):
        raise SplitError(f"data root {root!r} not found")
    alphabets: dict[str, list[tuple[str, np.ndarray]]] = {}
    for collection in sorted(os.listdir(root)):
        cdir = os.path.join(root, collection)
        if not os.path.isdir(cdir):
            continue
        for alphabet in sorted(os.listdir(cdir)):
            adir = os.path.join(cdir, alphabet)
            if not os.path.isdir(adir):
                continue
            chars = []
            for char in sorted(os.listdir(adir)):
                chdir = os.path.join(adir, char)
                if not os.path.isdir(chdir):
                    continue
                imgs = []
                for fname in sorted(os.listdir(chdir)):
                    if not fname.lower().endswith((".png", ".jpg", ".bmp")):
                        continue
                    with Image.open(os.path.join(chdir, fname)) as im:
                        im = im.convert("L").resize((IMAGE_SIZE, IMAGE_SIZE))
                        # glyphs are dark ink on light ground; strokes -> 1
                        imgs.append((np.asarray(im) < 128).astype(np.uint8))
                if imgs:
                    chars.append((char, np.stack(imgs)))
            if chars:
                alphabets.setdefault(alphabet, []).extend(chars)
    if not alphabets:
        raise SplitError(f"no alphabets under {root!r}")
    return alphabets


# ------------------------------------------------------------ synthetic corpus

# alphabet sizes chosen so an exact alphabet-disjoint split exists:
# 5x[35,35,35,35,32]=172, 11x36+27=423, 5x32+28x31=1028; 50 alphabets, 1623.
_SYNTH_SIZES = (35, 35, 35, 35, 32) + (36,) * 11 + (27,) + (32,) * 5 + (31,) * 28

# glyph difficulty: per-sample control-point jitter, whole-glyph shift range,
# and the stroke-count interval (inclusive-exclusive); tuned so a trained
# model separates classes without making episodes trivial
_JITTER = 1.25
_SHIFT = 2.5
_STROKES = (3, 5)


def _render_glyph(rng: np.random.Generator, controls: np.ndarray) -> np.ndarray:
    """Rasterize jittered quadratic strokes onto a binary 28x28 canvas."""
    t = np.linspace(0.0, 1.0, 40)[:, None]
    jittered = controls + rng.normal(0.0, _JITTER, controls.shape)
    jittered += rng.uniform(-_SHIFT, _SHIFT, (1, 1, 2))    # whole-glyph shift
    p0, p1, p2 = jittered[:, 0, None], jittered[:, 1, None], jittered[:, 2, None]
    pts = ((1 - t) ** 2 * p0 + 2 * t * (1 - t) * p1 + t**2 * p2).reshape(-1, 2)
    xy = np.clip(np.rint(pts).astype(np.int64), 0, IMAGE_SIZE - 2)
    canvas = np.zeros((IMAGE_SIZE, IMAGE_SIZE), dtype=np.uint8)
    canvas[xy[:, 1], xy[:, 0]] = 1
    canvas[xy[:, 1] + 1, xy[:, 0]] = 1     # 2px strokes survive downsampling
    canvas[xy[:, 1], xy[:, 0] + 1] = 1
    return canvas


def synthetic_alphabets(
    seed: int = 0, samples_per_class: int = 12
) -> dict[str, list[tuple[str, np.ndarray]]]:
    rng = np.random.default_rng(seed)
    alphabets: dict[str, list[tuple[str, np.ndarray]]] = {}
    for a, size in enumerate(_SYNTH_SIZES):
        chars = []
        for c in range(size):
            n_strokes = int(rng.integers(*_STROKES))
            controls = rng.uniform(3.0, IMAGE_SIZE - 4.0, (n_strokes, 3, 2))
            imgs = np.stack(
                [_render_glyph(rng, controls) for _ in range(samples_per_class)]
            )
            chars.append((f"char{c:03d}", imgs))
        alphabets[f"alpha{a:02d}"] = chars
    return alphabets


# -------------------------------------------------------------------- splits

def _pick_subset(sizes: list[int], target: int) -> list[int] | None:
    """Indices whose sizes sum to target (first found in index order)."""
    reach = {0: None}   # sum -> (index used, previous sum)
    for i, s in enumerate(sizes):
        updates = {}
        for acc in reach:
            nxt = acc + s
            if nxt <= target and nxt not in reach and nxt not in updates:
                updates[nxt] = (i, acc)
        reach.update(updates)
    if target not in reach:
        return None
    picked = []
    acc = target
    while acc:
        i, prev = reach[acc]
        picked.append(i)
        acc = prev
    return sorted(picked)


def make_splits(alphabets: dict[str, list[tuple[str, np.ndarray]]]) -> Splits:
    """Alphabet-disjoint split with exact rotation-expanded class counts."""
    names = sorted(alphabets)
    sizes = [len(alphabets[a]) for a in names]
    total = sum(sizes)
    if total != sum(BASE_SIZES):
        raise SplitError(
            f"corpus has {total} characters, need {sum(BASE_SIZES)}")

    val_idx = _pick_subset(sizes, BASE_SIZES[1])
    if val_idx is None:
        raise SplitError("no alphabet subset matches the validation size")
    rest = [i for i in range(len(names)) if i not in set(val_idx)]
    test_pick = _pick_subset([sizes[i] for i in rest], BASE_SIZES[2])
    if test_pick is None:
        raise SplitError("no alphabet subset matches the test size")
    test_idx = [rest[j] for j in test_pick]
    train_idx = [i for i in rest if i not in set(test_idx)]

    def expand(indices):
        classes = []
        for i in indices:
            a = names[i]
            for char, imgs in alphabets[a]:
                for rot in range(4):
                    classes.append(CharClass(
                        alphabet=a,
                        name=f"{char}_rot{90 * rot:03d}",
                        images=np.ascontiguousarray(np.rot90(imgs, rot, axes=(1, 2))),
                    ))
        return tuple(classes)

    splits = Splits(expand(train_idx), expand(val_idx), expand(test_idx))
    got = tuple(len(s) for s in splits)
    if got != SPLIT_SIZES:
        raise SplitError(f"split sizes {got} != {SPLIT_SIZES}")
    return splits


def load_splits(data_root) -> Splits:
    return make_splits(load_alphabets(data_root))


def synthetic_splits(seed: int = 0, samples_per_class: int = 12) -> Splits:
    return make_splits(synthetic_alphabets(seed, samples_per_class))
