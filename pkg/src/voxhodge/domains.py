"""Named voxel domain zoo and the domain file format.

Every named shape takes a resolution parameter N = approximate number of
voxels across the bounding box (margin of 2 empty layers included) and is
documented with its topological invariants (n, m, p), which the test suite
re-certifies with integer cubical homology.
"""

from __future__ import annotations

import numpy as np

from voxhodge.topology import VoxelDomain

MARGIN = 2

# (n, m, p) per named shape
NAMED_INVARIANTS = {
    "box": (1, 1, 0),
    "two-boxes": (2, 1, 0),
    "hollow-box": (1, 2, 0),
    "solid-torus": (1, 1, 1),
    "torus-with-cavity": (1, 2, 1),
    "genus-2": (1, 1, 2),
}


def _blank(nx, ny, nz):
    return np.zeros((nx + 2 * MARGIN, ny + 2 * MARGIN, nz + 2 * MARGIN),
                    dtype=bool)


def _box(N: int) -> np.ndarray:
    s = max(2, N - 2 * MARGIN)
    F = _blank(s, s, s)
    F[MARGIN:MARGIN + s, MARGIN:MARGIN + s, MARGIN:MARGIN + s] = True
    return F


def _two_boxes(N: int) -> np.ndarray:
    s = max(2, (N - 2 * MARGIN - 2) // 2)
    gap = 2
    F = _blank(2 * s + gap, s, s)
    a = MARGIN
    F[a:a + s, a:a + s, a:a + s] = True
    F[a + s + gap:a + 2 * s + gap, a:a + s, a:a + s] = True
    return F


def _hollow_box(N: int) -> np.ndarray:
    s = max(6, N - 2 * MARGIN)
    w = max(2, round(s / 3))
    if s - 2 * w < 2:
        w = (s - 2) // 2
    F = _blank(s, s, s)
    a, b = MARGIN, MARGIN + s
    F[a:b, a:b, a:b] = True
    F[a + w:b - w, a + w:b - w, a + w:b - w] = False
    return F


def _solid_torus(N: int) -> np.ndarray:
    s = max(6, N - 2 * MARGIN)
    arm = max(2, round(s / 3))
    hole = max(2, s - 2 * arm)
    s = 2 * arm + hole
    t = arm
    F = _blank(s, s, t)
    a = MARGIN
    F[a:a + s, a:a + s, a:a + t] = True
    F[a + arm:a + arm + hole, a + arm:a + arm + hole, :] = False
    return F


def _torus_with_cavity(N: int) -> np.ndarray:
    s = max(14, N - 2 * MARGIN)
    arm = max(6, round(s / 3))
    hole = max(2, s - 2 * arm)
    s = 2 * arm + hole
    t = 6 if s < 18 else arm
    F = _blank(s, s, t)
    a = MARGIN
    F[a:a + s, a:a + s, a:a + t] = True
    F[a + arm:a + arm + hole, a + arm:a + arm + hole, :] = False
    # cavity buried in the +x arm, two-voxel walls all around
    cx = a + arm + hole + (arm - 2) // 2
    cy = a + (s - 2) // 2
    cz = MARGIN + (t - 2) // 2
    F[cx:cx + 2, cy:cy + 2, cz:cz + 2] = False
    return F


def _genus2(N: int) -> np.ndarray:
    w = max(2, (N - 2 * MARGIN) // 5)
    ox, oy, th = 5 * w, 3 * w, w
    F = _blank(ox, oy, th)
    a = MARGIN
    F[a:a + ox, a:a + oy, a:a + th] = True
    F[a + w:a + 2 * w, a + w:a + 2 * w, :] = False
    F[a + 3 * w:a + 4 * w, a + w:a + 2 * w, :] = False
    return F


_BUILDERS = {
    "box": _box,
    "two-boxes": _two_boxes,
    "hollow-box": _hollow_box,
    "solid-torus": _solid_torus,
    "torus-with-cavity": _torus_with_cavity,
    "genus-2": _genus2,
}


def named_domain(name: str, resolution: int = 10) -> VoxelDomain:
    if name not in _BUILDERS:
        raise KeyError(f"unknown named domain {name!r}; "
                       f"choose from {sorted(_BUILDERS)}")
    return VoxelDomain(_BUILDERS[name](int(resolution)), label=f"{name}@{resolution}")


# ---------------------------------------------------------------------------
# domain files
# ---------------------------------------------------------------------------

FORMAT_HEADER = "voxhodge-domain 1"


def write_domain(dom: VoxelDomain, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"# {FORMAT_HEADER}\n")
        fh.write("box {} {} {}\n".format(*dom.box))
        for x, y, z in np.argwhere(dom.voxels):
            fh.write(f"{x} {y} {z}\n")


def read_domain(path) -> VoxelDomain:
    """Parse the voxel file format; raises ValueError with line numbers."""
    box = None
    triples = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if parts[0] == "box":
                if len(parts) != 4:
                    raise ValueError(f"{path}:{lineno}: box needs 3 dimensions")
                box = tuple(int(v) for v in parts[1:])
                continue
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: expected 'x y z', got {line!r}")
            try:
                triples.append(tuple(int(v) for v in parts))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    if not triples:
        raise ValueError(f"{path}: no voxels")
    if box is not None:
        for t in triples:
            if any(c < 0 or c >= b for c, b in zip(t, box)):
                raise ValueError(f"{path}: voxel {t} outside box {box}")
    if len(set(triples)) != len(triples):
        raise ValueError(f"{path}: duplicate voxels")
    return VoxelDomain.from_voxel_list(triples, box=box, label=str(path))
