"""Independent reference values for the C++ tests.

Written against numpy only (lstsq, SVD, brute force) so it shares no code with
the library. Run: python3 tests/oracles/derive_values.py
"""
import math

import numpy as np

TEMPLATE = np.array([
    [38.2946, 51.6963],
    [73.5318, 51.5014],
    [56.0252, 71.7366],
    [41.5493, 92.3655],
    [70.7299, 92.2041],
])


def normalize(p):
    c = p - p.mean(axis=0)
    return c / math.sqrt((c ** 2).mean())


def rotate(p, phi):
    c = p.mean(axis=0)
    r = np.array([[math.cos(phi), -math.sin(phi)], [math.sin(phi), math.cos(phi)]])
    return (p - c) @ r.T + c


def lstsq_theta(p1, p2):
    # R^T = argmin ||P1 X - P2||, theta = atan2(R21, R22)
    x, *_ = np.linalg.lstsq(normalize(p1), normalize(p2), rcond=None)
    r = x.T
    return math.atan2(r[1, 0], r[1, 1])


def grid_theta(p1, p2, step_deg=0.1):
    a, b = normalize(p1), normalize(p2)
    best = None
    for k in range(int(round(360 / step_deg))):
        t = math.radians(-180 + k * step_deg)
        r = np.array([[math.cos(t), -math.sin(t)], [math.sin(t), math.cos(t)]])
        res = ((a @ r.T - b) ** 2).sum()
        if best is None or res < best[0]:
            best = (res, t)
    return best


def section(name):
    print(f"\n# {name}")


section("normalize square template")
sq = np.array([[-1, -1], [1, -1], [0, 0], [-1, 1], [1, 1]], dtype=float)
print(normalize(sq).tolist())

section("rotation recovery (lstsq vs 0.1 deg grid)")
for deg in (30, 180, -135, 90):
    p1 = rotate(TEMPLATE, math.radians(deg))
    print(deg, repr(lstsq_theta(p1, TEMPLATE)), repr(grid_theta(p1, TEMPLATE)[1]))

section("noisy rotation: fixed perturbation")
noise = np.array([[0.8, -0.3], [-0.5, 0.6], [0.2, 0.9], [-0.7, -0.4], [0.4, 0.1]])
p1 = rotate(TEMPLATE, math.radians(12.5)) + noise
theta = lstsq_theta(p1, TEMPLATE)
res, gt = grid_theta(p1, TEMPLATE, 0.01)
x, *_ = np.linalg.lstsq(normalize(p1), normalize(TEMPLATE), rcond=None)
print("theta", repr(theta), "grid", repr(gt), "lstsq residual", repr(((normalize(p1) @ x - normalize(TEMPLATE)) ** 2).sum()))

section("crop examples (brute force over square crops)")


def brute_crop(w, h, face, lo=0.35, hi=0.45, target=0.40):
    l, t, r, b = face
    side = max(r - l, b - t)
    cx, cy = (l + r) / 2, (t + b) / 2
    best = None
    for s in range(1, min(w, h) + 1):
        ratio = side / s
        if not lo - 1e-12 <= ratio <= hi + 1e-12:
            continue
        for left in range(0, w - s + 1):
            if abs(left + s / 2 - cx) > 1:
                continue
            top = min(max(round(cy - s / 2), 0), h - s)
            key = (abs(ratio - target), abs(left + s / 2 - cx))
            if best is None or key < best[0]:
                best = (key, (left, top, left + s, top + s))
    return best[1] if best else None


print(brute_crop(1000, 1000, (400, 400, 600, 600)))
print(brute_crop(500, 500, (150, 150, 350, 350)))
print(brute_crop(1000, 1000, (0, 0, 200, 200)), "(no centered crop; shifted crop expected)")

section("affine fit")
rng = np.random.default_rng(5)
src = rng.uniform(0, 100, size=(68, 2))
dst = 2 * src + np.array([5, 7])
A = np.hstack([src, np.ones((68, 1))])
m, *_ = np.linalg.lstsq(A, dst, rcond=None)
print(np.round(m.T, 12).tolist())

section("merge hand example")
W = np.eye(2)
Amat = np.array([[1.0, 1.0]])
B = np.array([[2.0], [0.0]])
print((W + 0.5 * B @ Amat).tolist())

section("cosine")
print(repr(float(np.dot(np.array([1, 1]) / math.sqrt(2), [1, 0]))))

section("expected age with default bins, probs (0,0,0,0.7,0.3,0,0,0,0)")
edges = [0, 3, 10, 20, 30, 40, 50, 60, 70, 80]
mids = [(edges[i] + edges[i + 1]) / 2 for i in range(9)]
probs = [0, 0, 0, 0.7, 0.3, 0, 0, 0, 0]
print(repr(sum(p * m for p, m in zip(probs, mids))))

section("disc dilation: pixel counts of a single pixel dilated by radius r")
for r in range(0, 6):
    print(r, sum(1 for dy in range(-r, r + 1) for dx in range(-r, r + 1) if dx * dx + dy * dy <= r * r))

section("tts duration 0.08 s/char at 16 kHz")
for text in ("hello", "héllo wörld", ""):
    n = len(text)
    print(repr(text), n, n * round(0.08 * 16000), n * round(0.08 * 16000) / 16000)

section("rank of sum of adapters (SVD)")
rng = np.random.default_rng(11)
for ranks in ((1,), (1, 2), (2, 4), (1, 2, 4)):
    d = sum(rng.normal(size=(16, r)) @ rng.normal(size=(r, 16)) for r in ranks)
    s = np.linalg.svd(d, compute_uv=False)
    print(ranks, int((s > 1e-9 * s[0]).sum()))
