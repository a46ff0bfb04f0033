"""Independent reference computations used by the tests.

Nothing here imports the package's numerical code paths; these are the
slow, obvious versions the fast ones are checked against.
"""

import math
from collections import deque

import numpy as np


def Rz(t):
    c, s = math.cos(t), math.sin(t)
    return np.array([[c, -s, 0, 0], [s, c, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1.0]])


def Rx(t):
    c, s = math.cos(t), math.sin(t)
    return np.array([[1, 0, 0, 0], [0, c, -s, 0], [0, s, c, 0], [0, 0, 0, 1.0]])


def Tz(d):
    T = np.eye(4)
    T[2, 3] = d
    return T


def Tx(a):
    T = np.eye(4)
    T[0, 3] = a
    return T


def dh_elementary(a, alpha, d, offset, theta):
    return Rz(theta + offset) @ Tz(d) @ Tx(a) @ Rx(alpha)


def fk_oracle(rows, q):
    T = np.eye(4)
    for (a, alpha, d, off), th in zip(rows, q):
        T = T @ dh_elementary(a, alpha, d, off, th)
    return T


def so3_log(R):
    """Rotation vector of R (valid away from angle pi)."""
    c = (np.trace(R) - 1) / 2
    ang = math.acos(max(-1.0, min(1.0, c)))
    if ang < 1e-12:
        return np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]]) / 2
    return ang / (2 * math.sin(ang)) * np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])


def fd_jacobian(rows, q, h=1e-6):
    """Central differences of position and orientation (world angular velocity)."""
    q = np.asarray(q, dtype=float)
    J = np.zeros((6, len(q)))
    for i in range(len(q)):
        dq = np.zeros(len(q))
        dq[i] = h
        Tp, Tm = fk_oracle(rows, q + dq), fk_oracle(rows, q - dq)
        J[:3, i] = (Tp[:3, 3] - Tm[:3, 3]) / (2 * h)
        J[3:, i] = so3_log(Tp[:3, :3] @ Tm[:3, :3].T) / (2 * h)
    return J


def rodrigues(w):
    th = np.linalg.norm(w)
    if th < 1e-15:
        return np.eye(3)
    k = w / th
    K = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + math.sin(th) * K + (1 - math.cos(th)) * K @ K


def pinhole(P, u0, v0, fu, fv):
    return np.array([u0 + fu * P[0] / P[2], v0 + fv * P[1] / P[2]])


def fd_pixel_velocity(P, twist, intr, h=1e-6):
    """d/dt of the pixel of a static point P (camera frame) while the camera moves with ``twist``.

    After time t the camera has rotated by exp(t w) and moved t v (in its own
    frame), so the point's new camera coordinates are exp(t w)^T (P - t v).
    """
    v, w = np.asarray(twist[:3]), np.asarray(twist[3:])

    def px(t):
        return pinhole(rodrigues(t * w).T @ (P - t * v), *intr)

    return (px(h) - px(-h)) / (2 * h)


# --- reference Canny (pure Python loops) ---------------------------------------

def ref_canny(img, sigma, low, high):
    img = np.asarray(img, dtype=float)
    H, W = img.shape
    r = max(1, math.ceil(3 * sigma))
    k = [math.exp(-(x * x) / (2 * sigma * sigma)) for x in range(-r, r + 1)]
    s = sum(k)
    k = [x / s for x in k]

    def at(a, y, x):
        return a[min(max(y, 0), H - 1)][min(max(x, 0), W - 1)]

    tmp = [[sum(k[j] * at(img, y + j - r, x) for j in range(2 * r + 1)) for x in range(W)] for y in range(H)]
    blur = [[sum(k[j] * at(tmp, y, x + j - r) for j in range(2 * r + 1)) for x in range(W)] for y in range(H)]
    gx = [[0.0] * W for _ in range(H)]
    gy = [[0.0] * W for _ in range(H)]
    for y in range(H):
        for x in range(W):
            gx[y][x] = (at(blur, y - 1, x + 1) + 2 * at(blur, y, x + 1) + at(blur, y + 1, x + 1)
                        - at(blur, y - 1, x - 1) - 2 * at(blur, y, x - 1) - at(blur, y + 1, x - 1))
            gy[y][x] = (at(blur, y + 1, x - 1) + 2 * at(blur, y + 1, x) + at(blur, y + 1, x + 1)
                        - at(blur, y - 1, x - 1) - 2 * at(blur, y - 1, x) - at(blur, y - 1, x + 1))
    mag = [[math.hypot(gx[y][x], gy[y][x]) for x in range(W)] for y in range(H)]
    peak = max(max(row) for row in mag)
    if peak > 0:
        mag = [[m * 255.0 / peak for m in row] for row in mag]

    def m(y, x):
        return mag[y][x] if 0 <= y < H and 0 <= x < W else 0.0

    nms = [[0.0] * W for _ in range(H)]
    for y in range(H):
        for x in range(W):
            if mag[y][x] <= 0:
                continue
            ang = math.degrees(math.atan2(gy[y][x], gx[y][x])) % 180.0
            if ang < 22.5 or ang >= 157.5:
                dy, dx = 0, 1
            elif ang < 67.5:
                dy, dx = 1, 1
            elif ang < 112.5:
                dy, dx = 1, 0
            else:
                dy, dx = 1, -1
            if mag[y][x] >= m(y + dy, x + dx) and mag[y][x] > m(y - dy, x - dx):
                nms[y][x] = mag[y][x]
    out = np.zeros((H, W), dtype=bool)
    queue = deque((y, x) for y in range(H) for x in range(W) if nms[y][x] >= high)
    for y, x in queue:
        out[y, x] = True
    while queue:
        y, x = queue.popleft()
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                yy, xx = y + dy, x + dx
                if 0 <= yy < H and 0 <= xx < W and not out[yy, xx] and nms[yy][xx] >= low:
                    out[yy, xx] = True
                    queue.append((yy, xx))
    return out


def count_components8(mask):
    mask = np.asarray(mask, dtype=bool)
    H, W = mask.shape
    seen = np.zeros_like(mask)
    n = 0
    for y in range(H):
        for x in range(W):
            if mask[y, x] and not seen[y, x]:
                n += 1
                stack = [(y, x)]
                seen[y, x] = True
                while stack:
                    cy, cx = stack.pop()
                    for dy in (-1, 0, 1):
                        for dx in (-1, 0, 1):
                            yy, xx = cy + dy, cx + dx
                            if 0 <= yy < H and 0 <= xx < W and mask[yy, xx] and not seen[yy, xx]:
                                seen[yy, xx] = True
                                stack.append((yy, xx))
    return n


def shoelace(pts):
    pts = np.asarray(pts, dtype=float)
    n = len(pts)
    return 0.5 * abs(sum(pts[i][0] * pts[(i + 1) % n][1] - pts[(i + 1) % n][0] * pts[i][1] for i in range(n)))
