"""Counter-based random streams for reproducible parallel Monte Carlo.

Every stream is a Philox generator keyed by (master_seed, tag words),
so any (purpose, step, path block) gets its own statistically
independent stream addressable without sequential generation.  Results
are therefore bit-identical for any worker count or chunking: a chunk
of paths reads its slice of a stream by advancing the counter.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _key_words(master_seed: int, tags: tuple) -> np.ndarray:
    text = repr((int(master_seed),) + tuple(tags)).encode()
    digest = hashlib.sha256(text).digest()
    return np.frombuffer(digest[:16], dtype=np.uint64)


def stream(master_seed: int, *tags, advance: int = 0) -> np.random.Generator:
    """Generator for the stream keyed by (master_seed, *tags).

    ``advance`` skips that many 128-bit Philox blocks, letting a worker
    jump to its slice of the stream.
    """
    bitgen = np.random.Philox(key=_key_words(master_seed, tags))
    if advance:
        bitgen.advance(advance)
    return np.random.Generator(bitgen)


def standard_exponential(master_seed: int, tags: tuple, n: int) -> np.ndarray:
    return stream(master_seed, *tags).standard_exponential(n)


def uniform(master_seed: int, tags: tuple, n: int) -> np.ndarray:
    return stream(master_seed, *tags).random(n)


def standard_normal(master_seed: int, tags: tuple, n: int) -> np.ndarray:
    return stream(master_seed, *tags).standard_normal(n)


# ---------------------------------------------------------------------------
# exact stable draws (Chambers-Mallows-Stuck / Kanter)


def symmetric_stable(alpha: float, u: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Standard symmetric alpha-stable variates (E e^{i xi X} = e^{-|xi|^alpha})
    from uniforms u in (0,1) and unit exponentials w."""
    theta = np.pi * (u - 0.5)
    if alpha == 1.0:
        return np.tan(theta)
    s = (np.sin(alpha * theta) / np.cos(theta) ** (1.0 / alpha)
         * (np.cos((1.0 - alpha) * theta) / w) ** ((1.0 - alpha) / alpha))
    return s


def positive_stable(beta: float, u: np.ndarray, w: np.ndarray) -> np.ndarray:
    """One-sided beta-stable variates with Laplace transform e^{-s^beta},
    beta in (0,1) (Kanter's representation)."""
    theta = np.pi * u
    a = (np.sin(beta * theta)
         * np.sin((1.0 - beta) * theta) ** ((1.0 - beta) / beta)
         / np.sin(theta) ** (1.0 / beta))
    return a * w ** (-(1.0 - beta) / beta)


def isotropic_stable_increment(alpha: float, dim: int, dt,
                               u: np.ndarray, w: np.ndarray,
                               z: np.ndarray | None) -> np.ndarray:
    """Exact increment of the isotropic stable process with symbol |xi|^alpha
    over time dt; shape (n, dim).

    d = 1 uses CMS directly; d >= 2 subordinates a Gaussian vector by a
    positive (alpha/2)-stable time: sqrt(2 W) Z has symbol |xi|^alpha.
    """
    dt = np.asarray(dt, dtype=float)
    scale = dt ** (1.0 / alpha)
    if dim == 1:
        return (scale * symmetric_stable(alpha, u, w))[:, None]
    wpos = positive_stable(alpha / 2.0, u, w)
    return (scale * np.sqrt(2.0 * wpos))[:, None] * z
