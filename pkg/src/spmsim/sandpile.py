"""Bak-Tang-Wiesenfeld sandpile with synchronous parallel toppling.

One update round freezes the lattice, finds every site at or above the
critical height X_c (Heaviside with H(0) = 1, so sites topple at exactly
X_c), removes 4 grains from each and hands 1 to each of its four stencil
neighbours; off-lattice neighbours absorb their grain, which the lattice
tracks in grains_lost.  This is the explicit matrix dynamics
X(t+1) = X(t) - Z f(t) applied as a stencil; Z itself (4 on the diagonal,
-1 for nearest neighbours) is never materialized.

Updates are synchronous, not the sequential abelian variant, so no
abelian properties are claimed.  Grain count is an exact integer
invariant: initial total + driven = current total + lost, checked by
`audit`.

Stabilization runs as a compiled loop over the active set (topplers and
their neighbours), so its cost scales with the number of topplings rather
than with lattice area; `apply_toppling_matrix` keeps the full-lattice
stencil round as the independent reference implementation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import SpmsimError
from . import rng as _rng

__all__ = [
    "SandpileLattice",
    "AvalancheRecord",
    "SocStatistics",
    "Histogram",
    "apply_toppling_matrix",
    "drive",
    "stabilize",
    "run_soc",
    "log_binned_histogram",
]

ROUND_CAP = 10_000_000


class SandpileLattice:
    """N x N integer heights (row-major) with open absorbing boundary."""

    def __init__(self, side: int, x_c: int = 4, heights=None):
        if side < 2:
            raise ValueError(f"side must be at least 2, got {side}")
        if x_c < 4:
            raise ValueError(f"X_c below 4 breaks nonnegativity, got {x_c}")
        self.side = side
        self.x_c = x_c
        if heights is None:
            self.heights = np.zeros((side, side), dtype=np.int64)
        else:
            heights = np.asarray(heights, dtype=np.int64)
            if heights.shape != (side, side):
                raise ValueError(f"heights must have shape {(side, side)}, got {heights.shape}")
            self.heights = heights.copy()
        self.initial_total = int(self.heights.sum())
        self.grains_lost = 0
        self.grains_driven = 0

    @property
    def total(self) -> int:
        return int(self.heights.sum())

    def audit(self) -> dict:
        """Exact integer conservation record."""
        balanced = self.initial_total + self.grains_driven == self.total + self.grains_lost
        return {
            "initial_total": self.initial_total,
            "grains_driven": self.grains_driven,
            "current_total": self.total,
            "grains_lost": self.grains_lost,
            "balanced": bool(balanced),
        }


def _topple_round(lattice: SandpileLattice) -> tuple:
    """One synchronous round from a frozen snapshot; returns (topplings, lost)."""
    h = lattice.heights
    f = h >= lattice.x_c
    n = int(np.count_nonzero(f))
    if n == 0:
        return 0, 0
    h -= 4 * f
    h[1:, :] += f[:-1, :]
    h[:-1, :] += f[1:, :]
    h[:, 1:] += f[:, :-1]
    h[:, :-1] += f[:, 1:]
    # edge sums count corners twice: a corner loses two grains off-lattice
    lost = int(f[0, :].sum() + f[-1, :].sum() + f[:, 0].sum() + f[:, -1].sum())
    lattice.grains_lost += lost
    return n, lost


def apply_toppling_matrix(lattice: SandpileLattice) -> SandpileLattice:
    """Apply one round of X(t+1) = X(t) - Z f(t) in stencil form, in place."""
    _topple_round(lattice)
    return lattice


@dataclass(frozen=True)
class AvalancheRecord:
    """size = total site-topplings, duration = rounds, dissipated = boundary loss."""

    size: int
    duration: int
    dissipated: int


def drive(lattice: SandpileLattice, site: int | None = None, stream=None) -> SandpileLattice:
    """Add one grain at a site (row-major index), or uniformly at random."""
    if site is None:
        if stream is None:
            raise ValueError("random drive needs a stream")
        site = int(stream.integers(0, lattice.side * lattice.side))
    if not 0 <= site < lattice.side * lattice.side:
        raise ValueError(f"site {site} out of range for side {lattice.side}")
    lattice.heights[divmod(site, lattice.side)] += 1
    lattice.grains_driven += 1
    return lattice


@njit(cache=True)
def _avalanche_kernel(h, x_c, cand_r, cand_c, n_cand, round_cap):
    """Synchronous rounds over an active set; work scales with topplings.

    cand_r/cand_c[:n_cand] must contain every unstable site.  The invariant
    is preserved round to round because a site can only become unstable by
    receiving a grain from a toppling neighbour, or by staying at or above
    X_c after toppling itself; both land in the next candidate list.  Each
    round reads heights frozen at round start (pass 1) before applying any
    toppling (pass 2), so the result is exactly the full-lattice update.

    Returns (size, duration, lost); duration == -1 signals the round cap.
    """
    n_rows, n_cols = h.shape
    stamp = np.zeros((n_rows, n_cols), dtype=np.int64)
    top_r = np.empty(n_rows * n_cols, dtype=np.int64)
    top_c = np.empty(n_rows * n_cols, dtype=np.int64)
    size = 0
    duration = 0
    lost = 0
    tag = 0
    while n_cand > 0:
        if duration >= round_cap:
            return size, -1, lost
        n_top = 0
        for i in range(n_cand):
            r = cand_r[i]
            c = cand_c[i]
            if h[r, c] >= x_c:
                top_r[n_top] = r
                top_c[n_top] = c
                n_top += 1
        if n_top == 0:
            break
        size += n_top
        duration += 1
        for i in range(n_top):
            r = top_r[i]
            c = top_c[i]
            h[r, c] -= 4
            if r > 0:
                h[r - 1, c] += 1
            else:
                lost += 1
            if r < n_rows - 1:
                h[r + 1, c] += 1
            else:
                lost += 1
            if c > 0:
                h[r, c - 1] += 1
            else:
                lost += 1
            if c < n_cols - 1:
                h[r, c + 1] += 1
            else:
                lost += 1
        # next candidates: topplers and their in-lattice neighbours, deduped
        tag += 1
        n_cand = 0
        for i in range(n_top):
            r = top_r[i]
            c = top_c[i]
            if stamp[r, c] != tag:
                stamp[r, c] = tag
                cand_r[n_cand] = r
                cand_c[n_cand] = c
                n_cand += 1
            if r > 0 and stamp[r - 1, c] != tag:
                stamp[r - 1, c] = tag
                cand_r[n_cand] = r - 1
                cand_c[n_cand] = c
                n_cand += 1
            if r < n_rows - 1 and stamp[r + 1, c] != tag:
                stamp[r + 1, c] = tag
                cand_r[n_cand] = r + 1
                cand_c[n_cand] = c
                n_cand += 1
            if c > 0 and stamp[r, c - 1] != tag:
                stamp[r, c - 1] = tag
                cand_r[n_cand] = r
                cand_c[n_cand] = c - 1
                n_cand += 1
            if c < n_cols - 1 and stamp[r, c + 1] != tag:
                stamp[r, c + 1] = tag
                cand_r[n_cand] = r
                cand_c[n_cand] = c + 1
                n_cand += 1
    return size, duration, lost


@njit(cache=True)
def _drive_loop_kernel(h, x_c, sites, round_cap):
    """Drive-stabilize loop; returns (sizes, durations, dissipated, lost, ok)."""
    n_rows, n_cols = h.shape
    n = sites.size
    sizes = np.zeros(n, dtype=np.int64)
    durations = np.zeros(n, dtype=np.int64)
    dissipated = np.zeros(n, dtype=np.int64)
    cand_r = np.empty(n_rows * n_cols, dtype=np.int64)
    cand_c = np.empty(n_rows * n_cols, dtype=np.int64)
    lost_total = 0
    for j in range(n):
        s = sites[j]
        r = s // n_cols
        c = s % n_cols
        h[r, c] += 1
        if h[r, c] < x_c:
            # the lattice was stable, so only the driven site can topple
            continue
        cand_r[0] = r
        cand_c[0] = c
        size, duration, lost = _avalanche_kernel(h, x_c, cand_r, cand_c, 1, round_cap)
        if duration < 0:
            return sizes, durations, dissipated, lost_total, False
        sizes[j] = size
        durations[j] = duration
        dissipated[j] = lost
        lost_total += lost
    return sizes, durations, dissipated, lost_total, True


def stabilize(lattice: SandpileLattice, round_cap: int = ROUND_CAP) -> tuple:
    """Topple until quiescent; returns (lattice, AvalancheRecord).

    Terminates for X_c >= 4 on any finite lattice; the round cap only
    guards against bugs and raising it means one was found.
    """
    rows, cols = np.nonzero(lattice.heights >= lattice.x_c)
    if rows.size == 0:
        return lattice, AvalancheRecord(size=0, duration=0, dissipated=0)
    n_sites = lattice.side * lattice.side
    cand_r = np.empty(n_sites, dtype=np.int64)
    cand_c = np.empty(n_sites, dtype=np.int64)
    cand_r[: rows.size] = rows
    cand_c[: cols.size] = cols
    size, duration, lost = _avalanche_kernel(
        lattice.heights, lattice.x_c, cand_r, cand_c, rows.size, round_cap
    )
    if duration < 0:
        raise SpmsimError(f"stabilize exceeded {round_cap} rounds; the dynamics must be broken")
    lattice.grains_lost += lost
    return lattice, AvalancheRecord(size=size, duration=duration, dissipated=lost)


@dataclass(frozen=True)
class Histogram:
    """Log-binned counts over [lo, hi) with power-of-two edges."""

    bin_lo: np.ndarray
    bin_hi: np.ndarray
    count: np.ndarray


def log_binned_histogram(values) -> Histogram:
    """Histogram with bins [0,1), [1,2), [2,4), [4,8), ... covering the data."""
    values = np.asarray(values, dtype=np.int64)
    if values.size and values.min() < 0:
        raise ValueError("histogram values must be nonnegative")
    vmax = int(values.max()) if values.size else 0
    edges = [0, 1]
    while edges[-1] <= vmax:
        edges.append(edges[-1] * 2)
    edges = np.asarray(edges, dtype=np.int64)
    count, _ = np.histogram(values, bins=edges)
    return Histogram(bin_lo=edges[:-1], bin_hi=edges[1:], count=count.astype(np.int64))


@dataclass
class SocStatistics:
    """Outcome of a drive-stabilize experiment."""

    lattice: SandpileLattice
    sizes: np.ndarray
    durations: np.ndarray
    dissipated: np.ndarray
    size_hist: Histogram
    duration_hist: Histogram
    audit: dict


def run_soc(side: int, x_c: int, n_drives: int, seed: int) -> SocStatistics:
    """Drive-stabilize loop with presampled uniform drive sites.

    All randomness comes from the stream (seed, "drive"), drawn up front,
    so the run is a pure function of (side, x_c, n_drives, seed).
    """
    if n_drives < 1:
        raise ValueError(f"n_drives must be at least 1, got {n_drives}")
    lattice = SandpileLattice(side, x_c)
    sites = _rng.stream(seed, "drive").integers(0, side * side, size=n_drives)
    sizes, durations, dissipated, lost_total, ok = _drive_loop_kernel(
        lattice.heights, x_c, sites.astype(np.int64), ROUND_CAP
    )
    if not ok:
        raise SpmsimError(f"stabilize exceeded {ROUND_CAP} rounds; the dynamics must be broken")
    lattice.grains_driven += n_drives
    lattice.grains_lost += int(lost_total)
    return SocStatistics(
        lattice=lattice,
        sizes=sizes,
        durations=durations,
        dissipated=dissipated,
        size_hist=log_binned_histogram(sizes),
        duration_hist=log_binned_histogram(durations),
        audit=lattice.audit(),
    )
