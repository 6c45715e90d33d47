"""Pseudo-crossbar of DG-FeFET cells with column-wise back gates.

Rows carry input voltages, columns sum drain currents, and every column has
its own back-gate line. Two read-out levels are exposed:

* device level (:func:`matvec`): full conductance model per cell, affine in w;
* algorithm level (:func:`effective_weight_matrix`): ``W_eff = k(v_bg) * W``
  with the column gain ``k`` from a :class:`GainMap`.

Faults mask the read-out only; stored weights stay queryable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable

import numpy as np

from .device import Device, FeFETCell
from .errors import DimensionError, DomainError, VbgRangeError

__all__ = [
    "GainMap",
    "CrossbarArray",
    "matvec",
    "effective_weight_matrix",
    "effective_matvec",
    "read_column_sum",
    "apply_fault_mask",
]


@dataclass(frozen=True)
class GainMap:
    """Linear back-gate to weight-gain map ``k = 1 + lambda_k * v_bg``."""

    lambda_k: float = 0.25
    k_range: tuple[float, float] = (0.75, 1.75)

    def __post_init__(self):
        if not (math.isfinite(self.lambda_k) and self.lambda_k > 0):
            raise DomainError("lambda_k must be positive")
        lo, hi = (float(k) for k in self.k_range)
        if not lo <= 1.0 <= hi:
            raise DomainError(f"k_range {self.k_range!r} must contain 1")
        object.__setattr__(self, "k_range", (lo, hi))

    @classmethod
    def for_device(cls, lambda_k: float, vbg_range: tuple[float, float]) -> "GainMap":
        """Gain map whose k range is exactly what ``vbg_range`` can realise."""
        lo, hi = vbg_range
        return cls(lambda_k, (1.0 + lambda_k * lo, 1.0 + lambda_k * hi))

    def k(self, v_bg):
        return 1.0 + self.lambda_k * np.asarray(v_bg, dtype=float)

    def vbg(self, k):
        """Back-gate voltage realising gain ``k`` (clamped into ``k_range``)."""
        k = np.clip(np.asarray(k, dtype=float), *self.k_range)
        return (k - 1.0) / self.lambda_k

    def check(self, k) -> None:
        lo, hi = self.k_range
        k = np.asarray(k)
        # tolerate rounding from the vbg -> k -> vbg round trip
        eps = 1e-12 * max(1.0, abs(hi))
        if np.any(k < lo - eps) or np.any(k > hi + eps):
            raise VbgRangeError(f"gain outside k_range [{lo}, {hi}]")


@dataclass
class CrossbarArray:
    """n_rows x n_cols array. Cells share one :class:`Device` context.

    Cells are held as plain arrays (``w`` and a shared conductance window)
    rather than as objects; :meth:`cell` materialises one as a :class:`FeFETCell`.
    """

    w: np.ndarray
    col_vbg: np.ndarray = None
    faults: np.ndarray = None
    device: Device = field(default_factory=Device)
    g_min: float = 1.0e-6
    g_max: float = 1.0e-5

    def __post_init__(self):
        self.w = np.array(self.w, dtype=float, copy=True)
        if self.w.ndim != 2:
            raise DimensionError("weights must be a 2-D matrix")
        if np.any(self.w < 0) or np.any(self.w > 1) or not np.all(np.isfinite(self.w)):
            raise DomainError("weights must lie in [0, 1]")
        n_rows, n_cols = self.w.shape
        if self.col_vbg is None:
            self.col_vbg = np.zeros(n_cols)
        self.col_vbg = np.array(self.col_vbg, dtype=float, copy=True).reshape(-1)
        if self.col_vbg.shape != (n_cols,):
            raise DimensionError(f"col_vbg must have length {n_cols}")
        self.device.mobility.check(self.col_vbg)
        if self.faults is None:
            self.faults = np.zeros((n_rows, n_cols), dtype=bool)
        self.faults = np.array(self.faults, dtype=bool, copy=True)
        if self.faults.shape != self.w.shape:
            raise DimensionError(f"fault mask must be {self.w.shape}, got {self.faults.shape}")
        if not 0 < self.g_min < self.g_max:
            raise DomainError("need 0 < g_min < g_max")

    @classmethod
    def uniform(cls, n_rows: int, n_cols: int, w: float = 0.0, **kw) -> "CrossbarArray":
        return cls(np.full((n_rows, n_cols), float(w)), **kw)

    @property
    def shape(self) -> tuple[int, int]:
        return self.w.shape

    @property
    def n_rows(self) -> int:
        return self.w.shape[0]

    @property
    def n_cols(self) -> int:
        return self.w.shape[1]

    @property
    def healthy(self) -> np.ndarray:
        return ~self.faults

    def cell(self, i: int, j: int) -> FeFETCell:
        return FeFETCell(float(self.w[i, j]), self.g_min, self.g_max)

    def base_conductance(self) -> np.ndarray:
        """G_DS at V_BG = 0 for every cell (faults ignored)."""
        return self.g_min + self.w * (self.g_max - self.g_min)

    def conductance_matrix(self) -> np.ndarray:
        """Read-out conductance of every cell at its column's V_BG; faulted cells are 0."""
        g = self.device.conductance(self.base_conductance(), self.col_vbg[None, :])
        return np.where(self.faults, 0.0, g)

    def set_col_vbg(self, col_vbg) -> None:
        col_vbg = np.asarray(col_vbg, dtype=float).reshape(-1)
        if col_vbg.shape != (self.n_cols,):
            raise DimensionError(f"col_vbg must have length {self.n_cols}")
        self.device.mobility.check(col_vbg)
        self.col_vbg = col_vbg.copy()

    def copy(self) -> "CrossbarArray":
        return replace(self)


def _row_vector(array: CrossbarArray, row_inputs) -> np.ndarray:
    x = np.asarray(row_inputs, dtype=float)
    if x.shape != (array.n_rows,):
        raise DimensionError(f"expected {array.n_rows} row inputs, got shape {x.shape}")
    return x


def matvec(array: CrossbarArray, row_inputs) -> np.ndarray:
    """Column currents (A) for row voltages (V) at the device level."""
    x = _row_vector(array, row_inputs)
    return x @ array.conductance_matrix()


def effective_weight_matrix(array: CrossbarArray, gain: GainMap) -> np.ndarray:
    """Algorithm-level weights ``k(col_vbg[j]) * w_ij`` with faulted cells zeroed."""
    k = gain.k(array.col_vbg)
    gain.check(k)
    return np.where(array.faults, 0.0, array.w * k[None, :])


def effective_matvec(array: CrossbarArray, gain: GainMap, row_inputs) -> np.ndarray:
    x = _row_vector(array, row_inputs)
    return x @ effective_weight_matrix(array, gain)


def read_column_sum(array: CrossbarArray, active_rows: Iterable[int], v_read: float) -> np.ndarray:
    """Column currents with ``v_read`` on ``active_rows`` and 0 V elsewhere."""
    x = np.zeros(array.n_rows)
    for i in active_rows:
        i = int(i)
        if not 0 <= i < array.n_rows:
            raise IndexError(f"row {i} outside 0..{array.n_rows - 1}")
        x[i] = v_read
    return matvec(array, x)


def apply_fault_mask(array: CrossbarArray, mask) -> CrossbarArray:
    """Copy of ``array`` whose fault mask is replaced by ``mask``; weights untouched."""
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != array.shape:
        raise DimensionError(f"fault mask must be {array.shape}, got {mask.shape}")
    return replace(array, faults=mask)
