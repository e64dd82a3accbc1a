"""Data models shared by the geometry modules."""

from typing import Any

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from myller_geometry.errors import DegenerateFrame, SchemaError


class ArrayModel(BaseModel):
    """Frozen pydantic model allowing numpy array fields."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)


class Grid(ArrayModel):
    """Uniform grid of n >= 5 nodes over [start, stop]."""

    start: float
    stop: float
    n: int

    @model_validator(mode="after")
    def check_range(self) -> "Grid":
        if self.n < 5:
            raise SchemaError(f"Grid needs at least 5 nodes, got {self.n}", pointer="/grid")
        if not self.stop > self.start:
            raise SchemaError("Grid range is empty", pointer="/s")
        return self

    @classmethod
    def from_nodes(cls, nodes: np.ndarray) -> "Grid":
        """Rebuild a grid from explicit node values, checking uniformity."""
        nodes = np.asarray(nodes, dtype=float)
        grid = cls(start=float(nodes[0]), stop=float(nodes[-1]), n=len(nodes))
        spacing = np.diff(nodes)
        if np.max(np.abs(spacing - grid.h)) > 1e-12 * max(abs(grid.h), 1.0):
            raise SchemaError("Grid nodes are not uniformly spaced", pointer="/s")
        return grid

    @property
    def h(self) -> float:
        return (self.stop - self.start) / (self.n - 1)

    @property
    def s(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.n)

    @property
    def length(self) -> float:
        return self.stop - self.start

    def node_index(self, value: float) -> int | None:
        """Index of the node equal to `value`, if any."""
        position = (value - self.start) / self.h
        index = int(round(position))
        if 0 <= index < self.n and abs(position - index) <= 1e-9:
            return index
        return None


class Frame(ArrayModel):
    """Origin plus ordered basis (e1, e2, e3)."""

    origin: np.ndarray
    e1: np.ndarray
    e2: np.ndarray
    e3: np.ndarray

    @field_validator("origin", "e1", "e2", "e3", mode="before")
    @classmethod
    def as_vec3(cls, value: Any) -> np.ndarray:
        array = np.asarray(value, dtype=float)
        if array.shape != (3,):
            raise ValueError("expected three components")
        return array

    @classmethod
    def identity(cls, origin: Any = (0.0, 0.0, 0.0)) -> "Frame":
        return cls(origin=origin, e1=(1.0, 0.0, 0.0), e2=(0.0, 1.0, 0.0), e3=(0.0, 0.0, 1.0))

    @classmethod
    def from_matrix(cls, origin: np.ndarray, rows: np.ndarray) -> "Frame":
        return cls(origin=origin, e1=rows[0], e2=rows[1], e3=rows[2])

    @property
    def matrix(self) -> np.ndarray:
        """Basis as rows of a 3x3 matrix."""
        return np.vstack([self.e1, self.e2, self.e3])

    def orthonormality_defect(self) -> float:
        m = self.matrix
        return float(np.max(np.abs(m @ m.T - np.eye(3))))

    def check(self, tol: float) -> "Frame":
        """Raise DegenerateFrame unless orthonormal and right-handed within tol."""
        if self.orthonormality_defect() > tol:
            raise DegenerateFrame("Frame is not orthonormal", defect=self.orthonormality_defect())
        if abs(float(np.dot(np.cross(self.e1, self.e2), self.e3)) - 1.0) > tol:
            raise DegenerateFrame("Frame is not right-handed")
        return self


class VectorJet(ArrayModel):
    """Per-node values of a vector function of s with its s-derivatives."""

    grid: Grid
    value: np.ndarray
    d1: np.ndarray
    d2: np.ndarray | None = None
    d3: np.ndarray | None = None

    def derivative(self, order: int) -> np.ndarray:
        jets = {0: self.value, 1: self.d1, 2: self.d2, 3: self.d3}
        result = jets[order]
        if result is None:
            raise ValueError(f"jet carries no derivative of order {order}")
        return result


class FramedCurve(ArrayModel):
    """Positions and right-handed orthonormal frames on a grid.

    `frames[i]` holds (e1, e2, e3) of node i as rows.
    """

    grid: Grid
    positions: np.ndarray
    frames: np.ndarray

    def frame(self, index: int) -> Frame:
        return Frame.from_matrix(self.positions[index], self.frames[index])

    def max_orthonormality_defect(self) -> float:
        gram = np.einsum("nij,nkj->nik", self.frames, self.frames)
        return float(np.max(np.abs(gram - np.eye(3))))

    def endpoint_gap(self) -> float:
        return float(np.linalg.norm(self.positions[-1] - self.positions[0]))

    def to_frame(self) -> pd.DataFrame:
        data: dict[str, np.ndarray] = {"s": self.grid.s}
        for k, axis in enumerate("xyz"):
            data[axis] = self.positions[:, k]
        for row in range(3):
            for k, axis in enumerate("xyz"):
                data[f"e{row + 1}{axis}"] = self.frames[:, row, k]
        return pd.DataFrame(data)


class InvariantProfile(ArrayModel):
    """Per-node values of a named invariant set."""

    grid: Grid
    values: dict[str, np.ndarray]

    def __getitem__(self, name: str) -> np.ndarray:
        return self.values[name]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"s": self.grid.s, **self.values})


class FrenetData(ArrayModel):
    """Frenet apparatus of a versor field: frames rows (xi1, xi2, xi3)."""

    grid: Grid
    positions: np.ndarray
    frames: np.ndarray
    K1: np.ndarray
    K2: np.ndarray
    a: np.ndarray

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "s": self.grid.s,
                "K1": self.K1,
                "K2": self.K2,
                "a1": self.a[:, 0],
                "a2": self.a[:, 1],
                "a3": self.a[:, 2],
            },
        )


class PlaneFieldData(ArrayModel):
    """Invariants of a plane field; frames rows (nu1, nu2, nu3).

    When the planes are parallel only `chi1` is meaningful and `framed` is false.
    """

    grid: Grid
    positions: np.ndarray
    chi1: np.ndarray
    framed: bool
    frames: np.ndarray | None = None
    chi2: np.ndarray | None = None
    b: np.ndarray | None = None

    def to_frame(self) -> pd.DataFrame:
        data: dict[str, np.ndarray] = {"s": self.grid.s, "chi1": self.chi1}
        if self.framed and self.chi2 is not None and self.b is not None:
            data["chi2"] = self.chi2
            data.update({f"b{k + 1}": self.b[:, k] for k in range(3)})
        return pd.DataFrame(data)


class DarbouxData(ArrayModel):
    """Darboux frame (xi, mu, nu) and invariants of a Myller configuration."""

    grid: Grid
    positions: np.ndarray
    frames: np.ndarray
    c: np.ndarray
    G: np.ndarray
    K: np.ndarray
    T: np.ndarray
    tangent: bool = False

    @property
    def xi(self) -> np.ndarray:
        return self.frames[:, 0]

    @property
    def mu(self) -> np.ndarray:
        return self.frames[:, 1]

    @property
    def nu(self) -> np.ndarray:
        return self.frames[:, 2]

    def profile(self) -> InvariantProfile:
        return InvariantProfile(
            grid=self.grid,
            values={
                "c1": self.c[:, 0],
                "c2": self.c[:, 1],
                "c3": self.c[:, 2],
                "G": self.G,
                "K": self.K,
                "T": self.T,
            },
        )

    def to_frame(self) -> pd.DataFrame:
        return self.profile().to_frame()


class CurveInvariants(ArrayModel):
    """Geodesic curvature, normal curvature and geodesic torsion per node."""

    grid: Grid
    kappa_g: np.ndarray
    kappa_n: np.ndarray
    tau_g: np.ndarray

    def classification(self, tol: float) -> dict[str, bool]:
        return {
            "geodesic": bool(np.max(np.abs(self.kappa_g)) <= tol),
            "asymptotic": bool(np.max(np.abs(self.kappa_n)) <= tol),
            "curvature_line": bool(np.max(np.abs(self.tau_g)) <= tol),
        }

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "s": self.grid.s,
                "kappa_g": self.kappa_g,
                "kappa_n": self.kappa_n,
                "tau_g": self.tau_g,
            },
        )


class FormData(ArrayModel):
    """Fundamental form coefficients, mean and total curvature at a point."""

    E: float
    F: float
    G1: float
    Delta: float
    L: float
    M: float
    N: float
    H: float
    Kt: float


class PrincipalData(ArrayModel):
    """Curvature-line data at a point: principal curvatures and torsions."""

    invR1: float
    invR2: float
    Hcheck: float
    Ktcheck: float
    T1inv: float
    T2inv: float
    Tm: float
    Tt: float

    @classmethod
    def from_curvatures(cls, invR1: float, invR2: float, H: float, Kt: float) -> "PrincipalData":
        t1 = 0.5 * (invR2 - invR1)
        return cls(
            invR1=invR1,
            invR2=invR2,
            Hcheck=0.5 * (invR1 + invR2) - H,
            Ktcheck=invR1 * invR2 - Kt,
            T1inv=t1,
            T2inv=-t1,
            Tm=0.0,
            Tt=-0.25 * (invR1 - invR2) ** 2,
        )


class RotationCoefficients(ArrayModel):
    """Rotation coefficients of an adapted frame at a point."""

    p1: float
    p2: float
    q1: float
    q2: float
    r1: float
    r2: float


class NhInvariants(ArrayModel):
    """Scalar invariants of a 2-distribution at a point."""

    Tm: float
    H: float
    Kt: float
    Kg: float
    Tt: float

    @classmethod
    def from_coefficients(cls, rc: RotationCoefficients) -> "NhInvariants":
        tm = rc.p1 + rc.q2
        h = rc.p2 - rc.q1
        kt = rc.p1 * rc.q2 - rc.p2 * rc.q1
        return cls(Tm=tm, H=h, Kt=kt, Kg=kt - tm * tm / 4.0, Tt=kt - h * h / 4.0)
