"""
VesselParams - hydrodynamic, inertial, geometric and propulsion constants.
"""

import json
from pathlib import Path
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, Field, model_validator

DEFAULT_PARAMS_PATH = Path(__file__).parent / "data" / "vessel_params.json"


class WindCoefficients(BaseModel):
    """
    Wind coefficient curves C_X, C_Y, C_N as functions of the relative wind angle.

    ``parametric`` uses C_X = -cx*cos(g), C_Y = cy*sin(g), C_N = cn*sin(2g).
    ``table`` interpolates tabulated values with a periodic cubic spline.
    """
    mode: Literal["parametric", "table"] = "parametric"
    cx: float = Field(default=0.7, ge=0.0)
    cy: float = Field(default=0.825, ge=0.0)
    cn: float = Field(default=0.125, ge=0.0)
    table_angles: Optional[list[float]] = None
    table_cx: Optional[list[float]] = None
    table_cy: Optional[list[float]] = None
    table_cn: Optional[list[float]] = None

    @model_validator(mode="after")
    def _check_table(self) -> "WindCoefficients":
        if self.mode == "table":
            columns = (self.table_angles, self.table_cx, self.table_cy, self.table_cn)
            if any(c is None for c in columns):
                raise ValueError("table mode needs table_angles, table_cx, table_cy, table_cn")
            n = len(self.table_angles)
            if n < 4 or any(len(c) != n for c in columns):
                raise ValueError("wind coefficient table columns must have equal length >= 4")
            if np.any(np.diff(self.table_angles) <= 0):
                raise ValueError("table_angles must be strictly increasing")
        return self

    @classmethod
    def from_table_file(cls, path: str | Path) -> "WindCoefficients":
        """
        Load a tabulated curve from JSON with keys angles, cx, cy, cn.

        Angles span one period [-pi, pi]; the last row must repeat the first.
        """
        data = json.loads(Path(path).read_text())
        return cls(
            mode="table",
            table_angles=data["angles"],
            table_cx=data["cx"],
            table_cy=data["cy"],
            table_cn=data["cn"],
        )


class VesselParams(BaseModel):
    """
    Complete parameter set of the 3DOF maneuvering model.

    Defaults reproduce the identified coefficient table of the test boat;
    geometry constants the table does not give are declared defaults.
    """
    model_config = {"frozen": True}

    # inertia
    m11: float = Field(default=5251.26, gt=0.0)
    m22: float = Field(default=4077.23, gt=0.0)
    m23: float = 13.29
    m32: float = 1251.01
    m33: float = Field(default=16373.0, gt=0.0)

    # damping
    Xu: float = -40.0
    Xuu: float = -288.8
    Yv: float = -2159.93
    Yvv: float = -1958.61
    Yr: float = -1121.8
    Nr: float = -14208.2
    Nrr: float = -53206.72
    Nv: float = -2300.0
    Nvv: float = 3190.9

    # propulsion
    rho_water: float = Field(default=998.12, gt=0.0)
    KT: float = Field(default=0.44, gt=0.0)
    prop_diameter: float = Field(default=0.35, gt=0.0)
    Lx: float = Field(default=3.0, ge=0.0)
    Ly: float = Field(default=1.0, ge=0.0)
    neutral_rpm_threshold: float = Field(default=630.0, ge=0.0)

    # wind
    rho_air: float = Field(default=1.225, gt=0.0)
    AFw: float = Field(default=4.0, ge=0.0)
    ALw: float = Field(default=12.0, ge=0.0)
    Loa: float = Field(default=8.36, gt=0.0)
    wind_coeff_params: WindCoefficients = Field(default_factory=WindCoefficients)

    @model_validator(mode="after")
    def _check_inertia(self) -> "VesselParams":
        det = self.m22 * self.m33 - self.m23 * self.m32
        if det <= 0.0:
            raise ValueError(f"inertia matrix is singular or indefinite (m22*m33 - m23*m32 = {det})")
        return self

    @property
    def mass_matrix(self) -> np.ndarray:
        return np.array([
            [self.m11, 0.0, 0.0],
            [0.0, self.m22, self.m23],
            [0.0, self.m32, self.m33],
        ])

    @property
    def mass_matrix_inv(self) -> np.ndarray:
        return np.linalg.inv(self.mass_matrix)

    @property
    def thrust_coefficient(self) -> float:
        """rho * K_T * D^4, per-engine thrust per (rev/s)^2."""
        return self.rho_water * self.KT * self.prop_diameter ** 4

    def damping_vector(self) -> np.ndarray:
        """Damping coefficients in regression order (Xu, Xuu, Yv, Yvv, Yr, Nv, Nvv, Nr, Nrr)."""
        return np.array([
            self.Xu, self.Xuu, self.Yv, self.Yvv, self.Yr,
            self.Nv, self.Nvv, self.Nr, self.Nrr,
        ])

    def with_updates(self, **updates: float) -> "VesselParams":
        """Return a validated copy with the given fields replaced."""
        return VesselParams(**{**self.model_dump(), **updates})

    @classmethod
    def from_file(cls, path: str | Path = DEFAULT_PARAMS_PATH) -> "VesselParams":
        """Load parameters from a JSON key-value file."""
        return cls.model_validate_json(Path(path).read_text())

    def to_file(self, path: str | Path) -> None:
        """Write parameters as an indented JSON key-value file."""
        Path(path).write_text(self.model_dump_json(indent=2) + "\n")


DAMPING_FIELDS = ("Xu", "Xuu", "Yv", "Yvv", "Yr", "Nv", "Nvv", "Nr", "Nrr")
