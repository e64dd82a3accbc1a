"""Data models."""

from myller_geometry.models.geometry import (
    CurveInvariants,
    DarbouxData,
    FormData,
    Frame,
    FramedCurve,
    FrenetData,
    Grid,
    InvariantProfile,
    NhInvariants,
    PlaneFieldData,
    PrincipalData,
    RotationCoefficients,
    VectorJet,
)

__all__ = [
    "CurveInvariants",
    "DarbouxData",
    "FormData",
    "Frame",
    "FramedCurve",
    "FrenetData",
    "Grid",
    "InvariantProfile",
    "NhInvariants",
    "PlaneFieldData",
    "PrincipalData",
    "RotationCoefficients",
    "VectorJet",
]
