"""Polarimetric Gaussian surfel splatting."""

from ._core import (
    aop,
    evaluate,
    fresnel,
    generate_dataset,
    pbrdf_stokes,
    projected_tangent,
    pseudo_tangent,
    read_pfm,
    render_view,
    stokes_from_quadruple,
    train,
    write_pfm,
)

__all__ = [
    "aop",
    "evaluate",
    "fresnel",
    "generate_dataset",
    "pbrdf_stokes",
    "projected_tangent",
    "pseudo_tangent",
    "read_pfm",
    "render_view",
    "stokes_from_quadruple",
    "train",
    "write_pfm",
]
