from .probes import (
    DirectionalAO,
    OcclusionProbeGrid,
    SplatOccluders,
    bake_part_grids,
    bake_visibility_cubemap,
    combined_ao,
    combined_ao_batch,
    convolve_cosine,
    project_ao_to_sh,
    query_probe,
    query_probe_batch,
    read_probe_grid,
    write_probe_grid,
)
from .sh import cosine_lobe_zonal_factors, eval_sh_basis, num_coeffs

__all__ = [
    "DirectionalAO",
    "OcclusionProbeGrid",
    "SplatOccluders",
    "bake_part_grids",
    "bake_visibility_cubemap",
    "combined_ao",
    "combined_ao_batch",
    "convolve_cosine",
    "cosine_lobe_zonal_factors",
    "eval_sh_basis",
    "num_coeffs",
    "project_ao_to_sh",
    "query_probe",
    "query_probe_batch",
    "read_probe_grid",
    "write_probe_grid",
]
