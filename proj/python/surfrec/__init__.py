"""Surface reconstruction from oriented point clouds."""

from ._surfrec import (  # noqa: F401
    PipelineConfig,
    chamfer_l1,
    config_hash,
    evaluate,
    gen_analytic,
    load_config,
    load_mesh,
    load_point_cloud,
    prepare,
    reconstruct,
    save_mesh,
    save_point_cloud,
    train,
)
