"""Python bindings for the neurodecode core library."""

from ._neurodecode import (
    NeurodecodeError,
    RidgeModel,
    decode_tensor,
    encode_tensor,
    fit_ridge,
    load_image,
    read_tensor,
    recon_forward,
    regression_metrics,
    render_toy_image,
    run_cli,
    write_tensor,
)

__all__ = [
    "NeurodecodeError",
    "RidgeModel",
    "decode_tensor",
    "encode_tensor",
    "fit_ridge",
    "load_image",
    "read_tensor",
    "recon_forward",
    "regression_metrics",
    "render_toy_image",
    "run_cli",
    "write_tensor",
]
