from qcnn_gait.viz.kernels import (
    KernelTrace,
    TrajectoryFragment,
    apply_kernel_trace,
    maximize_kernel_activation,
    visualize_kernels,
)
from qcnn_gait.viz.svg import render_svg

__all__ = [
    "KernelTrace",
    "TrajectoryFragment",
    "apply_kernel_trace",
    "maximize_kernel_activation",
    "render_svg",
    "visualize_kernels",
]
