"""Link-level simulation of unipolar OFDM over multi-LED visible light channels."""

__version__ = "0.1.0"

from .channel import GeometryConfig, build_channel, channel_gain, reference_geometry  # noqa: E402
from .kernels import BACKEND  # noqa: E402
from .schemes import Kind, SchemeConfig, make_scheme, rate  # noqa: E402
from .sim import BerPoint, SimConfig, run_point, run_sweep, sweep_dtx  # noqa: E402

__all__ = [
    "__version__",
    "BACKEND",
    "GeometryConfig",
    "build_channel",
    "channel_gain",
    "reference_geometry",
    "Kind",
    "SchemeConfig",
    "make_scheme",
    "rate",
    "BerPoint",
    "SimConfig",
    "run_point",
    "run_sweep",
    "sweep_dtx",
]
