"""Residual-informed forecasting loss toolkit."""
from .hsic import HsicConfig, hsic_gradient, hsic_oracle, hsic_plugin, hsic_ustat
from .kernels import KernelSpec, center, gram, hoeffding_components, kernel_eval
from .loss import RiLossConfig, mae, mse, pearson, pearson_mse_loss, ri_loss, sample_noise

__version__ = "0.1.0"

__all__ = [
    "HsicConfig", "KernelSpec", "RiLossConfig",
    "center", "gram", "hoeffding_components", "kernel_eval",
    "hsic_gradient", "hsic_oracle", "hsic_plugin", "hsic_ustat",
    "mae", "mse", "pearson", "pearson_mse_loss", "ri_loss", "sample_noise",
]
