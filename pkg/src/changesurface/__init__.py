"""Gaussian processes over change surfaces on multidimensional grids.

A change surface blends ``r`` latent regimes with input-dependent softmax
weights built from random cosine features.  Each regime has a product
spectral mixture kernel, so inference on complete grids uses Kronecker
algebra and a Weyl eigenvalue bound on the log determinant.
"""
from .errors import ChangeSurfaceError
from .grid import GridDataset, generate_synthetic, load_csv, save_csv, split
from .initialize import InitConfig, initialize
from .kernels import Rbf, SpectralMixture
from .logdet import WeylStrategy, weyl_logdet
from .model import ChangeSurfaceModel, FitConfig, fit, nlml_bound, nlml_exact, nmse, predict
from .serialize import load_model, save_model
from .warp import ChangeSurface, RksWeight, warp

__all__ = [
    "ChangeSurface", "ChangeSurfaceError", "ChangeSurfaceModel", "FitConfig", "GridDataset",
    "InitConfig", "Rbf", "RksWeight", "SpectralMixture", "WeylStrategy", "fit", "generate_synthetic",
    "initialize", "load_csv", "load_model", "nlml_bound", "nlml_exact", "nmse", "predict",
    "save_csv", "save_model", "split", "warp", "weyl_logdet",
]
