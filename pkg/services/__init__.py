"""
mdlnr Services
Likelihoods, priors, optimizers, baselines, samplers and file formats
"""

from .inference_service import MDLReconstructor, reconstruct_mdl
from .likelihood_service import ModelState

__all__ = ["MDLReconstructor", "ModelState", "reconstruct_mdl"]
