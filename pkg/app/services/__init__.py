from .base_service import BaseService
from .cayley_service import CayleyService
from .elementwise_service import ElementwiseService
from .hypercosine_service import HypercosineService
from .isotropic_service import IsotropicService
from .spectral_service import SpectralService
from .verify_service import VerifyService

__all__ = [
    "BaseService",
    "HypercosineService",
    "CayleyService",
    "IsotropicService",
    "SpectralService",
    "ElementwiseService",
    "VerifyService",
]
