"""
Architecture variants (full model and ablations).
"""

from .variant_base import VariantBase, VariantWiring
from .variant_manager import VariantManager, default_manager

__all__ = [
    'VariantBase',
    'VariantWiring',
    'VariantManager',
    'default_manager'
]
