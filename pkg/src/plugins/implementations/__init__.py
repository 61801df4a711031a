"""
Variant implementations.
"""

from .full import FullVariant
from .ablations import NoStaticGraphVariant, NoDynamicGraphVariant, NoLPGCVariant, PlainGCNVariant

__all__ = [
    'FullVariant',
    'NoStaticGraphVariant',
    'NoDynamicGraphVariant',
    'NoLPGCVariant',
    'PlainGCNVariant'
]
