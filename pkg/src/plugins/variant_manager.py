import importlib
import logging
import os
from functools import lru_cache
from typing import Dict, List

from .variant_base import VariantBase

logger = logging.getLogger(__name__)

IMPLEMENTATIONS_DIR = os.path.join(os.path.dirname(__file__), 'implementations')


class VariantManager:
    """Discovers and serves the architecture variants."""

    def __init__(self, variants_dir: str = IMPLEMENTATIONS_DIR):
        self.variants: Dict[str, VariantBase] = {}
        self.variants_dir = variants_dir

    def load_variants(self) -> None:
        """Load all variants from the implementations directory."""
        if not os.path.exists(self.variants_dir):
            return

        for filename in sorted(os.listdir(self.variants_dir)):
            if filename.endswith('.py') and not filename.startswith('_'):
                module_name = filename[:-3]
                module = importlib.import_module(f'{__package__}.implementations.{module_name}')
                for item_name in dir(module):
                    item = getattr(module, item_name)
                    if (isinstance(item, type) and
                            issubclass(item, VariantBase) and
                            item is not VariantBase and
                            item.tag):
                        variant = item()
                        self.variants[variant.get_name()] = variant
        logger.debug(f"Loaded variants: {self.get_available_variants()}")

    def get(self, tag: str) -> VariantBase:
        """Return the variant registered under a tag."""
        if tag not in self.variants:
            raise ValueError(f"Unknown variant '{tag}', expected one of {self.get_available_variants()}")
        return self.variants[tag]

    def get_available_variants(self) -> List[str]:
        """Return the registered variant tags."""
        return list(self.variants.keys())


@lru_cache(maxsize=1)
def default_manager() -> VariantManager:
    manager = VariantManager()
    manager.load_variants()
    return manager
