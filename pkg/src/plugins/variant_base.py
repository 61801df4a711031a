from abc import ABC, abstractmethod
from typing import Literal

from pydantic import BaseModel


class VariantWiring(BaseModel):
    """How an architecture variant routes graphs into the LPGC branches."""

    static_graph: bool
    dynamic_graph: bool
    propagation: Literal["lpgc", "gcn", "identity"]


class VariantBase(ABC):
    """Base class for all architecture variants in the system."""

    tag: str = ""
    label: str = ""

    def __init__(self):
        self.name = self.__class__.__name__

    @abstractmethod
    def wiring(self) -> VariantWiring:
        """Return the graph and propagation wiring of this variant."""
        pass

    def get_name(self) -> str:
        """Return the registry tag of the variant."""
        return self.tag
