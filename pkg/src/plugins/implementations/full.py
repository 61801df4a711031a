from ..variant_base import VariantBase, VariantWiring


class FullVariant(VariantBase):
    """Static and dynamic graphs, each feeding its own LPGC branch."""

    tag = 'full'
    label = 'SD-LPGC'

    def wiring(self) -> VariantWiring:
        return VariantWiring(static_graph=True, dynamic_graph=True, propagation='lpgc')
