from ..variant_base import VariantBase, VariantWiring


class NoStaticGraphVariant(VariantBase):
    """Dynamic graph only; both branches see Â^d and the static prior is zero."""

    tag = 'no_SL'
    label = '(w/o) SL'

    def wiring(self) -> VariantWiring:
        return VariantWiring(static_graph=False, dynamic_graph=True, propagation='lpgc')


class NoDynamicGraphVariant(VariantBase):
    """Static graph only; both branches see Â^s."""

    tag = 'no_DL'
    label = '(w/o) DL'

    def wiring(self) -> VariantWiring:
        return VariantWiring(static_graph=True, dynamic_graph=False, propagation='lpgc')


class NoLPGCVariant(VariantBase):
    """Graph learning and TC only; LPGC replaced by a pass-through."""

    tag = 'no_LPGC'
    label = '(w/o) LPGC'

    def wiring(self) -> VariantWiring:
        return VariantWiring(static_graph=True, dynamic_graph=True, propagation='identity')


class PlainGCNVariant(VariantBase):
    """LPGC without restart: Z^{l+1} = A·Z^l, collection layer kept."""

    tag = 'SD_GCN'
    label = 'SD-GCN'

    def wiring(self) -> VariantWiring:
        return VariantWiring(static_graph=True, dynamic_graph=True, propagation='gcn')
