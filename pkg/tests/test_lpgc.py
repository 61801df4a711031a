import math
import random

import pytest
import torch

from src.core.lpgc import (
    DualBranchLPGC,
    IdentityPropagation,
    PersonalizedPropagation,
    SelfEvolution,
    aggregate_neighbours,
    check_row_stochastic,
)

ORACLE_CASES = 50


def _random_adjacency(num_nodes, batch=None, generator=None):
    shape = (num_nodes, num_nodes) if batch is None else (batch, num_nodes, num_nodes)
    return torch.softmax(torch.randn(*shape, dtype=torch.float64, generator=generator) * 2, dim=-1)


def _propagation(in_channels=3, channels=4, out_channels=2, embedding_dim=5, depth=3, mode="lpgc", seed=0):
    torch.manual_seed(seed)
    return PersonalizedPropagation(in_channels, channels, out_channels, embedding_dim, depth, mode).double()


def _pointwise(conv, x):
    """Naive 1×1 convolution over nested lists x[c][n][t]."""
    weight = conv.weight[:, :, 0, 0].tolist()
    bias = conv.bias.tolist()
    channels, nodes, steps = len(x), len(x[0]), len(x[0][0])
    return [
        [[bias[o] + sum(weight[o][i] * x[i][n][t] for i in range(channels)) for t in range(steps)] for n in range(nodes)]
        for o in range(len(bias))
    ]


def _add(a, b):
    return [[[u + v for u, v in zip(ra, rb)] for ra, rb in zip(ca, cb)] for ca, cb in zip(a, b)]


def _self_evolution_oracle(module, x, embeddings):
    hidden = _pointwise(module.fc1, x)
    nodes, steps = len(x[0]), len(x[0][0])
    identity = [[[embeddings[n][e]] * steps for n in range(nodes)] for e in range(len(embeddings[0]))]
    joined = hidden + identity
    inner = [[[max(v, 0.0) for v in row] for row in channel] for channel in _pointwise(module.fc4, joined)]
    return _pointwise(module.fc2, _add(_pointwise(module.fc3, inner), joined))


def _propagation_oracle(module, x, adj, embeddings):
    """Per-node double loop over Z^{l+1} = (1 − α)·A·Z^l + α·Ḧ, then collection."""
    state = _pointwise(module.input_map, x)
    channels, nodes, steps = len(state), len(state[0]), len(state[0][0])
    states = [state]
    evolution = _self_evolution_oracle(module.self_evolution, x, embeddings) if module.mode == "lpgc" else None
    if evolution is not None:
        w5 = module.restart_head.weight[0, :, 0, 0].tolist()
        b5 = float(module.restart_head.bias[0])
    for _ in range(module.depth - 1):
        new = [[[0.0] * steps for _ in range(nodes)] for _ in range(channels)]
        for n in range(nodes):
            for t in range(steps):
                if evolution is not None:
                    logit = b5 + sum(w5[c] * (evolution[c][n][t] + state[c][n][t]) for c in range(channels))
                    alpha = 1.0 / (1.0 + math.exp(-logit))
                for c in range(channels):
                    neighbours = sum(adj[n][w] * state[c][w][t] for w in range(nodes))
                    if evolution is None:
                        new[c][n][t] = neighbours
                    else:
                        new[c][n][t] = (1 - alpha) * neighbours + alpha * evolution[c][n][t]
        state = new
        states.append(state)
    collected = [channel for s in states for channel in s]
    return _pointwise(module.collect_map, collected)


def test_zero_network_gives_zero_evolution():
    module = SelfEvolution(3, 4, 5, 4)
    with torch.no_grad():
        for p in module.parameters():
            p.zero_()
    out = module(torch.randn(2, 3, 6, 4), torch.randn(6, 5))
    assert torch.count_nonzero(out) == 0


def test_embeddings_separate_identical_inputs():
    torch.manual_seed(0)
    module = SelfEvolution(3, 4, 5, 4)
    x = torch.randn(1, 3, 1, 4).expand(1, 3, 2, 4)
    embeddings = torch.randn(2, 5)
    out = module(x, embeddings)
    assert not torch.allclose(out[:, :, 0], out[:, :, 1])


def test_self_evolution_matches_step_oracle():
    torch.manual_seed(1)
    module = SelfEvolution(2, 2, 3, 2).double()
    x = torch.randn(1, 2, 2, 1, dtype=torch.float64)
    embeddings = torch.randn(2, 3, dtype=torch.float64)
    expected = torch.tensor([_self_evolution_oracle(module, x[0].tolist(), embeddings.tolist())], dtype=torch.float64)
    torch.testing.assert_close(module(x, embeddings), expected, atol=1e-6, rtol=0)


def test_zero_restart_head_gives_half():
    module = _propagation()
    with torch.no_grad():
        module.restart_head.weight.zero_()
        module.restart_head.bias.zero_()
    result = module.propagate(torch.randn(2, 3, 4, 3, dtype=torch.float64), _random_adjacency(4), torch.randn(4, 5, dtype=torch.float64))
    for alpha in result.restart:
        torch.testing.assert_close(alpha, torch.full_like(alpha, 0.5))


def test_restart_saturates_with_large_bias():
    module = _propagation()
    with torch.no_grad():
        module.restart_head.bias.fill_(20.0)
        module.restart_head.weight.zero_()
    result = module.propagate(torch.randn(1, 3, 4, 3, dtype=torch.float64), _random_adjacency(4), torch.randn(4, 5, dtype=torch.float64))
    assert all((alpha > 1 - 1e-8).all() for alpha in result.restart)


def test_restart_probability_stays_open():
    for seed in range(10):
        module = _propagation(seed=seed)
        x = torch.randn(3, 3, 5, 4, dtype=torch.float64)
        result = module.propagate(x, _random_adjacency(5, batch=3), torch.randn(5, 5, dtype=torch.float64))
        assert len(result.restart) == module.depth - 1
        for alpha in result.restart:
            assert ((alpha > 0) & (alpha < 1)).all()


def test_full_restart_returns_self_evolution():
    module = _propagation(depth=4)
    with torch.no_grad():
        module.restart_head.weight.zero_()
        module.restart_head.bias.fill_(50.0)
    x = torch.randn(2, 3, 4, 3, dtype=torch.float64)
    embeddings = torch.randn(4, 5, dtype=torch.float64)
    result = module.propagate(x, _random_adjacency(4), embeddings)
    evolution = module.self_evolution(x, embeddings)
    for state in result.states[1:]:
        torch.testing.assert_close(state, evolution)


def test_no_restart_on_identity_graph_is_a_fixed_point():
    module = _propagation(depth=4)
    with torch.no_grad():
        module.restart_head.weight.zero_()
        module.restart_head.bias.fill_(-50.0)
    result = module.propagate(
        torch.randn(2, 3, 4, 3, dtype=torch.float64), torch.eye(4, dtype=torch.float64), torch.randn(4, 5, dtype=torch.float64)
    )
    for state in result.states[1:]:
        torch.testing.assert_close(state, result.states[0], atol=1e-12, rtol=0)


def test_uniform_graph_averages_two_nodes():
    adj = torch.tensor([[0.5, 0.5], [0.5, 0.5]], dtype=torch.float64)
    z = torch.tensor([1.0, 0.0], dtype=torch.float64).view(1, 1, 2, 1)
    torch.testing.assert_close(aggregate_neighbours(adj, z).flatten(), torch.tensor([0.5, 0.5], dtype=torch.float64))

    module = _propagation(in_channels=1, channels=1, out_channels=1, depth=2, mode="gcn")
    with torch.no_grad():
        module.input_map.weight.fill_(1.0)
        module.input_map.bias.zero_()
    result = module.propagate(z, adj, torch.zeros(2, 5, dtype=torch.float64))
    torch.testing.assert_close(result.states[1].flatten(), torch.tensor([0.5, 0.5], dtype=torch.float64))


def test_batched_and_shared_graphs_agree():
    adj = _random_adjacency(5)
    z = torch.randn(3, 2, 5, 4, dtype=torch.float64)
    torch.testing.assert_close(aggregate_neighbours(adj, z), aggregate_neighbours(adj.expand(3, 5, 5), z))


def test_non_stochastic_graph_is_rejected():
    module = _propagation()
    adj = _random_adjacency(4) * 1.01
    with pytest.raises(AssertionError, match="row-stochastic"):
        module.propagate(torch.randn(1, 3, 4, 2, dtype=torch.float64), adj, torch.randn(4, 5, dtype=torch.float64))


def test_small_row_sum_drift_is_tolerated():
    adj = _random_adjacency(4)
    adj[:, 0] += 5e-5
    check_row_stochastic(adj)


@pytest.mark.parametrize("mode", ["lpgc", "gcn"])
def test_vectorized_propagation_matches_double_loop(mode):
    rng = random.Random(0)
    generator = torch.Generator().manual_seed(0)
    for case in range(ORACLE_CASES):
        nodes, depth = rng.randint(1, 6), rng.randint(1, 4)
        in_channels, channels, out_channels = rng.randint(1, 4), rng.randint(1, 4), rng.randint(1, 4)
        module = _propagation(in_channels, channels, out_channels, embedding_dim=3, depth=depth, mode=mode, seed=case)
        x = torch.randn(1, in_channels, nodes, 2, dtype=torch.float64, generator=generator)
        adj = _random_adjacency(nodes, generator=generator)
        embeddings = torch.randn(nodes, 3, dtype=torch.float64, generator=generator)
        expected = _propagation_oracle(module, x[0].tolist(), adj.tolist(), embeddings.tolist())
        torch.testing.assert_close(
            module(x, adj, embeddings), torch.tensor([expected], dtype=torch.float64), atol=1e-5, rtol=0
        )


def test_plain_propagation_stays_within_input_range():
    module = _propagation(depth=4, mode="gcn")
    x = torch.randn(2, 3, 6, 3, dtype=torch.float64)
    result = module.propagate(x, _random_adjacency(6, batch=2), torch.randn(6, 5, dtype=torch.float64))
    first = result.states[0]
    low = first.amin(dim=2, keepdim=True)
    high = first.amax(dim=2, keepdim=True)
    for state in result.states[1:]:
        assert (state >= low - 1e-12).all() and (state <= high + 1e-12).all()


def test_restart_blend_stays_within_state_and_evolution_range():
    module = _propagation(depth=4)
    x = torch.randn(2, 3, 6, 3, dtype=torch.float64) * 2
    embeddings = torch.randn(6, 5, dtype=torch.float64)
    result = module.propagate(x, _random_adjacency(6, batch=2), embeddings)
    evolution = module.self_evolution(x, embeddings)
    low = torch.minimum(result.states[0].amin(dim=2, keepdim=True), evolution.amin(dim=2, keepdim=True))
    high = torch.maximum(result.states[0].amax(dim=2, keepdim=True), evolution.amax(dim=2, keepdim=True))
    assert len(result.restart) == 3
    for alpha in result.restart:
        assert ((alpha > 0) & (alpha < 1)).all()
    for state in result.states[1:]:
        assert (state >= low - 1e-12).all() and (state <= high + 1e-12).all()


def test_gcn_mode_has_no_restart_parameters():
    module = _propagation(mode="gcn")
    assert module.self_evolution is None and module.restart_head is None
    result = module.propagate(torch.randn(1, 3, 4, 2, dtype=torch.float64), _random_adjacency(4), torch.randn(4, 5, dtype=torch.float64))
    assert result.restart == []


def test_propagation_is_node_permutation_equivariant():
    module = _propagation()
    x = torch.randn(2, 3, 5, 3, dtype=torch.float64)
    adj = _random_adjacency(5, batch=2)
    embeddings = torch.randn(5, 5, dtype=torch.float64)
    perm = torch.tensor([3, 0, 4, 1, 2])
    out = module(x, adj, embeddings)
    permuted = module(x[:, :, perm], adj[:, perm][:, :, perm], embeddings[perm])
    torch.testing.assert_close(permuted, out[:, :, perm])


def test_propagation_gradients_match_finite_differences():
    module = _propagation(in_channels=2, channels=2, out_channels=2, embedding_dim=3, depth=3)
    adj = _random_adjacency(3)
    embeddings = torch.randn(3, 3, dtype=torch.float64)
    x = torch.randn(1, 2, 3, 2, dtype=torch.float64, requires_grad=True)
    assert torch.autograd.gradcheck(lambda inp: module(inp, adj, embeddings), (x,), eps=1e-5, atol=1e-6, rtol=1e-4)


def test_zero_dynamic_collection_leaves_static_branch():
    torch.manual_seed(0)
    layer = DualBranchLPGC(3, 4, 2, 5, 3).double()
    with torch.no_grad():
        layer.dynamic_branch.collect_map.weight.zero_()
        layer.dynamic_branch.collect_map.bias.zero_()
    x = torch.randn(2, 3, 4, 3, dtype=torch.float64)
    static_adj, dynamic_adj = _random_adjacency(4), _random_adjacency(4, batch=2)
    embeddings = torch.randn(4, 5, dtype=torch.float64)
    torch.testing.assert_close(layer(x, static_adj, dynamic_adj, embeddings), layer.static_branch(x, static_adj, embeddings))


def test_identical_branches_double_the_output():
    torch.manual_seed(0)
    layer = DualBranchLPGC(3, 4, 2, 5, 3).double()
    layer.dynamic_branch.load_state_dict(layer.static_branch.state_dict())
    x = torch.randn(2, 3, 4, 3, dtype=torch.float64)
    adj = _random_adjacency(4)
    embeddings = torch.randn(4, 5, dtype=torch.float64)
    torch.testing.assert_close(layer(x, adj, adj, embeddings), 2 * layer.static_branch(x, adj, embeddings))


def test_dual_branch_is_sum_of_branches():
    torch.manual_seed(2)
    layer = DualBranchLPGC(3, 4, 2, 5, 2).double()
    x = torch.randn(2, 3, 4, 3, dtype=torch.float64)
    static_adj, dynamic_adj = _random_adjacency(4), _random_adjacency(4, batch=2)
    embeddings = torch.randn(4, 5, dtype=torch.float64)
    expected = layer.static_branch(x, static_adj, embeddings) + layer.dynamic_branch(x, dynamic_adj, embeddings)
    torch.testing.assert_close(layer(x, static_adj, dynamic_adj, embeddings), expected, atol=1e-6, rtol=0)


def test_identity_propagation_passes_through():
    x = torch.randn(2, 4, 3, 5)
    assert IdentityPropagation()(x) is x
    assert IdentityPropagation().branches(x, None, None, None) == {}
