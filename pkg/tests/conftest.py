"""Shared fixtures and instance builders for the test suite."""

import numpy as np
import pytest

import relaymatch as rm


def make_instance(seed, **params):
    """Generate (topology, profiles, caps) for a seeded scenario."""
    defaults = dict(num_sources=4, num_relays=3, radios_per_relay=1,
                    source_radios=(1, 2), path_loss=rm.AIR_TO_AIR)
    defaults.update(params)
    topology = rm.generate_topology(rm.TopologyParams(**defaults), seed)
    caps = rm.build_capacity_table(topology)
    profiles = rm.default_profiles(topology)
    return topology, profiles, caps


def spawn_seeds(master, count, width=2):
    """Deterministic (topology_seed, solver SeedSequences...) tuples."""
    out = []
    for child in np.random.SeedSequence(master).spawn(count):
        parts = child.spawn(width)
        out.append((int(parts[0].generate_state(1, np.uint64)[0]), *parts[1:]))
    return out


@pytest.fixture
def small_instance():
    return make_instance(7)


@pytest.fixture
def mid_instance():
    return make_instance(21, num_sources=6, num_relays=3, radios_per_relay=2,
                         source_radios=None)
