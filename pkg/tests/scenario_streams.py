"""Randomized single-patient connectivity streams used by convergence tests."""
from __future__ import annotations

import itertools
import random

from radledger.dosimetry import DosimetryTables
from radledger.errors import NoStoreReachableError
from radledger.scenarios import World, scenario_step
from radledger.sync import merge

_TABLES = DosimetryTables.load()


def random_event(rng: random.Random, step: int) -> dict:
    investigation = (
        {"type": "catalog", "exam": rng.choice(["head", "neck", "chest", "abdomen"])}
        if rng.random() < 0.7
        else None
    )
    return {
        "type": "visit",
        "at": f"2025-01-01T{step % 24:02d}:{step % 60:02d}:00Z",
        "patient": "p1",
        "card_present": rng.random() < 0.5,
        "local_reachable": rng.random() < 0.6,
        "central_reachable": rng.random() < 0.5,
        "investigation": investigation,
    }


def run_random_stream(seed: int, events: int = 8) -> bool:
    """One randomized scenario stream; True when every replica equals the
    brute-force union of all envelopes ever created (the oracle)."""
    rng = random.Random(seed)
    world = World.create(seed=seed, tables=_TABLES)
    world.issue_card("p1")
    for step in range(events):
        try:
            scenario_step(world, random_event(rng, step))
        except NoStoreReachableError:
            continue
    oracle = set(world.all_envelopes())
    stores = [world.local, world.central, world.cards["p1"].store]
    for a, b in itertools.combinations(stores, 2):
        merge(a, b)
    merge(stores[0], stores[2])  # close the triangle after the last pairwise pass
    return all(store.record_ids() == oracle for store in stores)
