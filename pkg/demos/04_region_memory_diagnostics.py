"""Show the region memory doing its job, in isolation and inside a run.

First drives a RegionMemory by hand so the labeling rules are visible
(poor hits kill a cell, a good score keeps it alive, promising cells get
flagged), then runs the search twice on the same mission, with and
without the forced high-explore lane, and compares coverage.
"""

from camsearch import RegionMemory, SearchConfig, cell_size, run_search
from camsearch.regions import DEAD, PROMISING, UNKNOWN
from camsearch.synthetic import make_suite

LABEL_NAMES = {UNKNOWN: "unknown", PROMISING: "promising", DEAD: "dead"}


def hand_driven():
    mem = RegionMemory(h=cell_size(10.0))
    print("cell size for a scale-10 scene:", mem.h)

    bad = (0.5, 0.5, 0.5)
    good = (5.0, 5.0, 0.5)
    mem.record_candidate(bad, internal_score=0.2, semantic=0.1,
                         round_delta=-0.1, hard_failed=False)
    print("one poor hit:", LABEL_NAMES[mem.label(mem.key_for(bad))])
    mem.record_candidate(bad, internal_score=0.3, semantic=0.1,
                         round_delta=-0.1, hard_failed=True)
    print("two poor hits:", LABEL_NAMES[mem.label(mem.key_for(bad))])

    mem.record_candidate(good, internal_score=0.72, semantic=0.5,
                         round_delta=0.1, hard_failed=False)
    print("one strong hit elsewhere:", LABEL_NAMES[mem.label(mem.key_for(good))])

    zones = mem.forbidden_zones()
    print("dead cells exported as forbidden zones:",
          [(z.origin, z.center) for z in zones])


def coverage_comparison():
    mission, scene = make_suite(n_missions=1, base_seed=103)[0]
    print("\nmission:", mission.mission_id)
    for label, enabled in (("with high-explore", True), ("without", False)):
        result = run_search(mission, scene,
                            SearchConfig(rng_seed=11, high_explore_enabled=enabled))
        diag = result.log["diagnostics"]
        snapshot = result.log["rounds"][-1]["memory_snapshot"]
        dead = sum(1 for rec in snapshot.values() if rec["label"] == DEAD)
        print(f"  {label}: coverage {diag['coverage']:.3f}"
              f"  revisit {diag['revisit']:.3f}"
              f"  cells seen {len(snapshot)} ({dead} dead)"
              f"  final score {result.internal_score:.3f}")


def main():
    hand_driven()
    coverage_comparison()


if __name__ == "__main__":
    main()
