"""Run one full closed-loop search and read its audit log.

Uses a procedurally generated mission and scene, runs the six-round
search with the built-in deterministic advisors and renderer, and then
prints a round-by-round account of what the loop did: which lanes the
seeds came from, how the incumbent moved, and what the final frame was.

Artifacts (the run log and the final PNG) land in ./demo_out.
"""

import json
import os

from camsearch import SearchConfig, run_search
from camsearch.synthetic import make_suite

OUT_DIR = os.path.join(os.path.dirname(__file__), "demo_out")


def main():
    mission, scene = make_suite(n_missions=1, base_seed=100)[0]
    print("mission:", mission.mission_id, f"({mission.category})")
    print("scene objects:", [o.id for o in scene.objects])

    result = run_search(mission, scene, SearchConfig(rng_seed=7), out_dir=OUT_DIR)

    print("\nround-by-round:")
    for rnd in result.log["rounds"]:
        origins = [s["origin"] for s in rnd["seeds"]]
        before = rnd["incumbent_before"]
        after = rnd["incumbent_after"]
        moved = "kept" if before == after else "replaced"
        best = max(c["internal_score"] for c in rnd["candidates"])
        print(f"  round {rnd['round_index']}: lanes {origins}"
              f"  best candidate {best:.3f}  incumbent {moved}"
              f"  ({after['internal_score']:.3f})")

    diag = result.log["diagnostics"]
    print("\npreview budget used:",
          f"{diag['preview_renders']} / {diag['preview_budget']}")
    print("region coverage:", round(diag["coverage"], 3),
          " collapse:", round(diag["collapse"], 3))

    print("\nfinal frame:")
    print("  camera position:", [round(float(v), 2) for v in result.camera.p])
    print("  focal:", round(result.camera.f, 1), "mm  aspect:", round(result.ratio, 4))
    print("  internal score:", round(result.internal_score, 4))
    print("  image:", result.final_image_path)

    log_path = os.path.join(OUT_DIR, f"{mission.mission_id}_run.json")
    with open(log_path) as fh:
        on_disk = json.load(fh)
    print("\nlog on disk has", len(on_disk["rounds"]), "rounds at", log_path)


if __name__ == "__main__":
    main()
