"""Leader reputation keeps crashed validators out of the anchor schedule.

Runs only the ordering layer (no network) for 5000 rounds with 8 of 50
validators crashed.  Every skipped anchor marks its author as low score, and
the next schedule is drawn with weights 1.0 / 0.1.
"""

from shoalsim.framework import ShoalConfig
from shoalsim.lockstep import LockstepDriver

crashed = list(range(0, 48, 6))
for label, cfg in (("round robin", ShoalConfig.for_mode("shoal-pl")),
                   ("reputation", ShoalConfig.for_mode("shoal", epoch_seed=1))):
    d = LockstepDriver(50, crashed, cfg)
    d.run(5000)
    counts = d.anchor_authors(500)
    share = sum(counts[v] for v in crashed) / sum(counts.values())
    skipped = sum(len(r.skipped) for r in d.state.commit_log)
    print(f"{label:12s} crashed share of anchors {share:.4f}, skipped anchors {skipped}")

print(f"weight-ratio expectation {0.8 / 42.8:.4f}")
