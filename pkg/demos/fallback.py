"""Baseline pacing with the timeout fallback.

Three slow validators (4x delay) get their anchors skipped.  After three
consecutive skips the pacer re-enables the vanilla waits, the slow anchors get
ordered again, and the fallback switches off.
"""

from shoalsim.cli import preset
from shoalsim.netsim import run

cfg = preset("fallback-adversarial")
tr = run(cfg)
v = tr.validators[1]
print("activations (time ms, round):", [(round(t), r) for t, r in v.fallback_activations])
rounds = [r.round for r in v.rounds if r.fallback]
print("rounds left under vanilla rules:", rounds)
print(f"anchors ordered {v.anchors_ordered}, skipped {v.anchors_skipped}")
