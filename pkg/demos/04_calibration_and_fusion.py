"""Score calibration and multi-system fusion with logistic regression.

Two imperfect systems observed on the same trials: fusion learns an affine
combination on a development set, and the fused scores behave like llrs, so
thresholding at the Bayes point is nearly optimal on fresh data.
"""

import numpy as np

from avsrkit import DcfParams, act_dcf, apply_fusion, eer, fit_fusion, min_dcf
from avsrkit.store import ScoreEntry, ScoreSet

rng = np.random.default_rng(11)


def observe(n_tar, n_non, quality, scale):
    """A noisy verification system: higher `quality` separates better."""
    tar = scale * rng.normal(quality, 1.0, n_tar)
    non = scale * rng.normal(0.0, 1.0, n_non)
    entries = [ScoreEntry(f"t{i}", f"t{i}", float(s), "target")
               for i, s in enumerate(tar)]
    entries += [ScoreEntry(f"n{i}", f"n{i}x", float(s), "nontarget")
                for i, s in enumerate(non)]
    return ScoreSet(entries)


params = DcfParams(p_target=0.05)

# same trials seen by two systems with different strengths and scales
dev_a, dev_b = observe(500, 2000, 1.8, 4.0), observe(500, 2000, 1.2, 0.3)
eval_a, eval_b = observe(500, 2000, 1.8, 4.0), observe(500, 2000, 1.2, 0.3)

print("=== single systems on eval ===")
for name, ss in [("A", eval_a), ("B", eval_b)]:
    gap = act_dcf(ss, params) - min_dcf(ss, params)[0]
    print(f"system {name}: EER {eer(ss):.4f}  minDCF {min_dcf(ss, params)[0]:.4f}  "
          f"calibration gap {gap:+.4f}")

print("\n=== calibrating system A alone ===")
cal = fit_fusion([dev_a], params)
cal_eval = apply_fusion(cal, [eval_a])
print(f"weight {cal.weights[0]:.3f}, bias {cal.bias:+.3f}")
print(f"EER unchanged: {eer(cal_eval):.4f} (affine maps are monotone)")
print(f"calibration gap now {act_dcf(cal_eval, params) - min_dcf(cal_eval, params)[0]:+.4f}")

print("\n=== fusing A and B ===")
fus = fit_fusion([dev_a, dev_b], params)
fused = apply_fusion(fus, [eval_a, eval_b])
print(f"weights {fus.weights.round(3)}, bias {fus.bias:+.3f}")
print(f"fused EER {eer(fused):.4f} vs best single "
      f"{min(eer(eval_a), eer(eval_b)):.4f}")
print(f"fused minDCF {min_dcf(fused, params)[0]:.4f}, "
      f"actDCF {act_dcf(fused, params):.4f}")
