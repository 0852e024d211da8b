"""Classify mass-normalized sequences into the concentration trichotomy.

Three synthetic families, one per behavior: a bump translating to
infinity (compactness up to translation), a bump flattening out
(vanishing), and a pair of bumps separating (dichotomy, with the plateau
level alpha close to half the total mass).
"""

from fracshape import (classify, flattening_bump_sequence,
                       separating_pair_sequence, translating_bump_sequence)

for gen in (translating_bump_sequence, flattening_bump_sequence,
            separating_pair_sequence):
    seq = gen(seed=0)
    report = classify(seq, epsilon=0.2 * seq.mass_limit)
    line = f"{gen.__name__:30s} -> {report.verdict}"
    if report.alpha is not None:
        line += (f"  (alpha = {report.alpha:.4f}, "
                 f"mass/2 = {seq.mass_limit / 2:.4f})")
    print(line)
