"""Second eigenvalue of two receding balls versus one half-volume ball.

The union of two balls of total volume V has lambda_2 strictly above
lambda_1 of a single ball of volume V/2, and the gap closes as the balls
recede: the disconnected pair is the limiting optimizer of lambda_2 but
is never attained at finite distance.
"""

from fracshape import build_grid, two_ball_experiment

grid = build_grid(1, 32.0, 512)
distances = [d * grid.h for d in (8, 16, 32, 64, 128)]
rows = two_ball_experiment(grid, 0.5, 64 * grid.cell_volume, distances)

print(f"{'d':>8} {'l1(union)':>12} {'l2(union)':>12} "
      f"{'l1(half ball)':>14} {'gap':>12}")
for r in rows:
    print(f"{r['d']:8.3f} {r['lambda1_union']:12.6f} "
          f"{r['lambda2_union']:12.6f} {r['lambda1_half_ball']:14.6f} "
          f"{r['gap']:12.6f}")
print(f"\ngap ratio far/near: {rows[-1]['gap'] / rows[0]['gap']:.3f}")
