"""Two spheres on a head-on course, followed through one collision and one wall bounce."""
import numpy as np

from hsclusters import ParticleState, SimConfig, predict_pair_collision, run

a = ParticleState(np.array([0.2, 0.5, 0.5]), np.array([1.0, 0.0, 0.0]))
b = ParticleState(np.array([0.6, 0.5, 0.5]), np.zeros(3))

# centres are 0.4 apart and the spheres touch at distance eps
print("predicted impact after", predict_pair_collision(a, b, epsilon=0.1))

res = run(SimConfig(2, t_end=0.9, epsilon=0.1, sample_times=[0.5, 0.9]), [a, b])
for rec in res.log:
    print(f"t={rec.t:.3f}  pair ({rec.p}, {rec.q})  omega={rec.omega}")

# velocities are exchanged along omega; b then reflects off x = 1 - eps/2
for t, x, v in zip(res.sample_times, res.positions, res.velocities):
    print(f"t={t}: x_b={x[1, 0]:.3f}  v_a={v[0]}  v_b={v[1]}")
print("wall bounces:", res.n_wall_events)
