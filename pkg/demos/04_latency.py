# # Per-inference compute time
#
# Acquisition of new CIRs takes most of the wall-clock time between verdicts.
# Here we time only the compute: building the buffer and its features,
# running the detector rule, and one classifier pass.

import numpy as np

from uasw.bench import format_table, run_bench
from uasw.classifier import init_model
from uasw.pipeline import calibrate
from uasw.radar_sim import Reflector, Scene, simulate_session

scene = Scene([Reflector(1.5, 1200.0, -0.5)], noise_std=4.0, leakage_amplitude=8000.0)
frames = list(simulate_session(scene, duration_ms=2000.0, seed=0))

# Weights don't change the cost of a forward pass, so an untrained model
# of the right shape is enough.

model = init_model(rng=np.random.default_rng(0))
stats, times = run_bench(frames, calibrate(frames[:64]), model, iters=2000)
print(format_table(stats))
print("slowest single inference: %.3f ms" % times.sum(axis=1).max())
