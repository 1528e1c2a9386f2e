# # Simulating a walk towards an obstacle
#
# We build a scene with a person standing about 2 m ahead, let the user walk
# towards them, and run the presence detector over the resulting CIR stream.

import numpy as np

from uasw.pipeline import calibrate, tap_distance
from uasw.radar_sim import Clutter, Reflector, Scene, SIGNATURES, simulate_session
from uasw.stream import StreamProcessor

# The floor ahead gives a weak diffuse return. The Doppler spread follows
# roughly from the walking speed.

rng = np.random.default_rng(0)
floor = Clutter.diffuse(2.1, 100.0, 35.0, rng)

# For the first second nothing is in the way. Then a person appears at 2 m
# and the gap closes at 1 m/s.

empty = Scene(noise_std=4.0, leakage_amplitude=8000.0, clutter=[floor])
person = Scene(
    [Reflector(2.0, 1200.0, -1.0, SIGNATURES["human"])],
    noise_std=4.0,
    leakage_amplitude=8000.0,
    clutter=[floor],
)
frames = list(simulate_session([(0.0, empty), (1000.0, person)], duration_ms=2500.0, seed=1))
print(len(frames), "CIRs at 5 ms spacing")

# Calibration finds the leakage peak, which is our zero-range tap.

calib = calibrate(frames[:64])
print("zero-range tap:", calib.b0_index, "confidence %.1f" % calib.confidence)

# One tap spans 15 cm, so the 15 bins we keep reach 2.25 m.

for b in (1, 4, 15):
    print("B%-2d ends at %5.1f cm" % (b, tap_distance(b)[0]))

# Now we stream. A verdict comes out every 40 ms once the first 440 ms of
# CIRs have been buffered.

proc = StreamProcessor(calib)
for res in proc.run(frames):
    v = res.verdict
    mark = "OBSTACLE at ~%d cm (B%d)" % (v.range_estimate_cm, v.trigger_bin) if v.detected else "-"
    print("%7.0f ms  sigma=%d  %s" % (res.timestamp_ms, v.sigma, mark))
