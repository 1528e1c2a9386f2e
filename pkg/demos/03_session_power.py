# # Session lifecycle and battery draw
#
# The radar only runs while the user is walking with the screen on, or has
# asked for assistance. It also shuts itself off after 10 s unless something
# was detected within the last 2 s.

from uasw.classifier import ObstacleLabel
from uasw.detector import DetectionVerdict
from uasw.session import Detection, Tick, UserEvent, power_estimate, run_session

hit = DetectionVerdict(True, 6, 0, 90.0)
person = ObstacleLabel("human", "dry", "mobile")

script = [
    UserEvent(0.0, "walking_started"),
    UserEvent(500.0, "screen_on"),
    Detection(4000.0, hit, person),
    Tick(8000.0),
    Tick(10_600.0),   # 10.1 s active, last detection 6.6 s ago: cut off
    UserEvent(12_000.0, "screen_off"),
    UserEvent(13_000.0, "assist_requested"),
    Detection(14_000.0, hit, None),
    UserEvent(16_000.0, "assist_cancelled"),
    Tick(20_000.0),
]

states, actions = run_session(script)
for a in actions:
    print(a)

final = states[-1]
print("radar on for %.1f s of %.1f s" % (final.accumulated_active_ms / 1e3, final.elapsed_ms / 1e3))
print("average current %.2f mA (39.8 mA while active, 0 idle)" % power_estimate(final))

# A 62 % duty cycle lands at about 24.7 mA.

print("62%% duty: %.2f mA" % (0.62 * 39.8))
