"""Digital twin lifecycle: sync, staleness, summaries and calibration.

Runs the same physical trajectory against twins configured with the three
delay classes and shows how data freshness degrades twin fidelity, then
demonstrates window summaries as the bandwidth-saving alternative to
forwarding every sample.
"""
import numpy as np

from twinslice.domain import AllocationMatrix
from twinslice.scenario import Scenario
from twinslice.twin import (
    CalibrationTolerances,
    DelayClass,
    DigitalTwin,
    calibrate,
    staleness,
    summarize,
)

scen = Scenario(n_embb=2, n_urllc=1, num_rbs=4, horizon_slots=40)
decision = AllocationMatrix((0, 1, 2, 2))

print("=" * 64)
print("Twin fidelity by delay class (mean abs SNR error per slot)")
print("=" * 64)
for delay, slots in (
    (DelayClass.MINIMAL, 0),
    (DelayClass.MODERATE, 2),
    (DelayClass.SIGNIFICANT, 10),
):
    env = scen.environment(seed=5)
    twin = DigitalTwin(delay=delay, moderate_slots=2, significant_slots=10)
    errors, ages = [], []
    for t in range(scen.horizon_slots):
        twin.record(env.state)
        snap = twin.snapshot(now=t)
        ages.append(staleness(snap, t))
        report = calibrate(snap, env.state, CalibrationTolerances())
        errors.append(report.mean_abs_snr_error)
        env.step(decision)
    print(
        f"  {delay.value:<12} staleness(steady)={ages[-1]:>2} slots, "
        f"mean err={np.mean(errors):8.4f}, max err={np.max(errors):8.4f}"
    )
print("  (MINIMAL delay is exact by construction: every error is 0)")

print()
print("=" * 64)
print("Summarized insights: one averaged snapshot per 8-slot window")
print("=" * 64)
env = scen.environment(seed=5)
twin = DigitalTwin()
history = []
for t in range(16):
    twin.record(env.state)
    history.append(twin.snapshot(now=t))
    env.step(decision)
summary = summarize(history, window=8)
last = history[-1]
print(f"  raw snapshot snr[0]:     {np.round(last.channel.snr[0], 2)}")
print(f"  8-slot summary snr[0]:   {np.round(summary.channel.snr[0], 2)}")
print(f"  summary captured_at = {summary.captured_at} (newest slot in window)")
