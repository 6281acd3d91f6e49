"""
Simulated tours: why precision and accuracy diverge
===================================================

A differential-drive robot tours the bundled small-house scenario with a
map-corrected localizer whose map carries a fixed spatial bias field.
The bias pulls every stop to the same wrong spot, so the runs are far
more repeatable than they are accurate.  Reusing a session-persistent
map halves the correction noise and tightens precision further.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from navbench import (
    LocalizerSpec,
    SimRunConfig,
    bundled_scenario_path,
    evaluate_attainment,
    load_scenario_file,
    run_benchmark,
)

OUT = Path(__file__).with_name("output")
OUT.mkdir(exist_ok=True)

scenario = load_scenario_file(bundled_scenario_path("small_house"))
print("scenario: %d waypoints, %d rounds\n" % (
    scenario.total_waypoints(), scenario.protocol.rounds))

###############################################################################
# One run without map reuse.  Per waypoint: accuracy e (error to target)
# versus precision E (spread about the robot's own mean stop).

spec = LocalizerSpec(
    kind="map_corrected", rho=0.02, bias_pos_max=0.08, bias_ang_max=0.1, bias_seed=3
)
result = run_benchmark(SimRunConfig(scenario=scenario, localizer=spec, seed=7))
report = evaluate_attainment(scenario, result.table)

print("waypoint       accuracy e [m]   precision E [m]")
for row in report.rows:
    print("%-12s   %14.4f   %15.4f" % (
        row.waypoint_id, row.accuracy.position_m, row.precision.position_m))
print("completeness C = %.2f" % report.completeness.ratio)
print("median accuracy %.4f m vs median precision %.4f m\n" % (
    report.summaries["position_accuracy"].median,
    report.summaries["position_precision"].median))

###############################################################################
# Map reuse across the whole session: same bias, half the per-step
# correction noise.  Average the precision gain over 10 seeds.

base_prec, reuse_prec = [], []
for seed in range(10):
    for reuse, sink in [(False, base_prec), (True, reuse_prec)]:
        cfg = SimRunConfig(
            scenario=scenario,
            localizer=LocalizerSpec(
                kind="map_corrected", rho=0.02, bias_pos_max=0.08,
                bias_ang_max=0.1, bias_seed=3, map_reuse=reuse,
            ),
            seed=seed,
            log_trajectories=False,
        )
        rep = evaluate_attainment(scenario, run_benchmark(cfg).table)
        sink.extend(r.precision.position_m for r in rep.rows if r.completed)

factor = np.mean(base_prec) / np.mean(reuse_prec)
print("mean precision without reuse: %.4f m" % np.mean(base_prec))
print("mean precision with reuse:    %.4f m" % np.mean(reuse_prec))
print("improvement factor: %.2fx\n" % factor)

###############################################################################
# The cumulative precision curves make the same point graphically: the
# reuse curve rises earlier at every threshold.

fig, ax = plt.subplots(figsize=(5, 3.2))
for reuse, label in [(False, "fresh map each round"), (True, "map reused")]:
    cfg = SimRunConfig(
        scenario=scenario,
        localizer=LocalizerSpec(
            kind="map_corrected", rho=0.02, bias_pos_max=0.08,
            bias_ang_max=0.1, bias_seed=3, map_reuse=reuse,
        ),
        seed=7,
        log_trajectories=False,
    )
    rep = evaluate_attainment(scenario, run_benchmark(cfg).table)
    curve = rep.curves["position_precision"]
    ax.step(curve.thresholds, curve.fraction_below, where="post", label=label)
ax.set_xlabel("position precision threshold [m]")
ax.set_ylabel("fraction of waypoints below")
ax.legend()
ax.set_title("Map reuse tightens repeatability")
fig.tight_layout()
fig.savefig(OUT / "simulation_precision_curves.png", dpi=120)
print("wrote", OUT / "simulation_precision_curves.png")
