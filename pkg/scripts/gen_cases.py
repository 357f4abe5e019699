#!/usr/bin/env python3
"""Regenerate the case files shipped in src/gridmo/cases/.

All profiles are synthetic (the real feeder measurements behind the studied
scenarios are not public); shapes are smooth day curves chosen so that the
shipped cases are feasible with distributionally-robust tightening at
gamma = 0.95.  Deterministic: fixed seeds, stable formatting.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parent.parent / "src" / "gridmo" / "cases"

# Baran-Wu 33-bus feeder data: (from, to, R ohm, X ohm), loads (kW, kvar)
BW_BRANCHES = [
    (1, 2, 0.0922, 0.0470), (2, 3, 0.4930, 0.2511), (3, 4, 0.3660, 0.1864),
    (4, 5, 0.3811, 0.1941), (5, 6, 0.8190, 0.7070), (6, 7, 0.1872, 0.6188),
    (7, 8, 0.7114, 0.2351), (8, 9, 1.0300, 0.7400), (9, 10, 1.0440, 0.7400),
    (10, 11, 0.1966, 0.0650), (11, 12, 0.3744, 0.1238),
    (12, 13, 1.4680, 1.1550), (13, 14, 0.5416, 0.7129),
    (14, 15, 0.5910, 0.5260), (15, 16, 0.7463, 0.5450),
    (16, 17, 1.2890, 1.7210), (17, 18, 0.7320, 0.5740),
    (2, 19, 0.1640, 0.1565), (19, 20, 1.5042, 1.3554),
    (20, 21, 0.4095, 0.4784), (21, 22, 0.7089, 0.9373),
    (3, 23, 0.4512, 0.3083), (23, 24, 0.8980, 0.7091),
    (24, 25, 0.8960, 0.7011), (6, 26, 0.2030, 0.1034),
    (26, 27, 0.2842, 0.1447), (27, 28, 1.0590, 0.9337),
    (28, 29, 0.8042, 0.7006), (29, 30, 0.5075, 0.2585),
    (30, 31, 0.9744, 0.9630), (31, 32, 0.3105, 0.3619),
    (32, 33, 0.3410, 0.5302),
]
BW_LOADS = {
    2: (100, 60), 3: (90, 40), 4: (120, 80), 5: (60, 30), 6: (60, 20),
    7: (200, 100), 8: (200, 100), 9: (60, 20), 10: (60, 20), 11: (45, 30),
    12: (60, 35), 13: (60, 35), 14: (120, 80), 15: (60, 10), 16: (60, 20),
    17: (60, 20), 18: (90, 40), 19: (90, 40), 20: (90, 40), 21: (90, 40),
    22: (90, 40), 23: (90, 50), 24: (420, 200), 25: (420, 200), 26: (60, 25),
    27: (60, 25), 28: (40, 20), 29: (120, 70), 30: (200, 600),
    31: (150, 70), 32: (210, 100), 33: (60, 40),
}


def fmt_list(vals, nd=5):
    return "[" + ", ".join(f"{v:.{nd}f}" for v in vals) + "]"


def day_shape(n, dt, start, kind, rng=None):
    hours = (start + np.arange(n) * dt) % 24.0
    if kind == "load":
        return 0.75 + 0.25 * np.exp(-((hours - 18.5) / 3.2) ** 2) \
            + 0.12 * np.exp(-((hours - 9.0) / 2.5) ** 2)
    if kind == "pv":
        return np.clip(np.cos((hours - 13.0) / 7.0 * np.pi / 2), 0.0, None)
    if kind == "wind":
        return 0.65 + 0.2 * np.sin(hours / 24.0 * 2 * np.pi + 1.1)
    raise ValueError(kind)


def gen_case3():
    n, dt, start = 16, 0.25, 10.0
    wind1 = 0.28 * day_shape(n, dt, start, "wind")
    wind2 = 0.22 * day_shape(n, dt, start, "wind")
    load1p = 0.50 * day_shape(n, dt, start, "load")
    load1q = 0.32 * load1p
    load2p = 0.62 * day_shape(n, dt, start, "load")
    load2q = 0.30 * load2p
    return f"""# Three-bus feeder: two correlated wind units and one energy unit.
# Synthetic profiles; all values per unit on 10 MVA / 10 kV bases.
config:
  name: case3
  horizon_steps: {n}
  dt_hours: {dt}
  window_steps: {n}
  base_mva: 10.0
  base_kv: 10.0
  gamma: 0.95
  kappa_rule: dr
  r_u: 400.0
  r_v: 30000.0
  r_e: 2000.0
  start_hour: {start}
  price_default_per_kwh: 0.5
  price_periods:
    - {{start_hour: 8.0, end_hour: 20.0, price_per_kwh: 1.0}}

disturbance:
  family: affine_ou
  tau_hours: 2.0
  sigma:
    - [0.100, 0.000]
    - [0.050, 0.090]

buses:
  - {{id: 0, v_min_pu: 0.95, v_max_pu: 1.05}}
  - {{id: 1, v_min_pu: 0.95, v_max_pu: 1.05}}
  - {{id: 2, v_min_pu: 0.95, v_max_pu: 1.05}}

branches:
  - {{from: 0, to: 1, r_pu: 0.040, x_pu: 0.025, i_max_pu: 1.60}}
  - {{from: 1, to: 2, r_pu: 0.030, x_pu: 0.018, i_max_pu: 1.30}}

ders:
  sources:
    - {{bus: 1, s_max_pu: 0.80, n_polygon: 12}}
    - {{bus: 2, s_max_pu: 0.60, n_polygon: 12}}
  energy_units:
    - {{bus: 2, p_min_pu: -0.40, p_max_pu: 0.40, soc_min_puh: 0.0,
       soc_max_puh: 1.60, soc_init_puh: 0.80, alpha_per_hour: 0.02,
       beta: 0.95}}

profiles:
  p_pred:
    1: {fmt_list(wind1)}
    2: {fmt_list(wind2)}
  p_load:
    1: {fmt_list(load1p)}
    2: {fmt_list(load2p)}
  q_load:
    1: {fmt_list(load1q)}
    2: {fmt_list(load2q)}
"""


def gen_case33():
    n, dt, start = 16, 0.25, 10.0
    base_mva, base_kv = 10.0, 12.66
    shape = day_shape(n, dt, start, "load")
    wind = 0.30 * day_shape(n, dt, start, "wind")
    pv = 0.25 * day_shape(n, dt, start, "pv")
    lines = ["# 33-bus-class radial feeder (classic distribution test data),",
             "# SI inputs normalised by the declared bases. Synthetic shapes.",
             "config:",
             "  name: case33",
             f"  horizon_steps: {n}",
             f"  dt_hours: {dt}",
             f"  window_steps: {n}",
             f"  base_mva: {base_mva}",
             f"  base_kv: {base_kv}",
             "  gamma: 0.95",
             "  kappa_rule: dr",
             "  r_u: 400.0",
             "  r_v: 30000.0",
             "  r_e: 2000.0",
             f"  start_hour: {start}",
             "  price_default_per_kwh: 0.5",
             "  price_periods:",
             "    - {start_hour: 8.0, end_hour: 20.0, price_per_kwh: 1.0}",
             "",
             "disturbance:",
             "  family: affine_ou",
             "  tau_hours: 1.5",
             "  sigma:",
             "    - [0.060, 0.000]",
             "    - [0.020, 0.050]",
             "",
             "buses:"]
    lines.append("  - {id: 0, v_min_pu: 0.90, v_max_pu: 1.05}")
    for b in range(2, 34):
        lines.append(f"  - {{id: {b - 1}, v_min_pu: 0.90, v_max_pu: 1.05}}")
    lines.append("")
    lines.append("branches:")
    for f, t, r, x in BW_BRANCHES:
        lines.append(f"  - {{from: {f - 1}, to: {t - 1}, r_ohm: {r}, "
                     f"x_ohm: {x}}}")
    lines.append("")
    lines.append("ders:")
    lines.append("  sources:")
    lines.append("    - {bus: 16, s_max_pu: 0.50, n_polygon: 12}")
    lines.append("    - {bus: 31, s_max_pu: 0.40, n_polygon: 12}")
    lines.append("  energy_units:")
    lines.append("    - {bus: 28, p_min_pu: -0.30, p_max_pu: 0.30, "
                 "soc_min_puh: 0.0, soc_max_puh: 1.20, soc_init_puh: 0.60, "
                 "alpha_per_hour: 0.02, beta: 0.95}")
    lines.append("")
    lines.append("profiles:")
    lines.append("  p_pred:")
    lines.append(f"    16: {fmt_list(wind)}")
    lines.append(f"    31: {fmt_list(pv)}")
    lines.append("  p_load:")
    for b, (p, _) in sorted(BW_LOADS.items()):
        vals = p / 1000.0 / base_mva * shape
        lines.append(f"    {b - 1}: {fmt_list(vals)}")
    lines.append("  q_load:")
    for b, (_, q) in sorted(BW_LOADS.items()):
        vals = q / 1000.0 / base_mva * shape
        lines.append(f"    {b - 1}: {fmt_list(vals)}")
    lines.append("")
    return "\n".join(lines)


def gen_ieee123():
    """Synthetic 123-bus radial analog: wind at 11/62/66, PV at 72/75/114,
    one 5 MW x 4 h energy unit at bus 62."""
    rng = np.random.default_rng(123)
    n, dt, start = 16, 0.25, 10.0
    n_bus = 123
    # feeder-like tree: long trunk with laterals
    parent = {}
    trunk = list(range(0, 40))
    for b in range(1, 40):
        parent[b] = b - 1
    next_bus = 40
    attach_points = list(range(2, 40, 3))
    while next_bus < n_bus:
        head = attach_points[rng.integers(len(attach_points))]
        length = int(rng.integers(2, 7))
        prev = head
        for _ in range(length):
            if next_bus >= n_bus:
                break
            parent[next_bus] = prev
            prev = next_bus
            next_bus += 1
    branches = []
    for b in sorted(parent):
        r = float(rng.uniform(0.003, 0.010))
        x = float(r * rng.uniform(0.8, 1.6))
        branches.append((parent[b], b, round(r, 5), round(x, 5)))

    wind_buses = [11, 62, 66]
    pv_buses = [72, 75, 114]
    # diffusion: correlated pairs (62, 66) and (72, 75); magnitudes scaled
    # to keep the DR-tightened program feasible
    sigma = np.array([
        [2.98, 0, 0, 0, 0, 0],
        [0, 7.52, 0, 0, 0, 0],
        [0, 2.25, 3.91, 0, 0, 0],
        [0, 0, 0, 1.42, 0, 0],
        [0, 0, 0, 0, 3.75, 0],
        [0, 0, 0, 0, 1.46, 2.35],
    ]) / 60.0

    load_buses = sorted(rng.choice(np.arange(1, n_bus), size=80,
                                   replace=False).tolist())
    base_p = {b: float(rng.uniform(0.004, 0.022)) for b in load_buses}
    shape = day_shape(n, dt, start, "load")
    windshape = day_shape(n, dt, start, "wind")
    pvshape = day_shape(n, dt, start, "pv")
    wind_pred = {b: 0.55 * windshape * f
                 for b, f in zip(wind_buses, (1.0, 1.15, 0.9))}
    pv_pred = {b: 0.35 * pvshape * f
               for b, f in zip(pv_buses, (1.0, 1.1, 0.8))}

    lines = ["# Synthetic 123-bus radial analog; wind on 11/62/66,",
             "# PV on 72/75/114, energy unit (5 MW x 4 h) on 62.",
             "# Profiles are synthetic stand-ins on 10 MVA / 10 kV bases.",
             "config:",
             "  name: ieee123",
             f"  horizon_steps: {n}",
             f"  dt_hours: {dt}",
             f"  window_steps: {n}",
             "  base_mva: 10.0",
             "  base_kv: 10.0",
             "  gamma: 0.95",
             "  kappa_rule: dr",
             "  r_u: 400.0",
             "  r_v: 30000.0",
             "  r_e: 2000.0",
             f"  start_hour: {start}",
             "  price_default_per_kwh: 0.5",
             "  price_periods:",
             "    - {start_hour: 8.0, end_hour: 20.0, price_per_kwh: 1.0}",
             "",
             "disturbance:",
             "  family: general_affine",
             "  tau_hours: 2.0",
             "  a_drift:"]
    a_drift = -np.eye(6) / 2.0
    for row in a_drift:
        lines.append(f"    - {fmt_list(row, 3)}")
    lines.append("  b_drift: [0, 0, 0, 0, 0, 0]")
    lines.append("  sigma:")
    sig_eff = sigma / np.sqrt(2.0)  # matches the OU 1/sqrt(tau) convention
    for row in sig_eff:
        lines.append(f"    - {fmt_list(row, 5)}")
    lines.append("")
    lines.append("buses:")
    for b in range(n_bus):
        lines.append(f"  - {{id: {b}, v_min_kv: 9.5, v_max_kv: 10.5}}")
    lines.append("")
    lines.append("branches:")
    for f, t, r, x in branches:
        lines.append(f"  - {{from: {f}, to: {t}, r_pu: {r}, x_pu: {x}}}")
    lines.append("")
    lines.append("ders:")
    lines.append("  sources:")
    for b in wind_buses:
        lines.append(f"    - {{bus: {b}, s_max_mva: 20.0, n_polygon: 12}}")
    for b in pv_buses:
        lines.append(f"    - {{bus: {b}, s_max_mva: 10.0, n_polygon: 12}}")
    lines.append("  energy_units:")
    lines.append("    - {bus: 62, p_min_mw: -5.0, p_max_mw: 5.0, "
                 "soc_min_mwh: 0.0, soc_max_mwh: 20.0, soc_init_mwh: 10.0, "
                 "alpha_per_hour: 0.02, beta: 0.95}")
    lines.append("")
    lines.append("profiles:")
    lines.append("  p_pred:")
    for b in wind_buses:
        lines.append(f"    {b}: {fmt_list(wind_pred[b])}")
    for b in pv_buses:
        lines.append(f"    {b}: {fmt_list(pv_pred[b])}")
    lines.append("  p_load:")
    for b in load_buses:
        lines.append(f"    {b}: {fmt_list(base_p[b] * shape)}")
    lines.append("  q_load:")
    for b in load_buses:
        lines.append(f"    {b}: {fmt_list(0.35 * base_p[b] * shape)}")
    lines.append("")
    return "\n".join(lines)


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    (OUT / "case3.yaml").write_text(gen_case3())
    (OUT / "case33.yaml").write_text(gen_case33())
    (OUT / "ieee123.yaml").write_text(gen_ieee123())
    print(f"wrote case3, case33, ieee123 under {OUT}")


if __name__ == "__main__":
    main()
