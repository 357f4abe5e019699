"""YAML case files: sections buses / branches / ders / profiles / config
plus a disturbance block.  Quantities may be given in per unit directly or
in SI (kV, ohm, MW, MVA, MWh); the declared bases normalise SI inputs.

See docs/case-format.md for the full schema and a worked 3-bus example.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import yaml

from .grid import (Branch, Bus, EnergyUnit, GridModel, GridError,
                   InjectionProfile, Source)
from .mo import CaseConfig, DisturbanceSpec


class CaseError(ValueError):
    """Case file failed to parse or validate; message carries the field path."""


def _fail(path: str, msg: str):
    raise CaseError(f"{path}: {msg}")


def _get(d: dict, key, path: str, default=None, required=False):
    if key in d:
        return d[key]
    if required:
        _fail(f"{path}.{key}", "missing required field")
    return default


def _num(d: dict, key, path: str, default=None, required=False):
    v = _get(d, key, path, default=default, required=required)
    if v is None:
        return None
    try:
        return float(v)
    except (TypeError, ValueError):
        _fail(f"{path}.{key}", f"expected a number, got {v!r}")


def _quantity(d: dict, base: float, pu_key: str, si_key: str, path: str,
              default=None, required=False):
    """Value from either a per-unit field or an SI field divided by base."""
    has_pu, has_si = pu_key in d, si_key in d
    if has_pu and has_si:
        _fail(path, f"give only one of {pu_key} / {si_key}")
    if has_pu:
        return _num(d, pu_key, path)
    if has_si:
        return _num(d, si_key, path) / base
    if required:
        _fail(path, f"missing {pu_key} or {si_key}")
    return default


def _load_yaml(path) -> dict:
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except FileNotFoundError:
        raise CaseError(f"case file not found: {path}")
    except yaml.YAMLError as exc:
        raise CaseError(f"{path}: YAML parse error: {exc}")
    if not isinstance(doc, dict):
        raise CaseError(f"{path}: top level must be a mapping")
    return doc


def load_case(path) -> tuple[GridModel, InjectionProfile, CaseConfig]:
    """Parse and fully validate a case file."""
    doc = _load_yaml(path)
    cfg_d = doc.get("config")
    if not isinstance(cfg_d, dict):
        raise CaseError("config: section missing")
    base_mva = _num(cfg_d, "base_mva", "config", default=10.0)
    base_kv = _num(cfg_d, "base_kv", "config", default=10.0)
    z_base = base_kv ** 2 / base_mva

    # ---- buses -----------------------------------------------------------
    buses = []
    for i, bd in enumerate(doc.get("buses", [])):
        p = f"buses[{i}]"
        if "id" not in bd:
            _fail(p, "missing id")
        vmin = _quantity(bd, base_kv, "v_min_pu", "v_min_kv", p, default=0.9)
        vmax = _quantity(bd, base_kv, "v_max_pu", "v_max_kv", p, default=1.1)
        buses.append(Bus(
            id=int(bd["id"]),
            g=_num(bd, "g_pu", p, default=0.0),
            b=_num(bd, "b_pu", p, default=0.0),
            v_min=vmin ** 2,
            v_max=vmax ** 2,
        ))

    # ---- branches --------------------------------------------------------
    branches = []
    for i, bd in enumerate(doc.get("branches", [])):
        p = f"branches[{i}]"
        if "from" not in bd or "to" not in bd:
            _fail(p, "missing from/to")
        imax = _num(bd, "i_max_pu", p, default=None)
        branches.append(Branch(
            from_bus=int(bd["from"]),
            to_bus=int(bd["to"]),
            r=_quantity(bd, z_base, "r_pu", "r_ohm", p, required=True),
            x=_quantity(bd, z_base, "x_pu", "x_ohm", p, required=True),
            l_max=np.inf if imax is None else imax ** 2,
        ))

    # ---- ders ------------------------------------------------------------
    ders = doc.get("ders", {}) or {}
    sources = []
    for i, sd in enumerate(ders.get("sources", []) or []):
        p = f"ders.sources[{i}]"
        sources.append(Source(
            bus=int(_get(sd, "bus", p, required=True)),
            s_max=_quantity(sd, base_mva, "s_max_pu", "s_max_mva", p,
                            required=True),
            n_polygon=int(_get(sd, "n_polygon", p, default=12)),
        ))
    eus = []
    for i, ed in enumerate(ders.get("energy_units", []) or []):
        p = f"ders.energy_units[{i}]"
        eus.append(EnergyUnit(
            bus=int(_get(ed, "bus", p, required=True)),
            p_min=_quantity(ed, base_mva, "p_min_pu", "p_min_mw", p,
                            required=True),
            p_max=_quantity(ed, base_mva, "p_max_pu", "p_max_mw", p,
                            required=True),
            soc_min=_quantity(ed, base_mva, "soc_min_puh", "soc_min_mwh", p,
                              required=True),
            soc_max=_quantity(ed, base_mva, "soc_max_puh", "soc_max_mwh", p,
                              required=True),
            soc_init=_quantity(ed, base_mva, "soc_init_puh", "soc_init_mwh",
                               p, default=0.0),
            alpha=_num(ed, "alpha_per_hour", p, default=0.0),
            beta=_num(ed, "beta", p, default=1.0),
        ))

    try:
        grid = GridModel(buses=tuple(buses), branches=tuple(branches),
                         sources=tuple(sources), eus=tuple(eus))
    except GridError as exc:
        raise CaseError(str(exc)) from exc

    # ---- config ----------------------------------------------------------
    horizon = int(_get(cfg_d, "horizon_steps", "config", required=True))
    dt = _num(cfg_d, "dt_hours", "config", required=True)
    window = int(_get(cfg_d, "window_steps", "config", default=horizon))
    start_hour = _num(cfg_d, "start_hour", "config", default=0.0)
    price = np.full(horizon,
                    _num(cfg_d, "price_default_per_kwh", "config",
                         default=0.5))
    for j, per in enumerate(cfg_d.get("price_periods", []) or []):
        p = f"config.price_periods[{j}]"
        lo = _num(per, "start_hour", p, required=True)
        hi = _num(per, "end_hour", p, required=True)
        val = _num(per, "price_per_kwh", p, required=True)
        for k in range(horizon):
            hour = (start_hour + k * dt) % 24.0
            if lo <= hour < hi:
                price[k] = val

    n_u = len(sources) + len(eus)
    r_u = _get(cfg_d, "r_u", "config", default=1.0)
    r_u = np.full(n_u, float(r_u)) if np.isscalar(r_u) \
        else np.asarray(r_u, dtype=float)
    r_e = _get(cfg_d, "r_e", "config", default=0.1)
    r_e = np.full(max(len(eus), 1), float(r_e)) if np.isscalar(r_e) \
        else np.asarray(r_e, dtype=float)

    dist = None
    dd = doc.get("disturbance")
    if dd is not None:
        p = "disturbance"
        family = _get(dd, "family", p, required=True)
        sigma = np.asarray(_get(dd, "sigma", p, required=True), dtype=float)
        sigma = np.atleast_2d(sigma)
        if sigma.shape[0] != len(sources):
            _fail(f"{p}.sigma", f"{sigma.shape[0]} rows for "
                  f"{len(sources)} sources")
        mean0 = dd.get("mean0")
        cov0 = dd.get("cov0")
        dist = DisturbanceSpec(
            family=str(family),
            tau=_num(dd, "tau_hours", p, default=1.0),
            sigma=sigma,
            mean0=None if mean0 is None else np.asarray(mean0, dtype=float),
            cov0=None if cov0 is None else np.asarray(cov0, dtype=float),
            a_drift=None if "a_drift" not in dd
            else np.asarray(dd["a_drift"], dtype=float),
            b_drift=None if "b_drift" not in dd
            else np.asarray(dd["b_drift"], dtype=float),
        )

    cfg = CaseConfig(
        name=str(_get(cfg_d, "name", "config", default=Path(path).stem)),
        horizon=horizon, dt=dt, window=window,
        gamma=_num(cfg_d, "gamma", "config", default=0.95),
        kappa_rule=str(_get(cfg_d, "kappa_rule", "config", default="dr")),
        r_u=r_u, r_v=_num(cfg_d, "r_v", "config", default=1.0),
        r_e=r_e, price=price, base_mva=base_mva, base_kv=base_kv,
        disturbance=dist,
    )

    # ---- profiles ---------------------------------------------------------
    prof_d = doc.get("profiles", {}) or {}
    nb = grid.n_bus
    pos = {b.id: k for k, b in enumerate(grid.buses)}

    def series(section: str) -> np.ndarray:
        arr = np.zeros((horizon, nb))
        sec = prof_d.get(section, {}) or {}
        for bus_key, vals in sec.items():
            p = f"profiles.{section}[{bus_key}]"
            try:
                bus_id = int(bus_key)
            except (TypeError, ValueError):
                _fail(p, "bus key must be an integer id")
            if bus_id not in pos:
                _fail(p, f"unknown bus {bus_id}")
            if np.isscalar(vals):
                col = np.full(horizon, float(vals))
            else:
                col = np.asarray(vals, dtype=float)
                if col.shape != (horizon,):
                    _fail(p, f"needs {horizon} values, got {col.shape}")
            arr[:, pos[bus_id]] = col
        unit = prof_d.get(f"{section}_unit", "pu")
        if unit == "mw" or unit == "mvar":
            arr = arr / base_mva
        elif unit != "pu":
            _fail(f"profiles.{section}_unit", f"unknown unit {unit!r}")
        return arr

    profile = InjectionProfile(p_pred=series("p_pred"),
                               p_load=series("p_load"),
                               q_load=series("q_load"))
    try:
        profile.validate(grid, horizon)
    except GridError as exc:
        raise CaseError(str(exc)) from exc
    return grid, profile, cfg


def builtin_case_path(name: str) -> Path:
    """Path of a case shipped with the package (name without extension)."""
    here = Path(__file__).parent / "cases"
    p = here / f"{name}.yaml"
    if not p.exists():
        known = sorted(q.stem for q in here.glob("*.yaml"))
        raise CaseError(f"unknown built-in case {name!r}; shipped: {known}")
    return p
