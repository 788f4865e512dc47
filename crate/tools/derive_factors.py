"""Derive linear production-impact factors and the electricity mix table
from the Boavizta reference data, and re-run the reference component
models on a few cards to produce comparison fixtures.

    python -m venv env && env/bin/pip install boaviztapi==1.3.15
    env/bin/python tools/derive_factors.py crates/core/data crates/core/tests/fixtures
"""
import csv
import importlib.metadata
import json
import sys

import boaviztapi
from boaviztapi import data_dir
from boaviztapi.model.component.cpu import ComponentCPU
from boaviztapi.model.component.ram import ComponentRAM
from boaviztapi.service import impacts_computation as ic
from boaviztapi.service.factor_provider import get_impact_factor
import yaml

LIFE_HOURS = 26280
VERSION = "boaviztapi-" + importlib.metadata.version("boaviztapi")


def cpu(die_mm2=None):
    c = ComponentCPU()
    if die_mm2 is not None:
        c.die_size.set_input(die_mm2)
    return c


def ram(gb):
    r = ComponentRAM()
    r.capacity.set_input(gb)
    return r


def embedded(kind, model):
    fn = ic.cpu_impact_embedded if kind == "cpu" else ic.ram_impact_embedded
    return {t: fn(t, LIFE_HOURS, model)[0] for t in ("gwp", "adp")}


def main(data_out, fixtures_out):
    cpu_f = {t: get_impact_factor(item="cpu", impact_type=t) for t in ("gwp", "adp")}
    ram_f = {t: get_impact_factor(item="ram", impact_type=t) for t in ("gwp", "adp")}
    density = ram(1.0)
    density.density.value  # triggers completion
    dens = density.density.value
    default_cpu = embedded("cpu", cpu())

    def vec(gwp, adp, source):
        return {"energy_kwh": 0.0, "gwp_kg": gwp, "adpe_kgsb": adp, "source": source}

    factors = {
        "version": f"{VERSION}/linear-v1",
        "logic_per_cm2": vec(
            cpu_f["gwp"]["die_impact"] * 100.0,
            cpu_f["adp"]["die_impact"] * 100.0,
            f"{VERSION} cpu.die_impact (per mm2) x 100",
        ),
        "memory_per_gb": vec(
            ram_f["gwp"]["die_impact"] / dens,
            ram_f["adp"]["die_impact"] / dens,
            f"{VERSION} ram.die_impact (per cm2) / mean crowdsourced density {dens:.6f} GB/cm2",
        ),
        "board_base": vec(
            cpu_f["gwp"]["impact"] + ram_f["gwp"]["impact"],
            cpu_f["adp"]["impact"] + ram_f["adp"]["impact"],
            f"{VERSION} cpu.impact + ram.impact (package base terms)",
        ),
        "cpu_production": vec(
            default_cpu["gwp"],
            default_cpu["adp"],
            f"{VERSION} cpu_impact_embedded on the DEFAULT cpu archetype",
        ),
    }
    with open(f"{data_out}/factors.json", "w") as f:
        json.dump(factors, f, indent=2)
        f.write("\n")

    cards = [("V100", 815.0, 32.0), ("A100", 826.0, 40.0), ("T4", 545.0, 16.0)]
    rows = []
    for name, die, mem in cards:
        a = embedded("cpu", cpu(die))
        b = embedded("ram", ram(mem))
        rows.append(
            {
                "card": name,
                "die_area_mm2": die,
                "memory_gb": mem,
                "gwp_kg": a["gwp"] + b["gwp"],
                "adpe_kgsb": a["adp"] + b["adp"],
                "source": f"{VERSION} cpu_impact_embedded(die) + ram_impact_embedded(memory)",
            }
        )
    with open(f"{fixtures_out}/reference_tool_cards.json", "w") as f:
        json.dump(rows, f, indent=2)
        f.write("\n")

    with open(f"{data_dir}/factors.yml") as f:
        elec = yaml.safe_load(f)["electricity"]
    with open(f"{data_out}/mixes.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["country", "carbon_intensity_g_per_kwh", "adpe_kgsb_per_kwh"])
        for code in sorted(elec):
            entry = elec[code]
            gwp = (entry.get("gwp") or {}).get("value")
            adpe = (entry.get("adpe") or {}).get("value")
            if gwp is None or adpe is None:
                continue
            out = "WLD" if code == "WOR" else code
            w.writerow([out, repr(round(gwp * 1000.0, 6)), repr(adpe)])


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
