"""Plain-text run configuration (INI syntax).

Schema::

    [run]
    preset = default             # or table-match
    problem = drug
    method = exact               # exact | asymptotic
    objective = different        # same | different
    K = 20
    epsilon = 0.1
    alpha = 0.1
    T = 1
    r0 = 20
    use_crn = false
    seed = 0
    replications = 1
    significance_split = per_system   # per_system | per_stage
    opt_tolerance = stage             # stage | combined
    gamma_scale = 1.0
    output = out

    [drug]                       # any DrugParams field, e.g.
    noise = 0.5
    lipschitz = corrected        # corrected | literal
    cov_bound = closed_form      # closed_form | sigma_g

Unknown keys are rejected. A preset is applied first and explicit keys
override it.
"""
from __future__ import annotations

import configparser
from dataclasses import fields, replace
from typing import Dict, Optional, Tuple

from .drug import DrugParams, DrugProblem
from .orchestrator import RunConfig

# Conventions under which the reference T=1 asymptotic totals are reproduced:
# no per-system split of the optimisation significance, the sample-size
# rule driven by eps_t + eps'_t, the literal |L| and sigma_g^2 as the
# covariance bound.
PRESETS: Dict[str, Tuple[Dict, Dict]] = {
    "default": ({}, {}),
    "table-match": (
        {"significance_split": "per_stage", "opt_tolerance": "combined"},
        {"lipschitz": "literal", "cov_bound": "sigma_g"},
    ),
}

_RUN_TYPES = {"method": str, "objective": str, "K": int, "epsilon": float, "alpha": float,
              "T": int, "r0": int, "use_crn": bool, "seed": int, "replications": int,
              "significance_split": str, "opt_tolerance": str, "gamma_scale": float,
              "problem": str}
_DRUG_TYPES = {f.name: f.type for f in fields(DrugParams)}
_CASTS = {"int": int, "float": float, "str": str, "bool": bool}


def _cast(section, key, kind):
    kind = _CASTS.get(kind, kind) if isinstance(kind, str) else kind
    if kind is bool:
        return section.getboolean(key)
    return kind(section[key])


def apply_preset(name: str, run: Optional[Dict] = None, drug: Optional[Dict] = None) -> Tuple[Dict, Dict]:
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    r, d = PRESETS[name]
    return {**r, **(run or {})}, {**d, **(drug or {})}


def parse_config(text: str) -> Tuple[Dict, Dict, Optional[str]]:
    """Parse INI text into ``(run_kwargs, drug_kwargs, output_dir)``."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    cp.read_string(text)
    extra = set(cp.sections()) - {"run", "drug"}
    if extra:
        raise ValueError(f"unknown config sections: {sorted(extra)}")
    run: Dict = {}
    drug: Dict = {}
    output = None
    preset = "default"
    if cp.has_section("run"):
        sec = cp["run"]
        for key in sec:
            if key == "preset":
                preset = sec[key].strip()
            elif key == "output":
                output = sec[key].strip()
            elif key in _RUN_TYPES:
                run[key] = _cast(sec, key, _RUN_TYPES[key])
            else:
                raise ValueError(f"unknown [run] key {key!r}")
    if cp.has_section("drug"):
        sec = cp["drug"]
        for key in sec:
            if key not in _DRUG_TYPES:
                raise ValueError(f"unknown [drug] key {key!r}")
            drug[key] = _cast(sec, key, _DRUG_TYPES[key])
    run, drug = apply_preset(preset, run, drug)
    return run, drug, output


def load_config(path: str) -> Tuple[Dict, Dict, Optional[str]]:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def build(run: Dict, drug: Dict) -> RunConfig:
    """RunConfig with the drug parameters echoed into ``problem_params``."""
    params = replace(DrugParams(), **drug)
    cfg = RunConfig(**{k: v for k, v in run.items()})
    if cfg.problem != "drug":
        raise ValueError(f"unknown problem {cfg.problem!r}; only 'drug' is built in")
    if params.K != cfg.K:
        params = replace(params, K=cfg.K)
    cfg.problem_params = {f.name: getattr(params, f.name) for f in fields(params)}
    return cfg


class DrugFactory:
    """Picklable oracle factory for process pools."""

    def __init__(self, cfg: RunConfig):
        self.params = DrugParams(**cfg.problem_params)
        self.objective = cfg.objective

    def __call__(self) -> DrugProblem:
        return DrugProblem(self.params, self.objective)
