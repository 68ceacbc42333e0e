"""Experiment configuration: YAML schema, overrides, validation, builders.

A config is a nested mapping with a ``mode`` ('ladder', 'stemmap', or
'demo', which is a small packaged ladder) plus sections for the frame,
super-population, ladder, designs, estimators, replication settings, and
the stem-map study.  Any scalar key can be overridden from the command
line with ``--set section.key=value``; values are parsed as YAML scalars.

Validation never stops at the first problem: the whole config is checked
and every violation is reported at once.
"""

import copy
import hashlib
import math
from importlib import resources

import yaml

from .errors import ConfigError
from .frame import GridFrame, Rect
from .gaussfield import CovarianceSpec, SuperPopulationSpec
from .montecarlo import DesignSpec, StudyConfig, resolve_design
from .stemmap import PlotDesignSpec, StemMapSynthesisSpec

MODES = ("ladder", "stemmap", "demo")

DEFAULTS = {
    "mode": "ladder",
    "master_seed": 1,
    "workers": 1,
    "output_dir": "samplab-out",
    "frame": {"n_cols": 30, "n_rows": 30, "cell_side": 1.0},
    "superpopulation": {"sigma2": 4.0, "tau2": 1.0, "beta": [0.0, 1.0, 1.0]},
    "ladder": {"esr_start": 0.03, "esr_end": 1.0, "count": 40,
               "units": "fraction"},
    "designs": [{"kind": "SRS", "n": 25, "mode": "sampled"},
                {"kind": "SYS", "n": 25, "mode": "full"}],
    "estimators": ["HT", "GREG1", "GREG2"],
    "replication": {"replicates": 400, "bootstrap_samples": 1000,
                    "bootstrap_level": 0.95, "smoothing_window": 51,
                    "enumeration_budget": 10000, "keep_replicates": False,
                    "use_fpc": False},
    "figures": {"enabled": True, "population_index": None, "variogram": True},
    "stemmap": {
        "region": {"width": 500.0, "height": 700.0},
        "synthesis": {"cell_side": 10.0, "n_trees": 83801,
                      "range_a_m": 150.0, "range_b_m": 250.0,
                      "site_base": 10.0, "site_a": 1.5, "site_b": 0.75,
                      "site_floor": 0.5, "mark_mean_kg": 100.0,
                      "mark_sigma": 0.35, "correlation": 0.95,
                      "loadings": [0.9, 0.85, 0.8], "ndvi_mix": 0.5},
        "design": {"kind": "SYS", "k_cols": 5, "k_rows": 7, "n": None,
                   "radius": None, "subgrid": 20, "covariate_mode": "probe"},
        "estimators": ["HF-HT", "HF-GREG1", "HF-GREG2"],
        "replicates": 2000,
        "write_census": True,
    },
}

# allowed keys per section, to catch typos early
_SECTION_KEYS = {
    "": set(DEFAULTS),
    "frame": set(DEFAULTS["frame"]),
    "superpopulation": set(DEFAULTS["superpopulation"]),
    "ladder": set(DEFAULTS["ladder"]),
    "replication": set(DEFAULTS["replication"]),
    "figures": set(DEFAULTS["figures"]),
    "stemmap": set(DEFAULTS["stemmap"]),
    "stemmap.region": set(DEFAULTS["stemmap"]["region"]),
    "stemmap.synthesis": set(DEFAULTS["stemmap"]["synthesis"]),
    "stemmap.design": set(DEFAULTS["stemmap"]["design"]),
}

_DESIGN_KEYS = {"kind", "n", "k_cols", "k_rows", "mode"}


def _deep_merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_config_file(path) -> dict:
    """Parse a YAML config file and merge it over the defaults."""
    with open(path) as fh:
        data = yaml.safe_load(fh)
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"config root must be a mapping, got {type(data).__name__}")
    return _deep_merge(DEFAULTS, data)


def demo_config() -> dict:
    """The packaged demo configuration (small ladder, minutes to run)."""
    text = resources.files("samplab").joinpath("configs/demo.yaml").read_text()
    return _deep_merge(DEFAULTS, yaml.safe_load(text))


def apply_overrides(cfg: dict, assignments) -> dict:
    """Apply ``section.key=value`` overrides; values parse as YAML scalars."""
    cfg = copy.deepcopy(cfg)
    for assignment in assignments:
        if "=" not in assignment:
            raise ConfigError(f"override must look like key=value, got {assignment!r}")
        path, _, raw = assignment.partition("=")
        try:
            value = yaml.safe_load(raw) if raw != "" else None
        except yaml.YAMLError as err:
            raise ConfigError(f"cannot parse override value {raw!r}: {err}") from None
        parts = path.strip().split(".")
        node = cfg
        for i, part in enumerate(parts[:-1]):
            if isinstance(node, list):
                node = _list_item(node, part, path)
            elif isinstance(node, dict):
                node = _dict_item(node, part, path)
            else:
                raise ConfigError(f"cannot descend into {'.'.join(parts[:i + 1])!r}")
        leaf = parts[-1]
        if isinstance(node, list):
            node[_list_index(node, leaf, path)] = value
        elif isinstance(node, dict):
            if leaf not in node:
                raise ConfigError(_unknown_key_message(node, leaf, path))
            node[leaf] = value
        else:
            raise ConfigError(f"cannot assign {path!r}")
    return cfg


def _list_index(node: list, part: str, path: str) -> int:
    if not part.lstrip("-").isdigit():
        raise ConfigError(f"{path!r}: list index expected, got {part!r}")
    idx = int(part)
    if not -len(node) <= idx < len(node):
        raise ConfigError(f"{path!r}: index {idx} out of range for {len(node)} items")
    return idx


def _list_item(node: list, part: str, path: str):
    return node[_list_index(node, part, path)]


def _dict_item(node: dict, part: str, path: str):
    if part not in node:
        raise ConfigError(_unknown_key_message(node, part, path))
    return node[part]


def _unknown_key_message(node: dict, part: str, path: str) -> str:
    known = ", ".join(sorted(str(k) for k in node))
    return f"{path!r}: unknown key {part!r} (known keys: {known})"


def canonical_yaml(cfg: dict) -> str:
    """Stable serialization used for hashing and reproducibility checks."""
    return yaml.safe_dump(cfg, sort_keys=True, default_flow_style=False)


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(canonical_yaml(cfg).encode()).hexdigest()


# ---------------------------------------------------------------------------
# builders


def build_frame(cfg: dict) -> GridFrame:
    f = cfg["frame"]
    return GridFrame(int(f["n_cols"]), int(f["n_rows"]), float(f["cell_side"]))


def build_base_spec(cfg: dict) -> SuperPopulationSpec:
    s = cfg["superpopulation"]
    beta = tuple(float(b) for b in s["beta"])
    if len(beta) != 3:
        raise ConfigError(f"superpopulation.beta needs 3 coefficients, got {len(beta)}")
    return SuperPopulationSpec(cov=CovarianceSpec.from_esr(float(s["sigma2"]), 1.0),
                               beta=beta, tau2=float(s["tau2"]))


def ladder_esr_bounds(cfg: dict, frame: GridFrame) -> tuple:
    """Ladder esr endpoints in frame units.

    With ``units: fraction`` the configured endpoints are fractions of the
    frame width (the unit-square convention); ``absolute`` passes them
    through unchanged.
    """
    lad = cfg["ladder"]
    units = lad["units"]
    if units not in ("fraction", "absolute"):
        raise ConfigError(f"ladder.units must be fraction or absolute, got {units!r}")
    scale = frame.width if units == "fraction" else 1.0
    return float(lad["esr_start"]) * scale, float(lad["esr_end"]) * scale


def build_designs(cfg: dict) -> tuple:
    designs = cfg["designs"]
    if not isinstance(designs, list) or not designs:
        raise ConfigError("designs must be a non-empty list")
    out = []
    for k, d in enumerate(designs):
        if not isinstance(d, dict):
            raise ConfigError(f"designs[{k}] must be a mapping")
        unknown = set(d) - _DESIGN_KEYS
        if unknown:
            raise ConfigError(f"designs[{k}] has unknown keys {sorted(unknown)}")
        out.append(DesignSpec(kind=d.get("kind"), n=d.get("n"),
                              k_cols=d.get("k_cols"), k_rows=d.get("k_rows"),
                              mode=d.get("mode", "auto")))
    return tuple(out)


def build_study_config(cfg: dict, designs=None, estimators=None,
                       replications=None) -> StudyConfig:
    rep = cfg["replication"]
    return StudyConfig(
        designs=designs if designs is not None else build_designs(cfg),
        estimators=tuple(estimators if estimators is not None else cfg["estimators"]),
        master_seed=int(cfg["master_seed"]),
        replications=int(replications if replications is not None
                         else rep["replicates"]),
        bootstrap_B=int(rep["bootstrap_samples"]),
        bootstrap_level=float(rep["bootstrap_level"]),
        moving_average_window=int(rep["smoothing_window"]),
        enumeration_budget=int(rep["enumeration_budget"]),
        use_fpc=bool(rep["use_fpc"]),
        keep_replicates=bool(rep["keep_replicates"]))


def build_region(cfg: dict) -> Rect:
    r = cfg["stemmap"]["region"]
    return Rect(0.0, 0.0, float(r["width"]), float(r["height"]))


def build_synthesis_spec(cfg: dict) -> StemMapSynthesisSpec:
    s = dict(cfg["stemmap"]["synthesis"])
    s["loadings"] = tuple(s.get("loadings", (0.9, 0.85, 0.8)))
    return StemMapSynthesisSpec(**s)


def build_plot_design(cfg: dict) -> PlotDesignSpec:
    d = dict(cfg["stemmap"]["design"])
    if d.get("radius") is None:
        d.pop("radius", None)
    return PlotDesignSpec(kind=d.get("kind"), n=d.get("n"),
                          k_cols=d.get("k_cols"), k_rows=d.get("k_rows"),
                          **({"radius": d["radius"]} if "radius" in d else {}),
                          subgrid=int(d.get("subgrid", 20)),
                          covariate_mode=d.get("covariate_mode", "probe"))


# ---------------------------------------------------------------------------
# validation


def _check_unknown_keys(cfg: dict, problems: list) -> None:
    def walk(section: str, node):
        allowed = _SECTION_KEYS.get(section)
        if allowed is None or not isinstance(node, dict):
            return
        for key in node:
            if key not in allowed:
                where = section or "top level"
                problems.append(f"unknown key {key!r} at {where}")
            else:
                child = f"{section}.{key}" if section else key
                walk(child, node[key])
    walk("", cfg)


def validate_config(cfg: dict) -> list:
    """Every violation in the config, as human-readable strings."""
    problems = []
    _check_unknown_keys(cfg, problems)
    mode = cfg.get("mode")
    if mode not in MODES:
        problems.append(f"mode must be one of {MODES}, got {mode!r}")
    try:
        if int(cfg.get("workers", 1)) < 1:
            problems.append("workers must be >= 1")
    except (TypeError, ValueError):
        problems.append(f"workers must be an integer, got {cfg.get('workers')!r}")

    def attempt(label, builder):
        try:
            return builder()
        except (ConfigError, ValueError, TypeError, KeyError) as err:
            problems.append(f"{label}: {err}")
            return None

    frame = attempt("frame", lambda: build_frame(cfg))
    attempt("superpopulation", lambda: build_base_spec(cfg))
    designs = attempt("designs", lambda: build_designs(cfg))
    attempt("replication", lambda: build_study_config(
        cfg, designs=designs or (), estimators=cfg.get("estimators", ())))
    if frame is not None:
        lad = cfg.get("ladder", {})
        try:
            lo, hi = ladder_esr_bounds(cfg, frame)
            if not (0 < lo < hi):
                problems.append(f"ladder: need 0 < esr_start < esr_end, got {lo}, {hi}")
            if int(lad.get("count", 0)) < 2:
                problems.append(f"ladder: count must be >= 2, got {lad.get('count')}")
        except (ConfigError, ValueError, TypeError) as err:
            problems.append(f"ladder: {err}")
        if designs:
            for k, spec in enumerate(designs):
                try:
                    spec.sample_size(frame)
                except Exception as err:
                    problems.append(f"designs[{k}]: {err}")
    if mode == "stemmap":
        attempt("stemmap.region", lambda: build_region(cfg))
        attempt("stemmap.synthesis", lambda: build_synthesis_spec(cfg))
        attempt("stemmap.design", lambda: build_plot_design(cfg))
        attempt("stemmap", lambda: build_study_config(
            cfg, designs=(), estimators=cfg["stemmap"]["estimators"],
            replications=cfg["stemmap"]["replicates"]))
    return problems


def derived_report(cfg: dict) -> list:
    """Lines of derived quantities for the validation report."""
    lines = []
    mode = cfg.get("mode")
    try:
        frame = build_frame(cfg)
    except Exception:
        return lines
    n_cells = frame.n_cells
    mem_mb = 8 * n_cells * n_cells / 2 ** 20
    lines.append(f"frame: {frame.n_cols} x {frame.n_rows} = {n_cells} cells")
    lines.append(f"covariance factorization memory: 8*N^2 = {mem_mb:.1f} MiB")
    if mode == "stemmap":
        try:
            region = build_region(cfg)
            synth = build_synthesis_spec(cfg)
            design = build_plot_design(cfg)
        except Exception:
            return lines
        nc = round(region.width / synth.cell_side)
        nr = round(region.height / synth.cell_side)
        raster_mem = 8 * (nc * nr) ** 2 / 2 ** 20
        lines.append(f"stem-map raster: {nc} x {nr} = {nc * nr} cells "
                     f"(latent factorization {raster_mem:.1f} MiB)")
        reps = int(cfg["stemmap"]["replicates"])
        lines.append(f"plot design: {design.kind}, n = {design.sample_size} plots, "
                     f"{reps} replicates")
        lines.append(f"total plot measurements: {reps * design.sample_size}")
        return lines
    try:
        designs = build_designs(cfg)
        study = build_study_config(cfg, designs=designs)
        count = int(cfg["ladder"]["count"])
    except Exception:
        return lines
    total = 0
    for spec in designs:
        try:
            n = spec.sample_size(frame)
            dmode, reps = resolve_design(frame, spec, study)
        except Exception as err:
            lines.append(f"design {spec.kind}: {err}")
            continue
        if spec.kind == "SYS":
            starts = spec.layout(frame).num_starts
            lines.append(f"design {spec.kind} n={n}: num_starts = {starts}, "
                         f"{dmode} mode, {reps} replicates per population")
        else:
            space = math.comb(frame.n_cells, n)
            lines.append(f"design {spec.kind} n={n}: sample space C({frame.n_cells},"
                         f"{n}) = {space:.3g}, {dmode} mode, {reps} replicates "
                         f"per population")
        total += reps
    lines.append(f"ladder: {count} populations; total replicate draws = "
                 f"{count * total}")
    return lines
