"""Pipelines evaluated at each scan point, and the scan orchestrator."""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import emitter, entanglement, masks, motion, optics
from .scenario import Scenario
from .tables import ResultTable

log = logging.getLogger(__name__)

DEFAULT_SEED = 20240611

PIPELINE_COLUMNS = {
    "entangle": ("F", "P_succ", "rate", "p_limit"),
    "coeffs": ("population", "coherence", "C1", "C2_re", "C2_im", "C2_abs"),
    "motion": ("T_mK", "nbar", "sigma_nm", "C3_percent", "C3_central_percent", "C3_mc_percent"),
    "field": ("power_ratio", "peak_ratio", "rd_ratio", "eps1"),
    "mask": ("eps1", "flagged_pixels"),
}


def build_mask(s: Scenario, f: optics.ComplexField2D):
    """Mask described by the ``slm`` section, before quantization."""
    train = s.optical_train()
    geometry = masks.SLMGeometry.matched(f, train) if s["slm.match_grid"] else s.slm_geometry()
    kind = s["slm.mask"]
    if kind == "flat":
        return masks.flat_mask(geometry, train)
    if kind == "suppression":
        return masks.suppression_mask(f, train, geometry)
    if kind == "grating":
        return masks.blazed_grating(geometry, s["slm.grating_period"],
                                    k_per_metre=train.slm_k_per_metre())
    chain = s.ion_chain()
    return masks.blazed_sector_mask(chain, s["slm.detector_point"], s.sector_layout(),
                                    s.sector_phases(), train, geometry)


def programmed_mask(s: Scenario, f: optics.ComplexField2D):
    """Quantized mask and its efficiency estimate."""
    return masks.quantize_and_losses(build_mask(s, f), s.levels(), s.crosstalk())


def run_entangle(s: Scenario, rng=None) -> dict:
    d = s.dicke()
    F, limit = entanglement.herald_fidelity(d.N, d.p, full_output=True)
    budget = s.budget()
    return {
        "F": F,
        "P_succ": entanglement.success_probability(d.N, d.p, budget),
        "rate": entanglement.rate_estimate(d.N, d.p, budget),
        "p_limit": float(limit),
    }


def run_coeffs(s: Scenario, rng=None) -> dict:
    d = s.drive()
    ss = emitter.steady_state(d)
    C2 = emitter.c2(s.delay(), d)
    return {
        "population": ss.excited_population,
        "coherence": ss.coherence,
        "C1": emitter.c1(d),
        "C2_re": C2.real,
        "C2_im": C2.imag,
        "C2_abs": abs(C2),
    }


def run_motion(s: Scenario, rng=None) -> dict:
    state = s.thermal_state()
    sigma = state.sigma
    wl = s["optics.wavelength"]
    width = s.psf_width()
    samples = s["thermal.monte_carlo_samples"]
    mc = math.nan
    if samples:
        mc = 100 * motion.monte_carlo_c3(sigma, width, wl, offset=(4 * width, 0.0),
                                         samples=samples, rng=rng)
    return {
        "T_mK": state.temperature * 1e3,
        "nbar": state.nbar,
        "sigma_nm": sigma * 1e9,
        "C3_percent": 100 * motion.c3(sigma, width, wl),
        "C3_central_percent": 100 * motion.c3_central(sigma, width, wl),
        "C3_mc_percent": mc,
    }


def run_field(s: Scenario, rng=None) -> dict:
    train = s.optical_train()
    f = optics.ion_source_field(s.ion_chain(), s.grid())
    mask, eps1 = programmed_mask(s, f)
    free = optics.detector_image(f, None, train.with_rho(0.0))
    det = optics.detector_image(f, mask, train)
    n = f.nx
    xd, yd = s["slm.detector_point"]
    col = n // 2 + int(round(xd / f.dx))
    row = n // 2 + int(round(yd / f.dy))
    rd = det.intensity[row, col] if 0 <= row < n and 0 <= col < n else math.nan
    peak = float(free.intensity.max())
    return {
        "power_ratio": det.power() / free.power(),
        "peak_ratio": float(det.intensity.max()) / peak,
        "rd_ratio": float(rd) / peak,
        "eps1": eps1,
    }


def run_mask(s: Scenario, rng=None) -> dict:
    f = optics.ion_source_field(s.ion_chain(), s.grid())
    mask, eps1 = programmed_mask(s, f)
    flagged = 0 if mask.flagged is None else int(np.count_nonzero(mask.flagged))
    return {"eps1": eps1, "flagged_pixels": float(flagged)}


PIPELINES = {
    "entangle": run_entangle,
    "coeffs": run_coeffs,
    "motion": run_motion,
    "field": run_field,
    "mask": run_mask,
}


def _evaluate(args):
    s, pipeline, index, seed = args
    rng = np.random.default_rng([seed, index])
    try:
        return PIPELINES[pipeline](s, rng), None
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        return None, f"point {index}: {type(exc).__name__}: {exc}"


def scan_points(s: Scenario) -> list[tuple[float, Scenario]]:
    """(displayed x, scenario at that point) in scan order."""
    spec = s.scan
    if spec.variable is None:
        return [(math.nan, s)]
    out = []
    for x in spec.grid():
        out.append((x, s.with_value(spec.variable, s.parse_scan_value(spec.variable, x, spec.unit))))
    return out


def _x_label(s: Scenario) -> str:
    spec = s.scan
    if spec.label:
        return spec.label
    if spec.variable is None:
        return "index"
    return spec.variable.split(".")[1]


def run_scan(s: Scenario, pipeline: str | None = None, seed: int = DEFAULT_SEED,
             jobs: int = 1) -> ResultTable:
    """Evaluate the pipeline at every scan point.

    A failing point becomes a row of NaN and a line in ``failures``; the scan
    always runs to the end. Rows are in scan order whatever ``jobs`` is.
    """
    pipeline = pipeline or s.scan.pipeline
    if pipeline not in PIPELINES:
        raise ValueError(f"unknown pipeline {pipeline!r}")
    points = scan_points(s)
    tasks = [(p, pipeline, i, seed) for i, (_, p) in enumerate(points)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_evaluate, tasks))
    else:
        results = [_evaluate(t) for t in tasks]

    names = s.output.get("columns") or PIPELINE_COLUMNS[pipeline]
    unknown = [c for c in names if c not in PIPELINE_COLUMNS[pipeline]]
    if unknown:
        raise ValueError(f"pipeline {pipeline!r} has no columns {unknown}")
    rows, failures = [], []
    for (x, _), (values, err) in zip(points, results):
        if err is not None:
            failures.append(err)
            log.warning(err)
            values = {}
        rows.append((x,) + tuple(values.get(c, math.nan) for c in names))
    columns = (_x_label(s),) + tuple(names)
    if s.scan.variable is None:
        columns, rows = columns[1:], [r[1:] for r in rows]
    prov = f"scenario sha256={s.source_hash or 'none'} seed={seed} pipeline={pipeline}"
    return ResultTable(columns, tuple(rows), prov, tuple(failures))


def run_series(s: Scenario, pipeline: str | None = None, seed: int = DEFAULT_SEED,
               jobs: int = 1) -> list[tuple[str, ResultTable]]:
    """One table per value of ``scan.series``; a single table otherwise.

    Each entry is ``(label, table)`` where the label is used in output names.
    """
    series = s.series
    if series.variable is None:
        return [("", run_scan(s, pipeline, seed, jobs))]
    out = []
    for i, v in enumerate(series.values):
        point = s.with_value(series.variable, s.parse_scan_value(series.variable, v, series.unit))
        label = f"{v:g}" if not float(v).is_integer() else str(int(v))
        out.append((label, run_scan(point, pipeline, seed + i, jobs)))
    return out
