"""Command-line front end: simulate, reconstruct, run, selftest.

Configs and structured reports are JSON. Angles are given in units of pi
(``phi_over_pi``, ``theta_over_pi``).

Exit codes: 0 success, 2 config error, 3 reconstruction failure,
4 selftest failure.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Optional, Tuple

import numpy as np

from . import entangled_state as es
from . import measurement_sim as ms
from . import pauli_algebra as pa
from . import tomography as tomo
from .selftest import selftest

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RECONSTRUCTION = 3
EXIT_SELFTEST = 4

CONFIG_ENV = "PAULITOMO_CONFIG"
REPORT_SCHEMA = "paulitomo.report/1"
ELEMENTS = ((0, 0), (0, 1), (1, 0), (1, 1))

DEFAULTS = {
    "shots_per_setting": 10_000,
    "detector_efficiency": 1.0,
    "seed": 0,
    "reference_vector": "auto",
    "bootstrap_resamples": tomo.DEFAULT_RESAMPLES,
}
CONFIG_KEYS = {"input_state", "device", *DEFAULTS}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    input_state: es.TwoQubitPureState
    input_label: Any
    device: Tuple[pa.DeviceElement, ...] = ()
    device_label: Tuple[Any, ...] = ()
    shots_per_setting: int = DEFAULTS["shots_per_setting"]
    detector_efficiency: float = DEFAULTS["detector_efficiency"]
    seed: int = DEFAULTS["seed"]
    reference_vector: tomo.Reference = "auto"
    bootstrap_resamples: int = DEFAULTS["bootstrap_resamples"]

    def to_dict(self) -> dict:
        ref = self.reference_vector
        return {
            "input_state": self.input_label,
            "device": list(self.device_label),
            "shots_per_setting": self.shots_per_setting,
            "detector_efficiency": self.detector_efficiency,
            "seed": self.seed,
            "reference_vector": ref if isinstance(ref, str) else list(ref),
            "bootstrap_resamples": self.bootstrap_resamples,
        }


@dataclass(eq=False)
class RunReport:
    config: ExperimentConfig
    input_estimate: tomo.StateEstimate
    output_estimate: tomo.StateEstimate
    unitary: tomo.UnitaryEstimate
    theory: Optional[np.ndarray] = None
    fidelity: Optional[float] = None
    input_totals: Optional[np.ndarray] = None
    output_totals: Optional[np.ndarray] = None


# -- config parsing ---------------------------------------------------------


def _complex(value, path):
    if isinstance(value, bool):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, str):
        try:
            return complex(value.replace(" ", "").replace("i", "j"))
        except ValueError:
            raise ConfigError(f"{path}: cannot parse complex number {value!r}") from None
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(_real(value[0], f"{path}[0]"), _real(value[1], f"{path}[1]"))
    raise ConfigError(f"{path}: expected a number, a string like '1+2j' or [re, im]")


def _real(value, path):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a real number, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(f"{path}: must be finite")
    return float(value)


def _int(value, path):
    if isinstance(value, bool) or not isinstance(value, int):
        if isinstance(value, float) and value.is_integer():
            return int(value)
        raise ConfigError(f"{path}: expected an integer, got {value!r}")
    return value


def _matrix(value, path):
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigError(f"{path}: expected a 2x2 matrix (list of two rows)")
    rows = []
    for i, row in enumerate(value):
        if not isinstance(row, (list, tuple)) or len(row) != 2:
            raise ConfigError(f"{path}[{i}]: expected a row of two entries")
        rows.append([_complex(x, f"{path}[{i}][{j}]") for j, x in enumerate(row)])
    m = np.array(rows, dtype=complex)
    if not np.all(np.isfinite(m)):
        raise ConfigError(f"{path}: entries must be finite")
    return m


def _parse_input_state(value):
    path = "input_state"
    bell = None
    if isinstance(value, int) and not isinstance(value, bool):
        bell = value
    elif isinstance(value, str):
        parts = value.replace(":", " ").split()
        if len(parts) == 2 and parts[0].lower() == "bell" and parts[1].isdigit():
            bell = int(parts[1])
        else:
            raise ConfigError(f"{path}: expected 'bell <k>', got {value!r}")
    elif isinstance(value, dict):
        extra = set(value) - {"bell", "matrix"}
        if extra or len(value) != 1:
            raise ConfigError(f"{path}: expected exactly one of 'bell' or 'matrix'")
        if "bell" in value:
            bell = _int(value["bell"], f"{path}.bell")
        else:
            m = _matrix(value["matrix"], f"{path}.matrix")
            try:
                state = es.TwoQubitPureState.normalized(m)
            except ValueError as exc:
                raise ConfigError(f"{path}.matrix: {exc}") from None
            if not state.full_rank:
                raise ConfigError(
                    f"{path}.matrix: state is not full-rank (|det| = {abs(np.linalg.det(state.psi)):.3g}); "
                    "the input must be full-rank to be invertible"
                )
            return state, {"matrix": [[[z.real, z.imag] for z in row] for row in state.psi.tolist()]}
    else:
        raise ConfigError(f"{path}: expected a Bell index, 'bell <k>' or an object")
    if bell not in (0, 1, 2, 3):
        raise ConfigError(f"{path}.bell: Bell index must be 0..3, got {bell!r}")
    return es.bell_state(bell), {"bell": bell}


def _parse_device(value):
    if value is None:
        return (), ()
    if not isinstance(value, list):
        raise ConfigError("device: expected a list of elements")
    elements, labels = [], []
    for k, item in enumerate(value):
        path = f"device[{k}]"
        if not isinstance(item, dict):
            raise ConfigError(f"{path}: expected an object")
        if "matrix" in item:
            if set(item) != {"matrix"}:
                raise ConfigError(f"{path}: a matrix element takes no other fields")
            m = _matrix(item["matrix"], f"{path}.matrix")
            if not pa.is_unitary(m, 1e-9):
                raise ConfigError(f"{path}.matrix: element is not unitary")
            elements.append(tomo.nearest_unitary(m))
            labels.append({"matrix": [[[z.real, z.imag] for z in row] for row in m.tolist()]})
            continue
        if set(item) != {"phi_over_pi", "theta_over_pi"}:
            raise ConfigError(f"{path}: expected fields phi_over_pi and theta_over_pi (or matrix)")
        phi = _real(item["phi_over_pi"], f"{path}.phi_over_pi")
        theta = _real(item["theta_over_pi"], f"{path}.theta_over_pi")
        elements.append(pa.WavePlateSpec.from_pi_units(phi, theta))
        labels.append({"phi_over_pi": phi, "theta_over_pi": theta})
    return tuple(elements), tuple(labels)


def config_from_dict(doc: dict) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config: top level must be an object")
    unknown = set(doc) - CONFIG_KEYS
    if unknown:
        raise ConfigError(f"config: unknown field(s) {', '.join(sorted(unknown))}")
    if "input_state" not in doc:
        raise ConfigError("input_state: required field missing")
    state, label = _parse_input_state(doc["input_state"])
    device, device_label = _parse_device(doc.get("device"))
    merged = {**DEFAULTS, **{k: v for k, v in doc.items() if k in DEFAULTS}}
    shots = _int(merged["shots_per_setting"], "shots_per_setting")
    if shots < 0:
        raise ConfigError(f"shots_per_setting: must be >= 0, got {shots}")
    eff = _real(merged["detector_efficiency"], "detector_efficiency")
    if not 0.0 < eff <= 1.0:
        raise ConfigError(f"detector_efficiency: must be in (0, 1], got {eff}")
    seed = _int(merged["seed"], "seed")
    if not 0 <= seed < 2**64:
        raise ConfigError(f"seed: must be a non-negative 64-bit integer, got {seed}")
    ref = merged["reference_vector"]
    if isinstance(ref, str):
        if ref.lower() != "auto":
            raise ConfigError(f"reference_vector: expected 'auto' or [n, m], got {ref!r}")
        ref = "auto"
    else:
        try:
            ref = tomo._check_pair(ref, "reference_vector")
        except ValueError as exc:
            raise ConfigError(f"reference_vector: {exc}") from None
    resamples = _int(merged["bootstrap_resamples"], "bootstrap_resamples")
    if resamples == 1 or resamples < 0:
        raise ConfigError("bootstrap_resamples: must be 0 (disabled) or >= 2")
    return ExperimentConfig(state, label, device, device_label, shots, eff, seed, ref, resamples)


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a JSON experiment config, applying defaults."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: malformed JSON ({exc})") from None
    return config_from_dict(doc)


# -- pipeline ----------------------------------------------------------------


def simulate(config: ExperimentConfig) -> Tuple[ms.CountsTable, ms.CountsTable]:
    """Counts without the device (stream 0) and with it (stream 1)."""
    det = ms.DetectorModel(config.detector_efficiency)
    u = pa.compose_device(config.device)
    shots, seed = config.shots_per_setting, config.seed
    counts_in = ms.run_experiment(config.input_state, shots, det, seed, stream=0)
    out_state = es.apply_local(u, config.input_state)
    counts_out = ms.run_experiment(out_state, shots, det, seed, stream=1)
    return counts_in, counts_out


def reconstruct(
    config: ExperimentConfig,
    counts_in: ms.CountsTable,
    counts_out: ms.CountsTable,
    with_theory: bool = True,
) -> RunReport:
    try:
        est_in, est_out, est_u = tomo.estimate_unitary(counts_in, counts_out, config.reference_vector)
        if config.bootstrap_resamples >= 2:
            var = tomo.bootstrap_variances(
                counts_in,
                config.bootstrap_resamples,
                config.seed,
                output_counts=counts_out,
                reference=config.reference_vector,
            )
            est_u = tomo.with_variances(est_u, var)
    except tomo.TomographyError as exc:
        raise type(exc)(f"reconstruction failed: {exc}") from exc
    theory = fidelity = None
    if with_theory:
        u = pa.compose_device(config.device)
        theory, _ = tomo.fix_gauge(u, est_u.gauge_index)
        fidelity = tomo.gauge_fidelity(theory, est_u.u_hat)
    return RunReport(
        config, est_in, est_out, est_u, theory, fidelity, counts_in.totals(), counts_out.totals()
    )


def run_pipeline(config: ExperimentConfig) -> RunReport:
    """Simulate both datasets, reconstruct, and compare with the composed device."""
    counts_in, counts_out = simulate(config)
    return reconstruct(config, counts_in, counts_out)


# -- reporting ---------------------------------------------------------------


def _cplx(z) -> dict:
    return {"re": float(np.real(z)), "im": float(np.imag(z))}


def _state_dict(est: tomo.StateEstimate) -> dict:
    return {
        "reference": list(est.reference),
        "p_hat": est.p_hat,
        "elements": {f"{n}{m}": _cplx(est.psi_hat[n, m]) for n, m in ELEMENTS},
    }


def report_to_dict(report: RunReport) -> dict:
    u = report.unitary
    std = u.element_std
    elements = {}
    for n, m in ELEMENTS:
        e = _cplx(u.u_hat[n, m])
        e["std_re"] = None if std is None else float(std[n, m, 0])
        e["std_im"] = None if std is None else float(std[n, m, 1])
        elements[f"{n}{m}"] = e
    return {
        "schema": REPORT_SCHEMA,
        "config": report.config.to_dict(),
        "coincidences": {
            "input": None if report.input_totals is None else np.asarray(report.input_totals).tolist(),
            "output": None if report.output_totals is None else np.asarray(report.output_totals).tolist(),
        },
        "input_state": _state_dict(report.input_estimate),
        "output_state": _state_dict(report.output_estimate),
        "unitary": {
            "elements": elements,
            "unitary_projection": {f"{n}{m}": _cplx(u.u_unitary[n, m]) for n, m in ELEMENTS},
            "gauge_element": list(u.gauge_index),
            "gauge_note": u.gauge_note,
        },
        "theory": None
        if report.theory is None
        else {f"{n}{m}": _cplx(report.theory[n, m]) for n, m in ELEMENTS},
        "gauge_fidelity": report.fidelity,
    }


def matrix_from_report(section: dict) -> np.ndarray:
    """Rebuild a 2x2 matrix from a report section keyed ``'00'``..``'11'``."""
    m = np.zeros((2, 2), dtype=complex)
    for n, k in ELEMENTS:
        e = section[f"{n}{k}"]
        m[n, k] = complex(e["re"], e["im"])
    return m


def _num(x, width=10) -> str:
    return f"{x:>{width}.6f}" if x is not None else f"{'n/a':>{width}}"


def format_text(report: RunReport) -> str:
    d = report_to_dict(report)
    cfg = d["config"]
    lines = [
        "Pauli tomography of a single-qubit device",
        f"input state: {json.dumps(cfg['input_state'])}",
        f"device: {json.dumps(cfg['device'])}",
        f"shots/setting: {cfg['shots_per_setting']}  efficiency: {cfg['detector_efficiency']}  "
        f"seed: {cfg['seed']}  bootstrap resamples: {cfg['bootstrap_resamples']}",
        "",
    ]
    for name, key in (("input state (no device)", "input_state"), ("output state (with device)", "output_state")):
        s = d[key]
        r = s["reference"]
        lines.append(f"{name}: reference |{r[0]}{r[1]}>  p_hat = {s['p_hat']:.6f}")
        for el, v in s["elements"].items():
            lines.append(f"  psi{el} = {v['re']: .6f} {v['im']:+.6f}i")
    lines += ["", f"{'element':<8}{'part':<6}{'estimate':>10}{'std':>10}{'theory':>10}"]
    for el, v in d["unitary"]["elements"].items():
        th = d["theory"][el] if d["theory"] is not None else None
        for part in ("re", "im"):
            lines.append(
                f"U{el:<7}{part.capitalize():<6}{_num(v[part])}{_num(v['std_' + part])}"
                f"{_num(None if th is None else th[part])}"
            )
    lines += ["", d["unitary"]["gauge_note"]]
    if d["gauge_fidelity"] is not None:
        lines.append(f"gauge fidelity: {d['gauge_fidelity']:.6f}")
    return "\n".join(lines) + "\n"


def emit_report(report: RunReport, fmt: str = "text") -> str:
    if fmt == "text":
        return format_text(report)
    if fmt == "structured":
        return json.dumps(report_to_dict(report), indent=2, sort_keys=True) + "\n"
    raise ValueError(f"unknown report format {fmt!r}")


# -- entry point -------------------------------------------------------------


def _load_config(args) -> ExperimentConfig:
    path = args.config or os.environ.get(CONFIG_ENV)
    if not path:
        raise ConfigError(f"no config given (use --config or set {CONFIG_ENV})")
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    config = parse_config(text)
    overrides = {}
    if getattr(args, "seed", None) is not None:
        if args.seed < 0:
            raise ConfigError("--seed must be non-negative")
        overrides["seed"] = args.seed
    if getattr(args, "shots", None) is not None:
        if args.shots < 0:
            raise ConfigError("--shots must be non-negative")
        overrides["shots_per_setting"] = args.shots
    return replace(config, **overrides)


def _input_sibling(path: Path) -> Path:
    return path.with_name(f"{path.stem}-input{path.suffix or '.csv'}")


def _write(text: str, path: Optional[str]) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _read_counts(path: str) -> ms.CountsTable:
    try:
        return ms.CountsTable.from_csv(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read counts {path}: {exc.strerror}") from None
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="paulitomo", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, fmt=True):
        p.add_argument("--config", help=f"experiment config (JSON); default ${CONFIG_ENV}")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--shots", type=int, help="override shots per setting")
        if fmt:
            p.add_argument("--format", choices=("text", "structured"), default="text")
            p.add_argument("--output", "-o", help="write the report here instead of stdout")

    p = sub.add_parser("run", help="simulate both datasets and reconstruct the device")
    common(p)
    p.add_argument(
        "--dump-counts",
        metavar="PATH",
        help="write the with-device counts CSV to PATH and the bare-input counts to PATH-input",
    )

    p = sub.add_parser("simulate", help="emit a counts CSV")
    common(p, fmt=False)
    p.add_argument("--dataset", choices=("input", "output"), default="output",
                   help="bare input state or state after the device")
    p.add_argument("--out", help="CSV path (default stdout)")

    p = sub.add_parser("reconstruct", help="reconstruct the device from two counts CSVs")
    common(p)
    p.add_argument("--input-counts", required=True, help="counts without the device")
    p.add_argument("--output-counts", required=True, help="counts with the device")

    sub.add_parser("selftest", help="run the built-in consistency checks")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "selftest":
        return selftest()
    try:
        if args.command == "reconstruct":
            counts_in = _read_counts(args.input_counts)
            counts_out = _read_counts(args.output_counts)
            if args.config or os.environ.get(CONFIG_ENV):
                config, theory = _load_config(args), True
            else:
                # no config: nothing is known about the state or device that produced the data
                config = replace(
                    config_from_dict({"input_state": 1}),
                    input_label=None,
                    shots_per_setting=None,
                    detector_efficiency=None,
                )
                if args.seed is not None:
                    config = replace(config, seed=args.seed)
                theory = False
            report = reconstruct(config, counts_in, counts_out, with_theory=theory)
            _write(emit_report(report, args.format), args.output)
            return EXIT_OK

        config = _load_config(args)
        if args.command == "simulate":
            counts_in, counts_out = simulate(config)
            table = counts_in if args.dataset == "input" else counts_out
            _write(table.to_csv(), args.out)
            return EXIT_OK

        counts_in, counts_out = simulate(config)
        if args.dump_counts:
            path = Path(args.dump_counts)
            path.write_text(counts_out.to_csv())
            _input_sibling(path).write_text(counts_in.to_csv())
        report = reconstruct(config, counts_in, counts_out)
        _write(emit_report(report, args.format), args.output)
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except tomo.TomographyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RECONSTRUCTION


if __name__ == "__main__":
    sys.exit(main())
