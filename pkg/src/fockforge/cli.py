"""Command-line front end.

Exit codes: 0 on success, 2 for invalid input (device files, arguments),
3 for numerical failures.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time

import numpy as np

from . import measurement as meas
from .circuit import haar_unitary
from .cores import BasisSpec, amplitude, transform
from .device import ensemble, load_device, project_run, run_state
from .errors import (DimensionError, ElementError, EncodingError, FockForgeError,
                     GainError, NormalizationError, SamplerError, ValidationError)
from .losses import dilate_circuit, pad_state
from .samplers import SampleConfig, histogram, sample
from .state import State

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 2, 3
PRECISION = 9


def _basis(text: str | None):
    if text is None or text in ("full", "restricted"):
        return BasisSpec(text or "full")
    if text.startswith("file="):
        with open(text[5:]) as fh:
            body = fh.read()
        if body.lstrip().startswith("["):
            rows = [r["ket"] if isinstance(r, dict) else r for r in json.loads(body)]
        else:
            rows = [line.replace(",", " ").split() for line in body.splitlines() if line.strip()]
        return BasisSpec.user([[int(x) for x in r] for r in rows])
    raise ValidationError(f"--basis must be full, restricted or file=PATH, got {text!r}")


def _ket(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.replace(" ", "").split(","))
    except ValueError:
        raise ValidationError(f"cannot parse ket {text!r}") from None


def _emit(args, text: str, suffix: str) -> None:
    if args.out:
        path = f"{args.out}{suffix}"
        with open(path, "w") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _state_record(st: State) -> dict:
    rec = {"nmodes": st.nmodes, "terms": st.to_records(PRECISION)}
    if st.labels is not None:
        rec["modes"] = [list(lab)[:3] for lab in st.labels]
    return rec


def _bins_text(bins: meas.ProbabilityBins, fmt: str) -> str:
    if fmt == "json":
        return json.dumps({"labels": bins.header(), "bins": bins.to_records(PRECISION)}, indent=2)
    return bins.to_csv(PRECISION)


# ---------------------------------------------------------------------------
# commands


def cmd_validate(args) -> int:
    dev = load_device(args.device)
    dev.circuit()
    dev.input(np.random.default_rng(0))
    print(f"ok: {dev!r}")
    return EXIT_OK


def cmd_run(args) -> int:
    dev = load_device(args.device)
    rng = np.random.default_rng(args.seed)
    losses = args.losses == "on"
    raw, circ = run_state(dev, args.core, _basis(args.basis), rng, losses)
    states = [raw] if args.keep_loss_modes else project_run(raw, circ)
    success = sum(st.norm2() for st in states)
    if len(states) == 1:
        payload = _state_record(states[0])
    else:
        payload = [_state_record(st) for st in states]
    bins = meas.detection_pipeline(raw, circ, rng, args.runs)
    print(f"success probability: {success:.{PRECISION}f}")
    if args.format == "json":
        _emit(args, json.dumps({"success_probability": round(success, PRECISION),
                                "state": payload,
                                "bins": bins.to_records(PRECISION)}, indent=2), ".json")
    else:
        _emit(args, json.dumps(payload, indent=2), ".state.json")
        _emit(args, _bins_text(bins, "csv"), ".bins.csv")
    return EXIT_OK


def cmd_amp(args) -> int:
    dev = load_device(args.device)
    circ = dev.circuit()
    inp = dev.input(np.random.default_rng(args.seed))
    if len(inp) != 1:
        raise ValidationError("amp needs a single-ket input")
    (ket_in, coeff), = inp.items()
    out = _ket(args.ket)
    U = circ.U
    if circ.is_lossy and args.losses == "on":
        U = dilate_circuit(circ).U2n
        ket_in = ket_in + (0,) * circ.nmodes
        if len(out) == circ.nmodes:
            out = out + (0,) * circ.nmodes
    if len(out) != len(ket_in):
        raise DimensionError(f"output ket needs {len(ket_in)} modes")
    a = coeff * amplitude(ket_in, out, U)
    if args.format == "json":
        print(json.dumps({"ket": list(out), "re": round(a.real, PRECISION),
                          "im": round(a.imag, PRECISION),
                          "p": round(abs(a) ** 2, PRECISION)}))
    else:
        print(f"{a.real:.{PRECISION}f} {a.imag:+.{PRECISION}f}j  p={abs(a) ** 2:.{PRECISION}f}")
    return EXIT_OK


def cmd_sample(args) -> int:
    dev = load_device(args.device)
    circ = dev.circuit()
    inp = dev.input(np.random.default_rng(args.seed))
    if len(inp) != 1:
        raise ValidationError("sampling needs a single-ket input")
    (ket, _), = inp.items()
    U = circ.U
    lossy = circ.is_lossy and args.losses == "on"
    if lossy:
        U = dilate_circuit(circ).U2n
        ket = pad_state(inp).kets()[0]
    cfg = SampleConfig(args.n, args.seed, args.burn_in, args.thinning)
    samples = sample(ket, U, cfg, args.method)
    raw = meas.ProbabilityBins(meas._mode_labels(circ, lossy), polarized=circ.polarized)
    for k, c in histogram(samples).items():
        raw.add(k, c)
    counts = meas.relabel(meas.post_select(raw, circ), circ)
    lines = ["ket,count,frequency"]
    for k, c in counts.sorted_items():
        lines.append(f"\"{' '.join(map(str, k))}\",{int(round(c))},{c / args.n:.{PRECISION}f}")
    _emit(args, "\n".join(lines), ".samples.csv")
    return EXIT_OK


def cmd_ensemble(args) -> int:
    dev = load_device(args.device)
    dm = ensemble(dev, args.runs, args.seed, args.core, _basis(args.basis),
                  args.losses == "on")
    if args.format == "json":
        kets, rho = dm.reduced(args.min_weight, args.normalize)
        text = json.dumps({
            "runs": dm.runs,
            "labels": [dm.ket_text(k) for k in kets],
            "kets": [list(k) for k in kets],
            "re": np.round(rho.real, PRECISION).tolist(),
            "im": np.round(rho.imag, PRECISION).tolist(),
        }, indent=2)
    else:
        text = dm.format(args.min_weight, decimals=4, normalize=args.normalize)
    _emit(args, text, ".dm" + (".json" if args.format == "json" else ".txt"))
    return EXIT_OK


def _grid(text: str) -> list[tuple[int, int]]:
    rows = []
    for part in text.split(";"):
        if part.strip():
            n, m = (int(x) for x in part.split(","))
            rows.append((n, m))
    return rows


def cmd_bench(args) -> int:
    rng = np.random.default_rng(args.seed)
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["task", "core", "basis", "photons", "modes", "seconds"])
    for n, m in _grid(args.grid):
        U = haar_unitary(m, rng)
        st = State.basis([1] * n + [0] * (m - n))
        for core in args.cores.split(","):
            for basis in ("full", "restricted"):
                t0 = time.perf_counter()
                transform(st, U, core, basis)
                writer.writerow(["distribution", core, basis, n, m,
                                 f"{time.perf_counter() - t0:.6f}"])
    for n, m in _grid(args.amp):
        U = haar_unitary(m, rng)
        ket = tuple([1] * n + [0] * (m - n))
        t0 = time.perf_counter()
        amplitude(ket, ket, U)
        writer.writerow(["amplitude", "glynn", "-", n, m, f"{time.perf_counter() - t0:.6f}"])
    _emit(args, out.getvalue(), ".bench.csv")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fockforge", description="Linear-optics circuit simulator")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, device=True):
        if device:
            sp.add_argument("device", help="device JSON file")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--format", choices=("json", "csv"), default="csv")
        sp.add_argument("--out", default=None, help="output path prefix")

    def sim_opts(sp):
        sp.add_argument("--core", choices=("glynn", "direct"), default="glynn")
        sp.add_argument("--basis", default="full", help="full, restricted or file=PATH")
        sp.add_argument("--losses", choices=("on", "off"), default="on")

    sp = sub.add_parser("run", help="simulate a device and print states and bins")
    common(sp)
    sim_opts(sp)
    sp.add_argument("--runs", type=int, default=100_000,
                    help="sampled runs for dark counts / dead time")
    sp.add_argument("--keep-loss-modes", action="store_true")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("amp", help="single output amplitude")
    common(sp)
    sp.add_argument("--ket", required=True, help="output ket, comma separated")
    sp.add_argument("--losses", choices=("on", "off"), default="on")
    sp.set_defaults(func=cmd_amp)

    sp = sub.add_parser("sample", help="draw output samples")
    common(sp)
    sp.add_argument("--n", type=int, default=10_000)
    sp.add_argument("--method", choices=("clifford", "metropolis"), default="clifford")
    sp.add_argument("--burn-in", type=int, default=1000)
    sp.add_argument("--thinning", type=int, default=10)
    sp.add_argument("--losses", choices=("on", "off"), default="on")
    sp.set_defaults(func=cmd_sample)

    sp = sub.add_parser("ensemble", help="accumulate a density matrix over runs")
    common(sp)
    sim_opts(sp)
    sp.add_argument("--runs", type=int, default=1000)
    sp.add_argument("--normalize", choices=("trace", "runs"), default="trace")
    sp.add_argument("--min-weight", type=float, default=0.0,
                    help="hide rows with relative weight below this")
    sp.set_defaults(func=cmd_ensemble)

    sp = sub.add_parser("bench", help="time random-unitary circuits")
    common(sp, device=False)
    sp.add_argument("--grid", default="2,4;3,6;4,8;5,10;6,12",
                    help="photons,modes pairs separated by ';'")
    sp.add_argument("--amp", default="", help="photons,modes pairs for single amplitudes")
    sp.add_argument("--cores", default="glynn,direct")
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("validate", help="check a device file")
    sp.add_argument("device")
    sp.set_defaults(func=cmd_validate)
    return p


_INVALID = (ValidationError, ElementError, DimensionError, EncodingError,
            FileNotFoundError, json.JSONDecodeError, KeyError, TypeError, ValueError)
_NUMERIC = (NormalizationError, GainError, SamplerError, FloatingPointError,
            ZeroDivisionError, OverflowError)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _NUMERIC as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except _INVALID as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except FockForgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
