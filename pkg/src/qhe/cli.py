"""Command-line entry points.

Exit codes: 0 success, 2 invalid input (including a request the server
rejected), 3 desk-scale guard exceeded, 4 a bound or consistency check
failed, 5 the network connection failed.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .backends import CapacityError, load_cipher, make_backend, trace_norm_distance
from .circuit import Circuit, CircuitError, apply_circuit, parse_circuit
from .net import ProtocolError, RemoteError, TransportError, client_delegate, serve
from .params import Gamma, SecretKey, keygen
from .reliability import (
    delta_validity_region,
    min_copies,
    reliability_report,
    sweep_csv,
)
from .scheme import SchemeError, decrypt, encrypt, evaluate, gate_counts
from .security import (
    audit_security,
    lemma4_bound,
    stirling_binomial_lower_bound,
    eps_bound,
)
from .states import InputBlock, as_density, preset_state

EXIT_OK, EXIT_INVALID, EXIT_GUARD, EXIT_VIOLATION, EXIT_TRANSPORT = 0, 2, 3, 4, 5


class BoundViolation(Exception):
    pass


def _gamma(args) -> Gamma:
    if not args.params:
        raise ValueError("--params is required")
    path = Path(args.params)
    text = path.read_text() if path.is_file() else args.params
    return Gamma.parse(text)


def _circuit(args, r: int) -> Circuit:
    if args.circuit is None:
        return Circuit((), r)
    path = Path(args.circuit)
    if path.is_file():
        return parse_circuit(path.read_text(), r)
    # inline text; ';' separates gates on one line
    return parse_circuit(args.circuit.replace(";", "\n"), r)


def _state(spec: str, r: int) -> np.ndarray:
    return as_density(preset_state(spec, r))


def _backend(args):
    opts = {}
    if args.backend == "oracle" and getattr(args, "samples", None):
        opts = {"mixture": "sample", "samples": args.samples, "seed": args.seed}
    return make_backend(args.backend, **opts)


def _meta(args, gamma: Optional[Gamma]) -> dict:
    return {
        "gamma": gamma.as_dict() if gamma else None,
        "seed": getattr(args, "seed", None),
        "backend": getattr(args, "backend", None),
        "version": __version__,
    }


def _matrix(rho: np.ndarray) -> list:
    return [[[float(v.real), float(v.imag)] for v in row] for row in np.asarray(rho)]


def _emit(args, doc: dict) -> None:
    if args.format == "json":
        text = json.dumps(doc, indent=2, sort_keys=True)
    else:
        lines = []
        width = max(len(k) for k in doc)
        for k, v in doc.items():
            if isinstance(v, (dict, list)):
                v = json.dumps(v, sort_keys=True)
            lines.append(f"{k.ljust(width)}  {v}")
        text = "\n".join(lines)
    if getattr(args, "report", None):
        Path(args.report).write_text(text + "\n")
    print(text)


def _result_doc(res) -> dict:
    return {
        "f": res.f,
        "counts": list(res.counts),
        "alpha": res.alpha,
        "probability": res.probability,
        "success_probability": res.success_probability,
        "rho_out": _matrix(res.rho_out),
    }


def cmd_keygen(args) -> int:
    gamma = _gamma(args)
    key = keygen(gamma, args.seed)
    if args.out:
        Path(args.out).write_text(key.to_json() + "\n")
    _emit(args, {**_meta(args, gamma), "perm": list(key.perm.images), "out": args.out})
    return EXIT_OK


def _load_key(args) -> SecretKey:
    if not args.key:
        raise ValueError("--key is required")
    return SecretKey.from_json(Path(args.key).read_text())


def cmd_encrypt(args) -> int:
    gamma = _gamma(args)
    key = _load_key(args)
    block = InputBlock(gamma, _state(args.state, gamma.r))
    ct = encrypt(key, block, _backend(args))
    Path(args.out).write_bytes(ct.to_bytes())
    _emit(args, {**_meta(args, gamma), "state": args.state, "out": args.out})
    return EXIT_OK


def cmd_evaluate(args) -> int:
    ct = load_cipher(Path(args.input).read_bytes())
    if args.params and _gamma(args) != ct.gamma:
        raise SchemeError("ciphertext parameters differ from --params")
    out = evaluate(_circuit(args, ct.gamma.r), ct)
    Path(args.out).write_bytes(out.to_bytes())
    args.backend = ct.backend
    _emit(args, {**_meta(args, ct.gamma), "out": args.out})
    return EXIT_OK


def cmd_decrypt(args) -> int:
    ct = load_cipher(Path(args.input).read_bytes())
    key = _load_key(args)
    res = decrypt(key, ct, mode=args.mode, rng=args.seed)
    args.backend = ct.backend
    _emit(args, {**_meta(args, ct.gamma), **_result_doc(res)})
    return EXIT_OK


def _roundtrip_doc(args, gamma, key, block, circuit, res, timings) -> dict:
    ideal = apply_circuit(circuit, block.rho)
    return {
        **_meta(args, gamma),
        "state": args.state,
        "circuit_depth": circuit.d,
        **_result_doc(res),
        "distance_to_ideal": trace_norm_distance(res.rho_out, ideal),
        "timings": timings,
    }


def cmd_roundtrip(args) -> int:
    gamma = _gamma(args)
    circuit = _circuit(args, gamma.r)
    key = keygen(gamma, args.seed)
    block = InputBlock(gamma, _state(args.state, gamma.r))
    backend = _backend(args)
    timings = {}
    t0 = time.perf_counter()
    ct = encrypt(key, block, backend)
    timings["encrypt"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    ct = evaluate(circuit, ct)
    timings["evaluate"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    res = decrypt(key, ct, mode=args.mode, rng=args.seed)
    timings["decrypt"] = time.perf_counter() - t0
    _emit(args, _roundtrip_doc(args, gamma, key, block, circuit, res, timings))
    return EXIT_OK


def _audit_inputs(spec: str, p: int) -> tuple[np.ndarray, np.ndarray]:
    parts = spec.split(",")
    if len(parts) != 2:
        raise ValueError("--inputs takes two state presets separated by a comma")
    return _state(parts[0], p), _state(parts[1], p)


def cmd_audit_security(args) -> int:
    if args.grid:
        p, n, m = (int(v) for v in args.grid.split(","))
        gamma = None
    else:
        gamma = _gamma(args)
        p, n, m = gamma.p, gamma.n, gamma.m
    tau, tau2 = _audit_inputs(args.inputs, p)
    report = audit_security(tau, tau2, n, m, inputs=args.inputs, method=args.method)
    _emit(args, {**_meta(args, gamma), **report.to_dict()})
    if not report.passed:
        raise BoundViolation("exact distance exceeds the pairwise bound")
    return EXIT_OK


def cmd_audit_reliability(args) -> int:
    if args.params:
        gamma = _gamma(args)
        b, t = gamma.b, gamma.t
    else:
        gamma, b, t = None, args.b, args.t
    if b is None or t is None:
        raise ValueError("give --params or both --b and --t")
    rep = reliability_report(b, t, args.target, args.trials or None, args.seed)
    doc = {**_meta(args, gamma), **rep.to_dict()}
    if t >= 1:
        mc = min_copies(t, 0.5)
        doc["delta_covers_exact"] = rep.exact_failure <= rep.theorem_delta
        doc["delta_checked_region"] = f"b >= {mc}"
    _emit(args, doc)
    if not rep.consistent:
        raise BoundViolation("Monte Carlo rate is more than 3 standard errors from the exact rate")
    if t >= 1 and b >= min_copies(t, 0.5) and rep.exact_failure > rep.theorem_delta:
        raise BoundViolation("closed-form failure bound is below the exact failure rate")
    return EXIT_OK


def _int_range(text: str) -> list[int]:
    if ".." in text:
        lo, hi = text.split("..")
        return list(range(int(lo), int(hi) + 1))
    return [int(v) for v in text.split(",")]


def cmd_bounds(args) -> int:
    if args.kind == "reliability":
        text = sweep_csv(_int_range(args.t_values), _int_range(args.b_values))
        if args.out:
            Path(args.out).write_text(text)
        print(text, end="")
        return EXIT_OK
    rows, bad = [], 0
    for p in _int_range(args.p_values):
        for n in _int_range(args.n_values):
            for m in _int_range(args.m_values):
                l4, eps = lemma4_bound(p, n, m), eps_bound(p, n, m)
                st, binom = stirling_binomial_lower_bound(n, m), math.comb(n + m, m)
                ok = l4 <= eps and st <= binom
                bad += not ok
                rows.append(f"{p},{n},{m},{l4:.12g},{eps:.12g},{st:.12g},{binom},{ok}")
    text = "p,n,m,lemma4,theorem_eps,stirling,binomial,ok\n" + "\n".join(rows) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    print(text, end="")
    if bad:
        raise BoundViolation(f"{bad} grid points break the bound chain")
    return EXIT_OK


def cmd_demo(args) -> int:
    if not args.params:
        args.params = "1,1,1,5,1"
    if args.circuit is None:
        args.circuit = "H 0;T 0;H 0"
    gamma = _gamma(args)
    doc = {**_meta(args, gamma), "gate_counts": gate_counts(gamma),
           "delta_region_t1": delta_validity_region([1], 40)[1][:5]}
    circuit = _circuit(args, gamma.r)
    key = keygen(gamma, args.seed)
    block = InputBlock(gamma, _state(args.state, gamma.r))
    res = decrypt(key, evaluate(circuit, encrypt(key, block, _backend(args))))
    doc["roundtrip"] = {
        "f": res.f,
        "success_probability": res.success_probability,
        "distance_to_ideal": trace_norm_distance(res.rho_out, apply_circuit(circuit, block.rho)),
    }
    _emit(args, doc)
    return EXIT_OK


def cmd_serve(args) -> int:
    serve(args.listen, args.max_payload)
    return EXIT_OK


def cmd_delegate(args) -> int:
    gamma = _gamma(args)
    circuit = _circuit(args, gamma.r)
    key = _load_key(args) if args.key else keygen(gamma, args.seed)
    block = InputBlock(gamma, _state(args.state, gamma.r))
    res = client_delegate(args.server, key, block, circuit, _backend(args), mode=args.mode,
                          rng=args.seed, max_payload=args.max_payload)
    _emit(args, _roundtrip_doc(args, gamma, key, block, circuit, res, {}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--params", help="parameter file or inline b,r,t,n,m")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--format", choices=("json", "table"), default="json")
    common.add_argument("--report", help="also write the printed report to this file")

    run = argparse.ArgumentParser(add_help=False)
    run.add_argument("--backend", choices=("oracle", "pauli"), default="pauli")
    run.add_argument("--samples", type=int, help="dense oracle: sample ancilla assignments")
    run.add_argument("--state", default="zero", help="zero, one, plus, ghz or random:<seed>")
    run.add_argument("--circuit", help="circuit file, or inline gates separated by ';'")
    run.add_argument("--mode", choices=("exact", "sample"), default="exact")

    parser = argparse.ArgumentParser(prog="qhe", description="Permutation-keyed quantum homomorphic encryption")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("keygen", parents=[common])
    p.add_argument("--out")
    p.set_defaults(func=cmd_keygen, backend=None)

    p = sub.add_parser("encrypt", parents=[common, run])
    p.add_argument("--key", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_encrypt)

    p = sub.add_parser("evaluate", parents=[common])
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--circuit")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate, backend=None)

    p = sub.add_parser("decrypt", parents=[common])
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--key", required=True)
    p.add_argument("--mode", choices=("exact", "sample"), default="exact")
    p.set_defaults(func=cmd_decrypt, backend=None)

    p = sub.add_parser("roundtrip", parents=[common, run])
    p.set_defaults(func=cmd_roundtrip)

    p = sub.add_parser("audit-security", parents=[common])
    p.add_argument("--grid", help="p,n,m directly (any code length), instead of --params")
    p.add_argument("--inputs", default="zero,one", help="two state presets on p qubits")
    p.add_argument("--method", choices=("subset", "direct"), default="subset")
    p.set_defaults(func=cmd_audit_security, backend=None)

    p = sub.add_parser("audit-reliability", parents=[common])
    p.add_argument("--b", type=int)
    p.add_argument("--t", type=int)
    p.add_argument("--target", type=float)
    p.add_argument("--trials", type=int, default=0)
    p.set_defaults(func=cmd_audit_reliability, backend=None)

    p = sub.add_parser("bounds", parents=[common])
    p.add_argument("--kind", choices=("reliability", "security"), default="reliability")
    p.add_argument("--t-values", default="1..4")
    p.add_argument("--b-values", default="1..30")
    p.add_argument("--p-values", default="1..4")
    p.add_argument("--n-values", default="5,9,13")
    p.add_argument("--m-values", default="1..13")
    p.add_argument("--out")
    p.set_defaults(func=cmd_bounds, backend=None)

    p = sub.add_parser("demo", parents=[common, run])
    p.set_defaults(func=cmd_demo, state="plus")

    p = sub.add_parser("serve", parents=[common])
    p.add_argument("--listen", default="127.0.0.1:7878")
    p.add_argument("--max-payload", type=int, default=64 << 20)
    p.set_defaults(func=cmd_serve, backend=None)

    p = sub.add_parser("delegate", parents=[common, run])
    p.add_argument("--server", required=True)
    p.add_argument("--key")
    p.add_argument("--max-payload", type=int, default=64 << 20)
    p.set_defaults(func=cmd_delegate)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CapacityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except BoundViolation as exc:
        print(f"violation: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    except TransportError as exc:
        print(f"transport error: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    except (RemoteError, ProtocolError) as exc:
        print(f"server error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ValueError, CircuitError, SchemeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
