"""Command-line driver: catalog, anomaly, steady, observe, verify, reproduce."""
from __future__ import annotations

import argparse
import csv
import inspect
import io
import json
import sys
from dataclasses import dataclass, field
from fractions import Fraction

from . import claims, models, observables
from .anomaly import AnomalyError, cocycle, indicator, indicator_exponent, is_trivial_class
from .lindblad import apply_symbolic_state, operator_from_json, steady_states
from .models import ModelError, ModelId
from .pauli import OperatorSum, SizeCapError, format_coeff
from .phasepoly import Region

SUBCOMMANDS = ("catalog", "anomaly", "steady", "observe", "verify", "reproduce")
RATE_KEYS = ("r", "J", "lam", "J1", "J2")
# numeric solves above this chain length go through superoperator symmetry blocks
BLOCK_SPLIT_L = 8


class UsageError(ValueError):
    pass


@dataclass
class RunConfig:
    subcommand: str
    model: str | None = None
    L: int | None = None
    Lx: int | None = None
    Ly: int | None = None
    bc: str = "pbc"
    sector: str | None = None
    rates: dict = field(default_factory=dict)
    fmt: str | None = None
    out: str | None = None
    seed: int = 0
    q: list = field(default_factory=list)
    claim: str | None = None
    state: str | None = None
    observables: list = field(default_factory=list)
    connected: list = field(default_factory=list)
    strings: list = field(default_factory=list)
    renyi2: bool = False

    @property
    def format(self) -> str:
        if self.fmt:
            return self.fmt
        return "text" if self.subcommand == "reproduce" else "json"

    def model_id(self) -> ModelId:
        if self.model is None:
            raise UsageError(f"{self.subcommand} needs --model")
        kw = {"name": self.model, "bc": self.bc, **self.rates}
        for k in ("L", "Lx", "Ly"):
            if getattr(self, k) is not None:
                kw[k] = getattr(self, k)
        return ModelId(**kw)


def parse_rates(text: str | None) -> dict:
    """'r=2,J=1/2' -> {'r': Fraction(2), 'J': Fraction(1, 2)}."""
    if not text:
        return {}
    out = {}
    for item in text.split(","):
        key, sep, val = item.partition("=")
        key = key.strip()
        if not sep or key not in RATE_KEYS:
            raise UsageError(f"bad --rates entry {item!r}; use key=value with keys {', '.join(RATE_KEYS)}")
        try:
            out[key] = Fraction(val.strip())
        except (ValueError, ZeroDivisionError) as e:
            raise UsageError(f"bad rate value {val!r}") from e
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model", choices=models.MODEL_NAMES)
    common.add_argument("--L", type=int)
    common.add_argument("--Lx", type=int)
    common.add_argument("--Ly", type=int)
    common.add_argument("--bc", choices=("pbc", "obc"), default="pbc")
    common.add_argument("--sector", help="strong-symmetry sector value, or 'all'")
    common.add_argument("--rates", help="couplings and rates, e.g. r=2,J=1/2")
    common.add_argument("--format", dest="fmt", choices=("json", "csv", "text"))
    common.add_argument("--out", help="write output here instead of stdout")
    common.add_argument("--seed", type=int, default=0)

    p = argparse.ArgumentParser(prog="mixanom", description="Mixed-state anomaly toolkit")
    sub = p.add_subparsers(dest="subcommand", metavar="{" + ",".join(SUBCOMMANDS) + "}")
    sub.add_parser("catalog", parents=[common], help="list model ids and parameters")
    sub.add_parser("anomaly", parents=[common], help="cocycle table, indicator and triviality verdict")
    sub.add_parser("steady", parents=[common], help="numeric steady states per sector")
    obs = sub.add_parser("observe", parents=[common], help="correlators in the closed-form steady state")
    obs.add_argument("--observable", action="append", default=[], metavar="WORD",
                     help="Pauli word such as 'Z1 Z6' (repeatable)")
    obs.add_argument("--connected", action="append", nargs=2, default=[], metavar=("A", "B"))
    obs.add_argument("--string", action="append", nargs=2, type=int, default=[], metavar=("J", "K"),
                     help="cluster string order between cells J and K")
    obs.add_argument("--renyi2", action="store_true", help="largest boundary Renyi-2 correlator")
    ver = sub.add_parser("verify", parents=[common], help="check a state is annihilated by the Lindbladian")
    ver.add_argument("--state", help="JSON file with {sites, terms} (or a list of them)")
    rep = sub.add_parser("reproduce", parents=[common], help="run a named acceptance check")
    rep.add_argument("claim", help="claim id or 'all'")
    rep.add_argument("--q", action="append", type=Fraction, default=[], help="charge sectors (repeatable)")
    return p


def _config(ns: argparse.Namespace) -> RunConfig:
    return RunConfig(
        subcommand=ns.subcommand, model=ns.model, L=ns.L, Lx=ns.Lx, Ly=ns.Ly, bc=ns.bc,
        sector=ns.sector, rates=parse_rates(ns.rates), fmt=ns.fmt, out=ns.out, seed=ns.seed,
        q=getattr(ns, "q", []), claim=getattr(ns, "claim", None), state=getattr(ns, "state", None),
        observables=getattr(ns, "observable", []), connected=getattr(ns, "connected", []),
        strings=getattr(ns, "string", []), renyi2=getattr(ns, "renyi2", False))


# output

def _dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _csv(header: list, rows: list) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


# subcommands

def run_catalog(cfg: RunConfig) -> tuple[int, object, str]:
    rows = models.catalog()
    text = _csv(["model", "parameters", "description"],
                [[r["model"], " ".join(r["parameters"]), r["description"]] for r in rows])
    return 0, {"models": rows}, text


def _sectors(mid: ModelId, sector: str | None) -> list:
    if sector not in (None, "all"):
        return [Fraction(sector)]
    if sector is None:
        return [None]
    if mid.name == "example1":
        return models.valid_charges(mid)
    return [Fraction(1), Fraction(-1)]


def run_anomaly(cfg: RunConfig) -> tuple[int, object, str]:
    mid = cfg.model_id()
    group, region, (a, b) = models.anomaly_setup(mid)
    table = cocycle(group, region)
    trivial, witness = is_trivial_class(table)
    data = {
        "model": mid.params(),
        "group": {"elements": list(group.elements), "strong": list(group.strong), "weak": list(group.weak)},
        "region": {"sites": list(region.sites),
                   "boundary": {k: sorted(v) for k, v in sorted(region.boundary_components.items())}},
        "modulus": table.modulus,
        "cocycle": {",".join(k): v for k, v in sorted(table.values.items())},
        "indicator": {"pair": [a, b], "exponent": indicator_exponent(table, a, b),
                      "value": _phase_text(indicator(table, a, b))},
        "verdict": "trivial" if trivial else "nontrivial",
    }
    if witness is not None:
        data["witness"] = {name: {",".join(k): v for k, v in sorted(w.items())} for name, w in witness.items()}
    rows = [[*k, v] for k, v in sorted(table.values.items())]
    text = _csv(["g1", "g2", "g3", "exponent"], rows)
    return 0, data, text


def _phase_text(z: complex) -> str:
    re_, im_ = round(z.real, 12) + 0.0, round(z.imag, 12) + 0.0
    if im_ == 0:
        return f"{re_:g}"
    return f"{re_:g}{'+' if im_ >= 0 else '-'}{abs(im_):g}i"


def run_steady(cfg: RunConfig) -> tuple[int, object, str]:
    mid = cfg.model_id()
    if not mid.is_chain:
        return _symbolic_steady(mid, cfg)
    model = models.build_model(mid)
    superops = models.superop_symmetries(mid, model) if mid.L >= BLOCK_SPLIT_L else ()
    out, rows = [], []
    for s in _sectors(mid, cfg.sector):
        spec = models.sector_spec(mid, s)
        res = steady_states(model, spec, superops=superops)
        label = spec[0].label
        states = [st.to_text() for st in res.states]
        out.append({"sector": label, "degeneracy": res.degeneracy, "status": res.status,
                    "sector_dim": res.sector_dim, "states": states})
        for i, st in enumerate(states):
            rows.extend([label, i, w, c] for w, c in st.items())
    data = {"model": mid.params(), "sectors": out}
    return 0, data, _csv(["sector", "state", "pauli", "coefficient"], rows)


def _symbolic_steady(mid: ModelId, cfg: RunConfig) -> tuple[int, object, str]:
    # 2+1D models: closed forms checked symbolically, no numeric solve
    model = models.build_model(mid)
    out, ok = [], True
    for s in _sectors(mid, cfg.sector if cfg.sector != "all" else None):
        states = models.closed_form_steady(mid, s, verify=False)
        zero = all(apply_symbolic_state(model, st).is_zero() for st in states)
        ok &= zero
        out.append({"sector": "+1" if s is None else str(s), "degeneracy": len(states),
                    "form": "U(CCZ) rho_trivial U(CCZ)^dagger", "annihilated": zero})
    data = {"model": mid.params(), "sectors": out, "numeric": False}
    rows = [[d["sector"], d["degeneracy"], d["annihilated"]] for d in out]
    return (0 if ok else 1), data, _csv(["sector", "degeneracy", "annihilated"], rows)


def run_observe(cfg: RunConfig) -> tuple[int, object, str]:
    mid = cfg.model_id()
    if not mid.is_chain:
        raise UsageError("observe works on chain models")
    rho = models.symmetric_steady(mid, None if cfg.sector is None else Fraction(cfg.sector))
    sites = rho.sites
    sector = cfg.sector or "default"
    rows = []
    for w in cfg.observables:
        rows.append((w, observables.expectation(rho, OperatorSum.word(sites, w)), None, sector))
    for a, b in cfg.connected:
        rep = observables.connected_correlator(rho, OperatorSum.word(sites, a), OperatorSum.word(sites, b))
        rows.append((f"{a};{b}", rep.value, rep.connected, sector))
    for j, k in cfg.strings:
        rows.append((f"string({j},{k})", observables.string_order(rho, j, k), None, sector))
    if cfg.renyi2:
        group = models.chain_group(mid.name, mid.L, "obc")
        region = Region.interval(1, mid.L)
        key, rep = observables.boundary_renyi2(rho, group, region)
        rows.append((f"renyi2({key[0]},{key[1]})", rep.value, rep.connected, sector))
    if not rows:
        raise UsageError("observe needs --observable, --connected, --string or --renyi2")
    data = {"model": mid.params(), "sector": sector, "observables": [
        {"observable": n, "value": format_coeff(v),
         "connected": None if c is None else format_coeff(c)} for n, v, c, _ in rows]}
    return 0, data, observables.write_csv(rows)


def run_verify(cfg: RunConfig) -> tuple[int, object, str]:
    mid = cfg.model_id()
    model = models.build_model(mid)
    if cfg.state:
        with open(cfg.state) as fh:
            raw = json.load(fh)
        states = [operator_from_json(d) for d in (raw if isinstance(raw, list) else [raw])]
        source = cfg.state
    else:
        states = models.closed_form_steady(mid, None if cfg.sector is None else Fraction(cfg.sector), verify=False)
        source = "closed form"
    results = []
    for st in states:
        res = apply_symbolic_state(model, st)
        results.append({"annihilated": res.is_zero(),
                        "residual_terms": len(res) if isinstance(res, OperatorSum) else None})
    ok = all(r["annihilated"] for r in results)
    data = {"model": mid.params(), "source": source, "states": results, "passed": ok}
    rows = [[i, r["annihilated"], r["residual_terms"]] for i, r in enumerate(results)]
    return (0 if ok else 1), data, _csv(["state", "annihilated", "residual_terms"], rows)


def _claim_kwargs(fn, cfg: RunConfig) -> dict:
    params = inspect.signature(fn).parameters
    kw = {}
    if cfg.L is not None and "L" in params:
        kw["L"] = cfg.L
    if cfg.q and "qs" in params:
        kw["qs"] = tuple(cfg.q)
    if "seed" in params:
        kw["seed"] = cfg.seed
    if cfg.Lx is not None and cfg.Ly is not None and "dims" in params:
        kw["dims"] = (cfg.Lx, cfg.Ly)
    return kw


def run_reproduce(cfg: RunConfig) -> tuple[int, object, str]:
    ids = list(claims.CLAIMS) if cfg.claim == "all" else [cfg.claim]
    if any(c not in claims.CLAIMS for c in ids):
        raise UsageError(f"unknown claim id {cfg.claim!r}; choose from all, {', '.join(claims.CLAIMS)}")
    results = []
    for cid in ids:
        fn = claims.CLAIMS[cid]
        results.append(fn(**_claim_kwargs(fn, cfg)))
    ok = all(r.passed for r in results)
    data = {"claims": [{**r.to_json(), "status": "PASS" if r.passed else "FAIL"} for r in results],
            "passed": ok}
    if cfg.format == "csv":
        text = _csv(["claim", "status", "values"],
                    [[r.claim, "PASS" if r.passed else "FAIL", json.dumps(r.values, sort_keys=True)] for r in results])
    else:
        text = "".join(f"{r.line()} {json.dumps(r.values, sort_keys=True)}\n" for r in results)
    return (0 if ok else 1), data, text


RUNNERS = {"catalog": run_catalog, "anomaly": run_anomaly, "steady": run_steady,
           "observe": run_observe, "verify": run_verify, "reproduce": run_reproduce}


def dispatch(argv: list[str] | None = None, stdout=None) -> int:
    """Run one subcommand; returns the exit code (0 pass, 1 failed check, 2 usage)."""
    stdout = stdout or sys.stdout
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    if ns.subcommand is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        cfg = _config(ns)
        code, data, table = RUNNERS[cfg.subcommand](cfg)
    except (UsageError, ModelError) as e:
        parser.print_usage(sys.stderr)
        print(f"mixanom: error: {e}", file=sys.stderr)
        return 2
    except (AnomalyError, SizeCapError, RuntimeError, ValueError) as e:
        print(f"mixanom: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    text = _dump_json(data) if cfg.format == "json" else table
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text)
    else:
        stdout.write(text)
    return code


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
