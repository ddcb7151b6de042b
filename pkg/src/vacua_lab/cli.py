"""vacua-lab: table-emitting commands over the library.

Every command builds a Report (column names, rows, JSON payload) and prints it
as TSV or JSON.  Output depends only on the resolved configuration.  Failures
print a JSON error object on stderr and exit with
2 (configuration), 3 (invariant violation) or 4 (stabilization failure).
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence

from .affine_module import build_truncated_module, max_cutoff, pairing, virasoro_defect, measure_central_charge
from .exact import fstr
from .lie_core import UnsupportedAlgebra, conformal_weight, dagger, label_set, parse_algebra
from .vacua_p1 import PointedSphere, StabilizationError, fusion_dim, fusion_oracle, max_truncation, vacua_basis

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INVARIANT = 3
EXIT_STABILIZATION = 4

FORMATS = ("tsv", "json")

DEFAULTS: Dict[str, Any] = {
    "algebra": "A1",
    "level": 1,
    "format": "tsv",
    "seed": 0,
    "jobs": 1,
    "cutoff": 4,
    "max_degree": 4,
    "genus": 0,
    "labels": None,
    "label": None,
    "points": None,
    "abelian": False,
    "range": 2,
    "charge": 0,
    "order": "canonical",
    "random": 0,
    "lagrangians": None,
    "first": None,
    "second": None,
}


class ConfigError(ValueError):
    pass


class InvariantViolation(AssertionError):
    def __init__(self, message: str, details: Optional[dict] = None):
        super().__init__(message)
        self.details = details or {}


@dataclass
class Report:
    columns: List[str]
    rows: List[List[Any]]
    payload: Dict[str, Any] = field(default_factory=dict)


@dataclass
class RunConfig:
    command: str
    options: Dict[str, Any]

    def __getattr__(self, name):
        try:
            return self.options[name]
        except KeyError:
            raise AttributeError(name) from None

    @property
    def lie(self):
        try:
            return parse_algebra(self.options["algebra"])
        except UnsupportedAlgebra as exc:
            raise ConfigError(str(exc)) from None


# -- value rendering ---------------------------------------------------------------------


def render(x: Any) -> Any:
    """JSON-safe form: rationals as "p/q", tuples as lists."""
    if isinstance(x, bool) or x is None or isinstance(x, (int, str)):
        return x
    if isinstance(x, Fraction):
        return fstr(x)
    if isinstance(x, dict):
        return {str(k): render(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [render(v) for v in x]
    if hasattr(x, "to_json"):
        return x.to_json()
    return str(x)


def exponent(offset: Fraction, step: int) -> Dict[str, Any]:
    return {"offset": fstr(offset), "step": step}


def label_text(lab: Sequence[int]) -> str:
    return ",".join(str(x) for x in lab)


def emit(report: Report, fmt: str, out) -> None:
    if fmt == "json":
        body = dict(report.payload)
        body["columns"] = report.columns
        body["rows"] = render(report.rows)
        out.write(json.dumps(body, sort_keys=True, indent=2) + "\n")
        return
    out.write("\t".join(report.columns) + "\n")
    for row in report.rows:
        cells = []
        for v in row:
            v = render(v)
            cells.append(json.dumps(v, sort_keys=True, separators=(",", ":")) if isinstance(v, (dict, list)) else str(v))
        out.write("\t".join(cells) + "\n")


# -- parsing helpers ---------------------------------------------------------------------


def parse_label(text, rank: int):
    if isinstance(text, (list, tuple)):
        lab = tuple(int(x) for x in text)
    else:
        try:
            lab = tuple(int(x) for x in str(text).split(","))
        except ValueError:
            raise ConfigError("cannot parse label %r" % (text,)) from None
    if len(lab) != rank:
        raise ConfigError("label %r needs %d entries" % (text, rank))
    return lab


def parse_json_arg(text, what: str):
    if text is None:
        raise ConfigError("missing %s" % what)
    if not isinstance(text, str):
        return text
    try:
        if text.startswith("@"):
            with open(text[1:]) as fh:
                return json.load(fh)
        return json.loads(text)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError("cannot read %s: %s" % (what, exc)) from None


def checked_label(cfg: RunConfig, text):
    lie = cfg.lie
    lab = parse_label(text if text is not None else "0" + ",0" * (lie.rank - 1), lie.rank)
    if lab not in label_set(lie, cfg.level):
        raise ConfigError("label %s is not in the label set at level %d" % (label_text(lab), cfg.level))
    return lab


def check_cutoff(n: int, what: str = "cutoff") -> None:
    if n < 0:
        raise ConfigError("%s must be nonnegative" % what)
    cap = max_cutoff()
    if n > cap:
        raise ConfigError("%s %d exceeds VACUA_LAB_MAX_CUTOFF=%d" % (what, n, cap))


# -- commands ------------------------------------------------------------------------------


def _fusion_entry(args):
    level, labs, lie = args
    return fusion_dim(level, *labs, lie=lie)


def cmd_fusion(cfg: RunConfig) -> Report:
    lie = cfg.lie
    labels = label_set(lie, cfg.level)
    triples = [(a, b, c) for a in labels for b in labels for c in labels]
    work = [(cfg.level, t, lie) for t in triples]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            dims = list(pool.map(_fusion_entry, work))
    else:
        dims = [_fusion_entry(w) for w in work]
    rows = []
    for (a, b, c), d in zip(triples, dims):
        if lie.rank == 1:
            o = fusion_oracle(cfg.level, a[0], b[0], c[0])
            if o != d:
                raise InvariantViolation("fusion dimension disagrees with the closed-form rule",
                                         {"labels": [list(a), list(b), list(c)], "solver": d, "oracle": o})
        rows.append([label_text(a), label_text(b), label_text(c), d])
    return Report(["a", "b", "c", "dim"], rows, {"algebra": cfg.algebra, "level": cfg.level})


def cmd_dim(cfg: RunConfig) -> Report:
    from .factorization import DimensionFunctor

    if cfg.genus < 0:
        raise ConfigError("genus must be nonnegative")
    lie = cfg.lie
    functor = DimensionFunctor(cfg.level, lie)
    labs = tuple(sorted(checked_label(cfg, t) for t in (cfg.labels or [])))
    values = {order: functor.connected(cfg.genus, labs, order) for order in ("canonical", "alt")}
    if values["canonical"] != values["alt"]:
        raise InvariantViolation("decomposition orders disagree", values)
    return Report(["genus", "labels", "dim"], [[cfg.genus, " ".join(label_text(l) for l in labs), values[cfg.order]]],
                  {"algebra": cfg.algebra, "level": cfg.level})


def cmd_character(cfg: RunConfig) -> Report:
    lie = cfg.lie
    lab = checked_label(cfg, cfg.label)
    check_cutoff(cfg.max_degree, "max-degree")
    module = build_truncated_module(lie, cfg.level, lab, cfg.max_degree)
    delta = conformal_weight(lie, cfg.level, lab)
    rows = [[fstr(delta), d, n] for d, n in enumerate(module.dims())]
    return Report(["offset", "step", "coefficient"], rows,
                  {"label": list(lab), "level": cfg.level, "conformal_weight": fstr(delta),
                   "terms": [{"exponent": exponent(delta, d), "coefficient": n} for d, n in enumerate(module.dims())]})


def cmd_virasoro_check(cfg: RunConfig) -> Report:
    lie = cfg.lie
    lab = checked_label(cfg, cfg.label)
    check_cutoff(cfg.cutoff)
    module = build_truncated_module(lie, cfg.level, lab, cfg.cutoff)
    c_expected = module.central_charge()
    c_measured = measure_central_charge(module)
    rows = []
    failures = []
    span = range(-cfg.range, cfg.range + 1)
    for m in span:
        for n in span:
            checked = 0
            for d in range(cfg.cutoff + 1):
                defect = virasoro_defect(module, m, n, d, c_measured)
                if defect is None:
                    continue
                checked += 1
                if not defect.is_zero():
                    failures.append({"m": m, "n": n, "degree": d})
            rows.append([m, n, checked, "ok" if not any(f["m"] == m and f["n"] == n for f in failures) else "FAIL"])
    payload = {"label": list(lab), "level": cfg.level, "cutoff": cfg.cutoff,
               "central_charge_expected": fstr(c_expected), "central_charge_measured": fstr(c_measured)}
    if failures or c_measured != c_expected:
        raise InvariantViolation("Virasoro relations fail", dict(payload, failures=failures))
    return Report(["m", "n", "degrees_checked", "status"], rows, payload)


def _fock_spot_checks(charge: int, max_degree: int) -> Dict[str, int]:
    """Anticommutators for |nu|, |mu| <= 5/2 plus L0 and J0 eigenvalues on every basis vector."""
    from .fock import add_into, bc_virasoro, current_mode, enumerate_maya, psi, psibar

    halves = [Fraction(k, 2) for k in range(-5, 6, 2)]
    checked = 0
    for d in range(max_degree + 1):
        for m in enumerate_maya(charge, d):
            v = {m: Fraction(1)}
            for a in halves:
                for b in halves:
                    x = psi(a, psibar(b, v))
                    add_into(x, psibar(b, psi(a, v)))
                    if x != ({m: 1} if a + b == 0 else {}):
                        raise InvariantViolation("anticommutator fails", {"state": m.label(), "nu": fstr(a), "mu": fstr(b)})
                    checked += 1
            if bc_virasoro(0, v) != ({m: Fraction(m.energy)} if m.energy else {}):
                raise InvariantViolation("L0 is not the energy", {"state": m.label()})
            if current_mode(0, v) != ({m: Fraction(charge)} if charge else {}):
                raise InvariantViolation("J0 is not the charge", {"state": m.label()})
    return {"anticommutators": checked}


def cmd_fock(cfg: RunConfig) -> Report:
    from sympy.functions.combinatorial.numbers import partition

    from .fock import enumerate_maya

    rows = []
    listing = []
    for d in range(cfg.max_degree + 1):
        diagrams = enumerate_maya(cfg.charge, d)
        if len(diagrams) != int(partition(d)):
            raise InvariantViolation("Fock space dimension differs from the partition count",
                                     {"charge": cfg.charge, "degree": d})
        energy = d + cfg.charge * (cfg.charge + 1) // 2
        rows.append([cfg.charge, d, energy, len(diagrams)])
        listing.append({"degree": d, "states": [m.label() for m in diagrams]})
    checks = _fock_spot_checks(cfg.charge, min(cfg.max_degree, 4))
    return Report(["charge", "degree", "energy", "dim"], rows,
                  {"charge": cfg.charge, "states": listing, "spot_checks": checks})


def parse_points(cfg: RunConfig, count: Optional[int] = None) -> Optional[tuple]:
    if cfg.points is None:
        return None
    try:
        pts = tuple(Fraction(str(p)) for p in cfg.points)
    except (ValueError, ZeroDivisionError):
        raise ConfigError("points must be rationals such as 0, 1/2, -3") from None
    if not pts or len(set(pts)) != len(pts):
        raise ConfigError("points must be distinct and nonempty")
    if count is not None and len(pts) != count:
        raise ConfigError("need one point per label")
    return pts


def _abelian_sphere(cfg: RunConfig):
    from .fock import AbelianSphere

    pts = parse_points(cfg)
    if pts is None:
        raise ConfigError("--points is required for the abelian theory")
    return AbelianSphere(pts)


def cmd_vacua(cfg: RunConfig) -> Report:
    if cfg.abelian:
        from .fock import abelian_vacua

        sphere = _abelian_sphere(cfg)
        vac = abelian_vacua(sphere, max_emax=max_truncation())
        return Report(["points", "dim"], [[" ".join(fstr(q) for q in sphere.points), vac.dim]],
                      {"abelian": True, "certificate": render(vac.certificate)})
    if not cfg.labels:
        raise ConfigError("--labels is required for nonabelian vacua")
    labs = [checked_label(cfg, t) for t in cfg.labels]
    pts = parse_points(cfg, len(labs))
    sphere = PointedSphere.standard(labs) if pts is None else PointedSphere(pts, tuple(labs))
    vb = vacua_basis(sphere, cfg.level, lie=cfg.lie, max_D=max_truncation())
    return Report(["labels", "dim"], [[" ".join(label_text(l) for l in labs), vb.dim]],
                  {"level": cfg.level, "certificate": render(vb.certificate)})


def cmd_glue_series(cfg: RunConfig) -> Report:
    from .factorization import PairingCovector, glue_series_abelian, glue_series_nonabelian

    D = cfg.max_degree
    if cfg.abelian:
        from .fock import abelian_vacua_at, vacuum

        sphere = _abelian_sphere(cfg)
        if sphere.n < 2:
            raise ConfigError("abelian glueing needs at least two points")
        emax = 2 * D + 1
        vac = abelian_vacua_at(sphere, emax)
        if vac.dim != 1:
            raise StabilizationError("abelian vacua have dimension %d at emax=%d" % (vac.dim, emax),
                                     render(vac.certificate))
        anchor = (vacuum(0),) * (sphere.n - 1) + (vacuum(-1),)
        series = glue_series_abelian(vac.elements[0].normalized_at(anchor), D)
    else:
        lie = cfg.lie
        if cfg.labels:
            if cfg.label is not None:
                raise ConfigError("give either --label or --labels")
            lab = checked_label(cfg, cfg.labels[0])
            if len(cfg.labels) != 2 or checked_label(cfg, cfg.labels[1]) != dagger(lie, lab):
                raise ConfigError("--labels takes a pair mu, mu-dagger")
        else:
            lab = checked_label(cfg, cfg.label)
        check_cutoff(D, "max-degree")
        left = build_truncated_module(lie, cfg.level, lab, D)
        right = build_truncated_module(lie, cfg.level, dagger(lie, lab), D)
        p = pairing(left, right)
        series = glue_series_nonabelian(PairingCovector(p), p, D)
        got = [series.scalar(k) for k in range(D + 1)]
        if got != [Fraction(n) for n in left.dims()]:
            raise InvariantViolation("pairing block series differs from the graded dimensions",
                                     {"series": render(got), "dims": left.dims()})
    body = series.to_json()
    rows = []
    for term in body["terms"]:
        for state, coeff in sorted(term["coefficient"].items()):
            rows.append([body["offset"], term["step"], state, coeff])
    return Report(["offset", "step", "state", "coefficient"], rows, {"series": body})


def _lagrangian(rows):
    from .mcg import Lagrangian, SymplecticError

    try:
        return Lagrangian.of(rows)
    except (SymplecticError, TypeError, IndexError) as exc:
        raise ConfigError("invalid Lagrangian %r: %s" % (rows, exc)) from None


def cmd_wall_sigma(cfg: RunConfig) -> Report:
    from .mcg import random_lagrangian, wall_sigma

    if cfg.random:
        rng = random.Random(cfg.seed)
        g = max(cfg.genus, 1)
        bad = []
        for k in range(cfg.random):
            ls = [random_lagrangian(g, rng) for _ in range(4)]
            s = lambda i, j, l: wall_sigma(ls[i], ls[j], ls[l])
            if s(0, 1, 2) - s(0, 1, 3) + s(0, 2, 3) - s(1, 2, 3) or s(0, 1, 2) != -s(1, 0, 2):
                bad.append(k)
        if bad:
            raise InvariantViolation("cocycle identity fails", {"samples": bad, "seed": cfg.seed})
        return Report(["genus", "samples", "seed", "status"], [[g, cfg.random, cfg.seed, "ok"]])
    data = parse_json_arg(cfg.lagrangians, "lagrangians")
    if not isinstance(data, list) or len(data) != 3:
        raise ConfigError("--lagrangians takes a JSON list of three matrices")
    ls = [_lagrangian(r) for r in data]
    if len({l.genus for l in ls}) != 1:
        raise ConfigError("Lagrangians live in different genera")
    sigma = wall_sigma(*ls)
    return Report(["sigma"], [[sigma]], {"sigma": sigma})


def _morphism(obj, what):
    from .mcg import ExtendedMorphism, SymplecticError

    obj = parse_json_arg(obj, what)
    try:
        return ExtendedMorphism.of(obj["matrix"], obj.get("s", 0))
    except (SymplecticError, KeyError, TypeError, AttributeError) as exc:
        raise ConfigError("invalid %s: %s" % (what, exc)) from None


def cmd_compose(cfg: RunConfig) -> Report:
    from .mcg import ExtendedMorphism, compose, random_lagrangian, random_symplectic

    if cfg.random:
        rng = random.Random(cfg.seed)
        g = max(cfg.genus, 1)
        bad = []
        for k in range(cfg.random):
            ls = [random_lagrangian(g, rng) for _ in range(4)]
            fs = [ExtendedMorphism.of(random_symplectic(g, rng), rng.randint(-3, 3)) for _ in range(3)]
            left = compose(compose(fs[0], fs[1], ls[0], ls[1], ls[2]), fs[2], ls[0], ls[2], ls[3])
            right = compose(fs[0], compose(fs[1], fs[2], ls[1], ls[2], ls[3]), ls[0], ls[1], ls[3])
            if left != right:
                bad.append(k)
        if bad:
            raise InvariantViolation("composition is not associative", {"samples": bad, "seed": cfg.seed})
        return Report(["genus", "samples", "seed", "status"], [[g, cfg.random, cfg.seed, "ok"]])
    first = _morphism(cfg.first, "first morphism")
    second = _morphism(cfg.second, "second morphism")
    data = parse_json_arg(cfg.lagrangians, "lagrangians")
    if not isinstance(data, list) or len(data) != 3:
        raise ConfigError("--lagrangians takes a JSON list of three matrices")
    ls = [_lagrangian(r) for r in data]
    if len({l.genus for l in ls} | {first.genus, second.genus}) != 1:
        raise ConfigError("dimension mismatch")
    out = compose(first, second, *ls)
    return Report(["matrix", "s"], [[[list(r) for r in out.matrix], out.s]], out.to_json())


COMMANDS = {
    "fusion": cmd_fusion,
    "dim": cmd_dim,
    "character": cmd_character,
    "virasoro-check": cmd_virasoro_check,
    "fock": cmd_fock,
    "vacua": cmd_vacua,
    "glue-series": cmd_glue_series,
    "wall-sigma": cmd_wall_sigma,
    "compose": cmd_compose,
}


# -- argument handling ----------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON file whose keys mirror the long options")
    common.add_argument("--algebra", help="A<rank>, default A1")
    common.add_argument("--level", type=int)
    common.add_argument("--format", choices=FORMATS)
    common.add_argument("--seed", type=int)
    common.add_argument("--jobs", type=int, help="worker processes")

    parser = _Parser(prog="vacua-lab", description="Exact computations with spaces of vacua.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fusion", parents=[common], help="3-point dimensions on the sphere")

    p = sub.add_parser("dim", parents=[common], help="dimension of the space of vacua")
    p.add_argument("--genus", type=int)
    p.add_argument("--labels", nargs="*")
    p.add_argument("--order", choices=("canonical", "alt"))

    p = sub.add_parser("character", parents=[common], help="graded dimensions as a tau series")
    p.add_argument("--label")
    p.add_argument("--max-degree", type=int)

    p = sub.add_parser("virasoro-check", parents=[common], help="Sugawara Virasoro relations")
    p.add_argument("--label")
    p.add_argument("--cutoff", type=int)
    p.add_argument("--range", type=int, help="check |m|, |n| up to this bound")

    p = sub.add_parser("fock", parents=[common], help="Maya diagrams of a fixed charge")
    p.add_argument("--charge", type=int)
    p.add_argument("--max-degree", type=int)

    p = sub.add_parser("vacua", parents=[common], help="stabilized dimension of vacua on the sphere")
    p.add_argument("--labels", nargs="*")
    p.add_argument("--abelian", action="store_true", default=None)
    p.add_argument("--points", nargs="+", help="rational coordinates of the marked points")

    p = sub.add_parser("glue-series", parents=[common], help="sewing series")
    p.add_argument("--label", help="mu for the pairing block of H_mu and its dual")
    p.add_argument("--labels", nargs="*", help="the pair mu mu-dagger")
    p.add_argument("--max-degree", "--order", type=int, dest="max_degree")
    p.add_argument("--abelian", action="store_true", default=None)
    p.add_argument("--points", nargs="+", help="rational coordinates; the first two are glued")

    p = sub.add_parser("wall-sigma", parents=[common], help="Wall signature of three Lagrangians")
    p.add_argument("--lagrangians", help="JSON list of three integer matrices, or @file")
    p.add_argument("--random", type=int, help="check the cocycle identity on this many random quadruples")
    p.add_argument("--genus", type=int)

    p = sub.add_parser("compose", parents=[common], help="compose extended morphisms")
    p.add_argument("--first", help='JSON {"matrix": ..., "s": ...}')
    p.add_argument("--second")
    p.add_argument("--lagrangians")
    p.add_argument("--random", type=int, help="check associativity on this many random triples")
    p.add_argument("--genus", type=int)
    return parser


def resolve(argv: Optional[Sequence[str]] = None) -> RunConfig:
    """Defaults, then the config file, then explicit flags."""
    ns = build_parser().parse_args(argv)
    opts = dict(DEFAULTS)
    if ns.config:
        try:
            with open(ns.config) as fh:
                file_opts = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError("cannot read config %s: %s" % (ns.config, exc)) from None
        if not isinstance(file_opts, dict):
            raise ConfigError("config file must hold a JSON object")
        for key, val in file_opts.items():
            k = key.replace("-", "_")
            if k not in DEFAULTS:
                raise ConfigError("unknown config key %r" % key)
            opts[k] = val
    for key, val in vars(ns).items():
        if key in ("command", "config") or val is None:
            continue
        opts[key] = val
    if opts["format"] not in FORMATS:
        raise ConfigError("format must be one of %s" % ", ".join(FORMATS))
    for key in ("level", "jobs"):
        if not isinstance(opts[key], int) or opts[key] < 1:
            raise ConfigError("%s must be a positive integer" % key)
    for key in ("max_degree", "cutoff", "random", "range"):
        if not isinstance(opts[key], int) or opts[key] < 0:
            raise ConfigError("%s must be a nonnegative integer" % key.replace("_", "-"))
    return RunConfig(ns.command, opts)


def _fail(code: int, kind: str, message: str, details: Optional[dict] = None) -> int:
    err = {"error": {"kind": kind, "message": message, "exit_code": code}}
    if details:
        err["error"]["details"] = render(details)
    sys.stderr.write(json.dumps(err, sort_keys=True) + "\n")
    return code


def run(argv: Optional[Sequence[str]] = None, out=None) -> int:
    out = sys.stdout if out is None else out
    try:
        cfg = resolve(argv)
        report = COMMANDS[cfg.command](cfg)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "config", str(exc))
    except StabilizationError as exc:
        return _fail(EXIT_STABILIZATION, "stabilization", str(exc), {"certificate": exc.certificate})
    except InvariantViolation as exc:
        return _fail(EXIT_INVARIANT, "invariant", str(exc), exc.details)
    except AssertionError as exc:
        return _fail(EXIT_INVARIANT, "invariant", str(exc) or "assertion failed")
    except (ValueError, UnsupportedAlgebra) as exc:
        return _fail(EXIT_CONFIG, "config", str(exc))
    emit(report, cfg.format, out)
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
