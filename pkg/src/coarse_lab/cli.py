"""Command line entry points: run a scenario, run a suite, check a space.

Exit codes: 0 all checked inequalities pass, 1 a checked inequality failed
(the instance is falsified), 2 invalid input or violated precondition.
"""

from __future__ import annotations

import argparse
import datetime
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

from .construct import (_sample_grid, dirac_piece_family, fibering_pipeline,
                        glue_with_report, make_glue_input, separated_cover_pipeline,
                        subspace_construction, net_construction,
                        uniform_ball_piece_family)
from .cover import (ChainOfSubspaces, check_kl_separated, direct_limit_cover, enlarge,
                    lebesgue_report, multiplicity, r_multiplicity, set_distance)
from .errors import BoundViolationError, CoarseLabError, ValidationError
from .group import certify_quasi_action, group_pipeline
from .jsonio import (dumps_deterministic, load_action_maps, load_chain_stages,
                     load_cover, load_group, load_map_assignment, load_space,
                     load_witness, norm_id, partition_to_json)
from .partition import (bell_partition, bell_lipschitz_constant,
                        partition_variation_profile)
from .report import InequalityRecord, all_passed, check_le
from .space import check_coarse_map
from .witness import tail_profile, uniform_ball_witness, variation_profile

_CONSUME_EPSILON = {"separated", "group-pipeline"}


def _load_json(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ValidationError("cannot read %s: %s" % (path, exc)) from exc
    except json.JSONDecodeError as exc:
        raise ValidationError("cannot parse %s: line %d: %s"
                              % (path, exc.lineno, exc.msg)) from exc


def _resolve(scenario, base_dir, key, required=True):
    inputs = scenario.get("inputs", {})
    if key not in inputs:
        if required:
            raise ValidationError("scenario is missing input %r" % (key,))
        return None
    value = inputs[key]
    if isinstance(value, str):
        return _load_json(os.path.join(base_dir, value))
    if isinstance(value, dict):
        return value
    raise ValidationError("input %r must be a path or an inline object" % (key,))


def _grid(space, params, key, cap=12):
    if key in params:
        return sorted(float(v) for v in params[key])
    return _sample_grid(space, cap=cap)


def _piece_family(spec, cover):
    if spec is None or spec.get("builtin") == "dirac":
        return dirac_piece_family(cover)
    if spec.get("builtin") == "uniform_ball":
        if "radius" not in spec:
            raise ValidationError("uniform_ball pieces need a radius")
        return uniform_ball_piece_family(cover, spec["radius"])
    if "list" in spec:
        docs = spec["list"]
        if not isinstance(docs, list) or len(docs) != len(cover.pieces):
            raise ValidationError("need one piece witness document per cover piece")
        family = {}
        for i, doc in enumerate(docs):
            if not isinstance(doc, dict) or "vectors" not in doc:
                raise ValidationError("piece %d: explicit piece witnesses need vectors" % i)
            # restrict to the points the document mentions; the glue input
            # validation then reports any mismatch against the actual piece
            pts = [norm_id(row.get("point")) for row in doc["vectors"]]
            family[i] = load_witness(doc, cover.space.restrict(pts))
        return family
    raise ValidationError("unknown piece witness spec %r" % (spec,))


class _RunOutput:
    def __init__(self, checked=(), info=(), witness=None, details=None,
                 truncation_flags=(), notes=(), partition_json=None):
        self.checked = list(checked)
        self.info = list(info)
        self.witness = witness
        self.details = details or {}
        self.truncation_flags = list(truncation_flags)
        self.notes = list(notes)
        self.partition_json = partition_json


def _run_verify_cover(scenario, base_dir, params):
    space = load_space(_resolve(scenario, base_dir, "space"))
    cov = load_cover(_resolve(scenario, base_dir, "cover"), space)
    leb, failing = lebesgue_report(cov)
    notes = ["multiplicity %d" % multiplicity(cov), "lebesgue_number %g" % leb]
    if failing is not None:
        notes.append("smallest radius with an unfit ball: %g" % failing)
    checked = []
    L = params.get("L")
    if L is not None:
        L = float(L)
        kp1 = r_multiplicity(cov, L)
        if cov.coloring is not None:
            k = len(set(cov.coloring)) - 1
            sep = check_kl_separated(cov, k, 2.0 * L)
            min_sep = float("inf")
            for c in sorted(set(cov.coloring)):
                fam = [p for p, col in zip(cov.pieces, cov.coloring) if col == c]
                for i in range(len(fam)):
                    for j in range(i + 1, len(fam)):
                        min_sep = min(min_sep, set_distance(space, fam[i], fam[j]))
            checked.append(InequalityRecord(
                "family_separation_exceeds_2L", 2.0 * L, min_sep, sep,
                note="strict inequality, vacuous when families are singletons"))
            checked.append(check_le("L_multiplicity_le_k_plus_1", kp1, k + 1))
        enl = enlarge(cov, L)
        checked.append(check_le("enlarged_multiplicity_le_L_multiplicity",
                                multiplicity(enl), kp1))
        checked.append(check_le("enlarged_lebesgue_ge_L", L, lebesgue_report(enl)[0]))
    return _RunOutput(checked=checked, notes=notes)


def _run_bell(scenario, base_dir, params):
    space = load_space(_resolve(scenario, base_dir, "space"))
    cov = load_cover(_resolve(scenario, base_dir, "cover"), space)
    part = bell_partition(cov, require_lebesgue=params.get("require_lebesgue", True))
    checked = []
    notes = []
    leb = lebesgue_report(cov)[0]
    if leb > 0:
        C = bell_lipschitz_constant(cov)
        notes.append("certified Lipschitz constant %.17g" % C)
        masses = part.masses()
        ids = space.point_ids
        worst = None
        for a in range(len(ids)):
            for b in range(a + 1, len(ids)):
                d = float(space.D[a, b])
                s = 0.0
                ma, mb = masses[ids[a]], masses[ids[b]]
                for i, v in ma.items():
                    s += abs(v - mb.get(i, 0.0))
                s += sum(v for i, v in mb.items() if i not in ma)
                if worst is None or s - C * d > worst[0]:
                    worst = (s - C * d, s, C * d, (ids[a], ids[b]))
        if worst is not None:
            checked.append(check_le("bell_lipschitz_bound", worst[1], worst[2],
                                    tol=1e-9, witness=worst[3]))
    else:
        notes.append("Lebesgue number 0: no Lipschitz certificate")
    var = partition_variation_profile(part, _grid(space, params, "radii"))
    out = _RunOutput(checked=checked, notes=notes,
                     partition_json=partition_to_json(part))
    out.details["partition_variation"] = [[r, v] for r, v, _ in var]
    return out


def _run_glue(scenario, base_dir, params):
    space = load_space(_resolve(scenario, base_dir, "space"))
    cov = load_cover(_resolve(scenario, base_dir, "cover"), space)
    part = bell_partition(cov, require_lebesgue=params.get("require_lebesgue", True))
    pieces = _piece_family(_resolve(scenario, base_dir, "pieces", required=False), cov)
    res = glue_with_report(make_glue_input(part, pieces),
                           tail_radii=params.get("tail_radii"))
    return _RunOutput(checked=res.checks, witness=res.witness,
                      partition_json=partition_to_json(part))


def _run_subspace(scenario, base_dir, params):
    space = load_space(_resolve(scenario, base_dir, "space"))
    wit = load_witness(_resolve(scenario, base_dir, "witness"), space)
    members = [norm_id(p) for p in params.get("subspace", [])]
    if not members:
        raise ValidationError("subspace pipeline needs a nonempty 'subspace' parameter")
    res = subspace_construction(wit, members, tail_radii=params.get("tail_radii"))
    details = {"retraction": [[_json_id(s), _json_id(p)]
                              for s, p in sorted(res.retraction.items(),
                                                 key=lambda kv: space.index(kv[0]))]}
    return _RunOutput(checked=res.checks, info=res.tail_checks,
                      witness=res.collapsed, details=details)


def _run_net(scenario, base_dir, params):
    space = load_space(_resolve(scenario, base_dir, "space"))
    members = [norm_id(p) for p in params.get("net", [])]
    if not members:
        raise ValidationError("net pipeline needs a nonempty 'net' parameter")
    net_space = space.restrict(members)
    wit = load_witness(_resolve(scenario, base_dir, "witness"), net_space)
    res = net_construction(space, members, wit, c=params.get("c"),
                           radii=params.get("radii"),
                           tail_radii=params.get("tail_radii"))
    return _RunOutput(checked=res.checks, witness=res.witness,
                      details={"c": res.c})


def _run_direct_limit(scenario, base_dir, params):
    space = load_space(_resolve(scenario, base_dir, "space"))
    stages = load_chain_stages(_resolve(scenario, base_dir, "chain"), space)
    if "L" not in params:
        raise ValidationError("direct-limit pipeline needs parameter 'L'")
    L = float(params["L"])
    chain = ChainOfSubspaces(space, stages)
    res = direct_limit_cover(chain, L)
    cov = res.cover
    overlap = 0
    min_gap = float("inf")
    for i in range(len(cov.pieces)):
        for j in range(i + 2, len(cov.pieces)):
            overlap = max(overlap, len(cov.pieces[i] & cov.pieces[j]))
            min_gap = min(min_gap, set_distance(space, cov.pieces[i], cov.pieces[j]))
    checked = [
        check_le("cover_multiplicity_le_2", multiplicity(cov), 2),
        check_le("cover_lebesgue_ge_L", L, lebesgue_report(cov)[0]),
        check_le("nonadjacent_piece_overlap", float(overlap), 0.0),
    ]
    part = bell_partition(cov)
    glue_res = glue_with_report(make_glue_input(part, dirac_piece_family(cov)),
                                tail_radii=params.get("tail_radii"))
    details = {"selected_stages": list(res.indices),
               "piece_count": len(cov.pieces),
               "nonadjacent_min_gap": min_gap}
    return _RunOutput(checked=checked + list(glue_res.checks),
                      witness=glue_res.witness, details=details,
                      truncation_flags=res.truncation_flags)


def _run_fibering(scenario, base_dir, params):
    source = load_space(_resolve(scenario, base_dir, "space"))
    target = load_space(_resolve(scenario, base_dir, "target_space"))
    assignment = load_map_assignment(_resolve(scenario, base_dir, "map"), source, target)
    cov = load_cover(_resolve(scenario, base_dir, "cover"), target)
    cert = check_coarse_map(source, target, assignment)
    part = bell_partition(cov, require_lebesgue=params.get("require_lebesgue", True))
    pieces_spec = _resolve(scenario, base_dir, "pieces", required=False)
    piece_witnesses = None
    if pieces_spec is not None and pieces_spec.get("builtin") != "dirac":
        from .partition import pullback_partition
        pulled, _ = pullback_partition(cert, part)
        piece_witnesses = _piece_family(pieces_spec, pulled.cover)
    res = fibering_pipeline(cert, part, piece_witnesses,
                            radii=params.get("radii"),
                            tail_radii=params.get("tail_radii"))
    details = {"kept_pieces": list(res.kept_pieces),
               "modulus": [[r, v] for r, v in cert.modulus.samples()]}
    return _RunOutput(checked=res.checks, witness=res.witness, details=details)


def _run_separated(scenario, base_dir, params):
    space = load_space(_resolve(scenario, base_dir, "space"))
    cov = load_cover(_resolve(scenario, base_dir, "cover"), space)
    for key in ("L", "sigma", "R", "epsilon"):
        if key not in params:
            raise ValidationError("separated pipeline needs parameter %r" % (key,))
    L = float(params["L"])
    pieces_spec = _resolve(scenario, base_dir, "pieces", required=False)
    piece_witnesses = None
    if pieces_spec is not None and pieces_spec.get("builtin") != "dirac":
        piece_witnesses = _piece_family(pieces_spec, enlarge(cov, L))
    res = separated_cover_pipeline(space, cov, L, params["sigma"], params["R"],
                                   params["epsilon"], piece_witnesses,
                                   tail_radii=params.get("tail_radii"))
    details = {"k": res.k, "L": res.L}
    return _RunOutput(checked=res.checks, info=res.info, witness=res.witness,
                      details=details, partition_json=partition_to_json(res.partition))


def _run_group(scenario, base_dir, params):
    grp = load_group(_resolve(scenario, base_dir, "group"))
    space = load_space(_resolve(scenario, base_dir, "space"))
    maps = load_action_maps(_resolve(scenario, base_dir, "action"), grp, space)
    cov = load_cover(_resolve(scenario, base_dir, "cover"), space)
    if "x0" not in params or "R" not in params:
        raise ValidationError("group pipeline needs parameters 'x0' and 'R'")
    action = certify_quasi_action(grp, space, maps,
                                  A_ceiling=params.get("A_ceiling"),
                                  B_ceiling=params.get("B_ceiling"))
    provider_spec = _resolve(scenario, base_dir, "provider", required=False)
    provider = None
    if provider_spec is not None and provider_spec.get("builtin") == "uniform_ball":
        radius = provider_spec.get("radius")
        if radius is None:
            raise ValidationError("uniform_ball provider needs a radius")
        provider = lambda sp: uniform_ball_witness(sp, radius)  # noqa: E731
    elif provider_spec is not None and provider_spec.get("builtin") not in (None, "dirac"):
        raise ValidationError("unknown provider spec %r" % (provider_spec,))
    res = group_pipeline(action, norm_id(params["x0"]), cov, params["R"],
                         epsilon=params.get("epsilon"), provider=provider,
                         tail_radii=params.get("tail_radii"))
    details = {
        "A": action.A, "B": action.B, "lambda": res.lam,
        "T": res.T, "threshold": res.threshold, "epsilon": res.epsilon,
        "k": res.k, "L": res.L,
        "representatives": [_json_id(g) for g in res.reps],
        "stabilizer_size": len(res.stabilizer.members),
        "kept_pieces": list(res.kept_pieces),
    }
    return _RunOutput(checked=list(res.checks) + list(action.checks), info=res.info,
                      witness=res.witness, details=details,
                      truncation_flags=res.truncation_flags,
                      partition_json=partition_to_json(res.partition))


def _json_id(v):
    if isinstance(v, tuple):
        return [_json_id(x) for x in v]
    return v


_PIPELINES = {
    "verify-cover": _run_verify_cover,
    "bell": _run_bell,
    "glue": _run_glue,
    "subspace": _run_subspace,
    "net": _run_net,
    "direct-limit": _run_direct_limit,
    "fibering": _run_fibering,
    "separated": _run_separated,
    "group-pipeline": _run_group,
}


def execute_scenario(scenario, base_dir):
    """Run a parsed scenario document; returns (certificate dict, output)."""
    pipeline = scenario.get("pipeline")
    if pipeline not in _PIPELINES:
        raise ValidationError("unknown pipeline %r; expected one of %s"
                              % (pipeline, ", ".join(sorted(_PIPELINES))))
    params = dict(scenario.get("parameters", {}))
    out = _PIPELINES[pipeline](scenario, base_dir, params)

    profiles = {"variation": [], "tail": []}
    observed = {"variation_at_R": None, "tail_at_S0": None}
    R = params.get("R")
    S0 = params.get("S0")
    if out.witness is not None:
        w = out.witness
        radii = _grid(w.space, params, "radii")
        tails = _grid(w.space, params, "tail_radii")
        profiles["variation"] = [[r, v] for r, v in variation_profile(w, radii)]
        profiles["tail"] = [[s, v] for s, v in tail_profile(w, tails)]
        if R is not None:
            observed["variation_at_R"] = variation_profile(w, [float(R)])[0][1]
            if "epsilon" in params and pipeline not in _CONSUME_EPSILON:
                out.checked.append(check_le("variation_at_R_le_epsilon",
                                            observed["variation_at_R"],
                                            float(params["epsilon"])))
        if S0 is not None:
            observed["tail_at_S0"] = tail_profile(w, [float(S0)]).samples[0][1]
            if "delta" in params:
                out.checked.append(check_le("tail_at_S0_le_delta",
                                            observed["tail_at_S0"],
                                            float(params["delta"])))

    epsilon = out.details.get("epsilon", params.get("epsilon"))
    certificate = {
        "scenario": scenario.get("name", "unnamed"),
        "pipeline": pipeline,
        "pass": all_passed(out.checked),
        "R": float(R) if R is not None else None,
        "epsilon": float(epsilon) if epsilon is not None else None,
        "S0": float(S0) if S0 is not None else None,
        "delta": float(params["delta"]) if "delta" in params else None,
        "observed": observed,
        "checked_inequalities": [r.as_dict() for r in out.checked],
        "info_inequalities": [r.as_dict() for r in out.info],
        "profiles": profiles,
        "truncation_flags": list(out.truncation_flags),
        "notes": list(out.notes),
        "details": out.details,
    }
    if out.partition_json is not None:
        certificate["partition"] = out.partition_json
    return certificate, out


def export_profiles(certificate, fmt, out_dir, base_name):
    if fmt != "csv":
        raise ValidationError("unsupported profile format %r" % (fmt,))
    paths = []
    for kind, header in (("variation", "R,variation"), ("tail", "S,tail")):
        path = os.path.join(out_dir, "%s.%s.csv" % (base_name, kind))
        rows = certificate["profiles"][kind]
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(header + "\n")
            for r, v in rows:
                fh.write("%.17g,%.17g\n" % (r, v))
        paths.append(path)
    return paths


def run_scenario(path, out_dir=".", profiles_fmt=None, quiet=False):
    scenario = _load_json(path)
    base_dir = os.path.dirname(os.path.abspath(path))
    certificate, out = execute_scenario(scenario, base_dir)
    # Input mtime, not wall clock: re-running a scenario must reproduce the
    # certificate byte for byte.
    mtime = os.stat(path).st_mtime
    certificate["inputs_timestamp"] = datetime.datetime.fromtimestamp(
        mtime, datetime.timezone.utc).isoformat()
    os.makedirs(out_dir, exist_ok=True)
    name = certificate["scenario"]
    cert_path = os.path.join(out_dir, "%s.certificate.json" % name)
    with open(cert_path, "w", encoding="utf-8") as fh:
        fh.write(dumps_deterministic(certificate))
        fh.write("\n")
    if profiles_fmt is not None:
        export_profiles(certificate, profiles_fmt, out_dir, name)
    if not quiet:
        for rec in out.checked:
            print("[%s] %s: %.17g <= %.17g"
                  % ("PASS" if rec.passed else "FAIL", rec.name, rec.lhs, rec.rhs))
        print("%s: %s -> %s"
              % (name, "pass" if certificate["pass"] else "FALSIFIED", cert_path))
    return 0 if certificate["pass"] else 1


def run_suite(directory, out_dir=".", quiet=False):
    try:
        files = sorted(f for f in os.listdir(directory) if f.endswith(".json"))
    except OSError as exc:
        raise ValidationError("cannot list %s: %s" % (directory, exc)) from exc
    results = {}

    def _one(fname):
        full = os.path.join(directory, fname)
        try:
            return run_scenario(full, out_dir=out_dir, quiet=True)
        except BoundViolationError:
            raise
        except CoarseLabError as exc:
            results[fname] = ("error", str(exc))
            return 2

    workers = int(os.environ.get("COARSE_LAB_THREADS", "0")) or min(4, max(1, len(files)))
    codes = {}
    if files:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for fname, code in zip(files, pool.map(_one, files)):
                codes[fname] = code
    n_pass = sum(1 for c in codes.values() if c == 0)
    for fname in files:
        code = codes[fname]
        label = {0: "pass", 1: "FALSIFIED", 2: "ERROR"}[code]
        line = "%s: %s" % (fname, label)
        if fname in results:
            line += " (%s)" % results[fname][1]
        print(line)
    print("passed %d/%d" % (n_pass, len(files)))
    return 0 if n_pass == len(files) else 1


def check_space(path):
    space = load_space(_load_json(path))
    print("points: %d" % len(space))
    print("diameter: %.17g" % space.diameter)
    ud = space.uniform_discreteness
    print("uniform_discreteness: %s" % ("inf" if ud == float("inf") else "%.17g" % ud))
    for r in (1.0, 2.0):
        print("bounded_geometry_N_%g: %d" % (r, space.bounded_geometry(r)))
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="coarse-lab",
        description="Finite-scale embeddability workbench: run scenario "
                    "pipelines and emit inequality certificates.")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run one scenario file")
    p_run.add_argument("scenario")
    p_run.add_argument("--out", default=".", help="output directory")
    p_run.add_argument("--profiles", default=None, help="also export profiles (csv)")
    p_suite = sub.add_parser("suite", help="run every scenario in a directory")
    p_suite.add_argument("directory")
    p_suite.add_argument("--out", default=".", help="output directory")
    p_check = sub.add_parser("check-space", help="validate a space document")
    p_check.add_argument("space")
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return run_scenario(args.scenario, out_dir=args.out,
                                profiles_fmt=args.profiles)
        if args.command == "suite":
            return run_suite(args.directory, out_dir=args.out)
        return check_space(args.space)
    except BoundViolationError:
        raise
    except CoarseLabError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
