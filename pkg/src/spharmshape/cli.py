"""Command line entry point: one subcommand per pipeline stage."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .config import PipelineConfig, config_from_dict, load_config
from .distortion import DistortionFeatures, compute_distortion, volume_distortion
from .errors import InvalidParameter, SpharmShapeError
from .evaluation import (
    DEFAULT_PCUT_GRID,
    EvaluationReport,
    evaluate,
    export_significance_map,
    method_columns,
    save_sweep,
    sweep_pcut,
)
from .features import FeatureMatrix, SelectionResult, bagged_ttest, select_features
from .harmonics import SpharmCoefficients, fit_coefficients
from .mesh import load_mesh, save_off, validate_genus0
from .pipeline import (
    build_cohort_template,
    cohort_feature_matrix,
    improve_stage,
    normalized_cohort_coefficients,
    subject_coefficients,
    write_manifest,
)
from .sphere import SphericalParam, parametrize_sphere
from .svm import SvmModel, decision_function, predict, train_svm
from .synth import CohortSpec, generate_cohort, load_cohort, save_cohort
from .template import MeanTemplate, register_subject


def _coerce(text):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            continue
    return text


def _overrides(pairs):
    out = {}
    for kv in pairs or []:
        key, sep, val = kv.partition("=")
        if not sep:
            raise InvalidParameter(f"--set expects KEY=VALUE, got {kv!r}")
        out[key] = _coerce(val)
    return out


def _config(args):
    cfg = load_config(args.config) if args.config else PipelineConfig()
    ov = _overrides(getattr(args, "set", None))
    if ov:
        cfg = config_from_dict({**cfg.to_dict(), **ov})
    return cfg.validate()


def _load_features(path):
    return FeatureMatrix.load(path)


# --------------------------------------------------------------------------
# subcommands

def cmd_improve(args):
    cfg = _config(args)
    mesh = load_mesh(args.input)
    out = improve_stage(mesh, cfg)
    save_off(out, args.output)
    if args.report:
        with open(args.report, "w") as fh:
            fh.write(validate_genus0(out).to_json())


def cmd_parametrize(args):
    cfg = _config(args)
    mesh = load_mesh(args.input)
    param = parametrize_sphere(
        mesh,
        max_iterations=cfg.param_max_iterations,
        step=cfg.param_step,
        tol=cfg.param_tol,
    )
    param.save(args.output)


def cmd_fit(args):
    cfg = _config(args)
    mesh = load_mesh(args.input)
    param = SphericalParam.load(args.param)
    coeffs = fit_coefficients(param.directions, mesh.vertices, cfg.degree)
    coeffs.save(args.output)


def cmd_template(args):
    cfg = _config(args)
    cohort = load_cohort(args.cohort)
    positives = [m for m, lab in zip(cohort.meshes, cohort.labels) if lab == 1]
    coeffs = normalized_cohort_coefficients(positives, cfg)
    template = build_cohort_template(coeffs, np.ones(len(coeffs)), cfg)
    template.save(args.output)
    write_manifest(args.output)


def cmd_register(args):
    cfg = _config(args)
    template = MeanTemplate.load(args.template)
    coeffs = SpharmCoefficients.load(args.coeffs)
    reg = register_subject(
        coeffs,
        template,
        score_points=cfg.align_points,
        score_degree=cfg.align_degree,
        depth=cfg.align_depth,
    )
    reg.coeffs.save(args.output_coeffs)
    if args.output_mesh:
        save_off(reg.mesh, args.output_mesh)


def cmd_distort(args):
    cfg = _config(args)
    template = MeanTemplate.load(args.template)
    registered = load_mesh(args.registered)
    surface = template.surface()
    dist = compute_distortion(surface, registered, cfg.alpha, cfg.beta, cfg.gamma)
    dist.save(args.output)
    if args.volume_out:
        vol = volume_distortion(registered, surface)
        with open(args.volume_out, "w") as fh:
            fh.write(json.dumps({"volume_distortion": float(vol)}, sort_keys=True))


def cmd_features(args):
    cfg = _config(args)
    cohort = load_cohort(args.cohort)
    template = MeanTemplate.load(args.template) if args.template else None
    features, template, _ = cohort_feature_matrix(
        cohort.meshes, cohort.labels, cfg, template=template
    )
    features.save(args.output)
    if args.template_out:
        template.save(args.template_out)
        write_manifest(args.template_out)


def cmd_train(args):
    cfg = _config(args)
    features = _load_features(args.features)
    cols = method_columns(features.schema, cfg.method)
    if cfg.method == "volume":
        omega = cols
    else:
        p = bagged_ttest(features.X[:, cols], features.labels)
        sel = select_features(p, cfg.p_cut)
        omega = cols[sel.omega]
        if args.selection:
            sel = SelectionResult(p=sel.p, omega=omega, p_cut=sel.p_cut)
            sel.save(args.selection)
    model = train_svm(
        features.X,
        features.labels,
        omega=omega,
        eta=cfg.eta,
        C=cfg.C,
        schema_tag=f"n{features.schema.n_vertices}-L{features.schema.L}",
    )
    model.save(args.output)


def cmd_predict(args):
    _config(args)
    model = SvmModel.load(args.model)
    features = _load_features(args.features)
    values = decision_function(model, features.X)
    preds = predict(model, features.X)
    with open(args.output, "w") as fh:
        fh.write(
            json.dumps(
                {
                    "decision_values": [float(v) for v in values],
                    "predictions": [int(p) for p in preds],
                },
                sort_keys=True,
            )
        )


def cmd_evaluate(args):
    cfg = _config(args)
    if args.features:
        features = _load_features(args.features)
    else:
        cohort = load_cohort(args.cohort)
        features, template, _ = cohort_feature_matrix(
            cohort.meshes, cohort.labels, cfg
        )
        if args.run_dir:
            d = Path(args.run_dir)
            d.mkdir(parents=True, exist_ok=True)
            features.save(d / "features.csv")
            template.save(d / "template")
    report = evaluate(features, cfg)
    report.save(args.output)
    if args.run_dir:
        d = Path(args.run_dir)
        d.mkdir(parents=True, exist_ok=True)
        report.save(d / "report.json")
        write_manifest(d)


def cmd_sweep_pcut(args):
    cfg = _config(args)
    features = _load_features(args.features)
    grid = (
        tuple(float(x) for x in args.grid.split(","))
        if args.grid
        else DEFAULT_PCUT_GRID
    )
    save_sweep(sweep_pcut(features, cfg, grid=grid), args.output)


def cmd_synth(args):
    if args.spec:
        with open(args.spec) as fh:
            spec = CohortSpec.from_dict(json.load(fh))
    else:
        spec = CohortSpec()
    ov = _overrides(args.set)
    if ov:
        spec = CohortSpec.from_dict({**spec.to_dict(), **ov})
    cohort = generate_cohort(spec)
    save_cohort(cohort, args.output)
    write_manifest(args.output)


def cmd_export_map(args):
    _config(args)
    report = EvaluationReport.load(args.report)
    template = MeanTemplate.load(args.template)
    features = _load_features(args.features)
    export_significance_map(
        report, template, features.schema, args.output,
        repetition=args.repetition,
    )
    write_manifest(args.output)


# --------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="spharmshape",
        description="Spherical-harmonics registration, distortion features "
        "and SVM classification for genus-0 surface cohorts.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="TOML or JSON pipeline config")
        p.add_argument(
            "--set", action="append", metavar="KEY=VALUE",
            help="override a config field (repeatable)",
        )
        p.set_defaults(func=fn)
        return p

    p = add("improve", cmd_improve, "smooth / simplify / refine a mesh")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--report", help="write a mesh quality report JSON")

    p = add("parametrize", cmd_parametrize, "map a mesh onto the unit sphere")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)

    p = add("fit", cmd_fit, "expand a parametrized mesh in the basis")
    p.add_argument("--input", required=True)
    p.add_argument("--param", required=True)
    p.add_argument("--output", required=True)

    p = add("template", cmd_template, "build the mean template of a cohort")
    p.add_argument("--cohort", required=True)
    p.add_argument("--output", required=True)

    p = add("register", cmd_register, "align subject coefficients to a template")
    p.add_argument("--coeffs", required=True)
    p.add_argument("--template", required=True)
    p.add_argument("--output-coeffs", required=True)
    p.add_argument("--output-mesh")

    p = add("distort", cmd_distort, "per-vertex distortion of a registration")
    p.add_argument("--registered", required=True)
    p.add_argument("--template", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--volume-out", help="write the volume distortion JSON")

    p = add("features", cmd_features, "assemble the cohort feature matrix")
    p.add_argument("--cohort", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--template", help="reuse an existing template directory")
    p.add_argument("--template-out", help="save the built template here")

    p = add("train", cmd_train, "select features and fit the classifier")
    p.add_argument("--features", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--selection", help="write the selection JSON")

    p = add("predict", cmd_predict, "classify feature rows with a model")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--output", required=True)

    p = add("evaluate", cmd_evaluate, "repeated stratified evaluation")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--features")
    group.add_argument("--cohort")
    p.add_argument("--output", required=True)
    p.add_argument("--run-dir", help="collect artifacts with a hash manifest")

    p = add("sweep-pcut", cmd_sweep_pcut, "evaluate a grid of p_cut values")
    p.add_argument("--features", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--grid", help="comma-separated p_cut values")

    p = add("synth", cmd_synth, "generate a synthetic labeled cohort")
    p.add_argument("--spec", help="CohortSpec JSON (fields also via --set)")
    p.add_argument("--output", required=True)

    p = add("export-map", cmd_export_map, "colored significance map export")
    p.add_argument("--report", required=True)
    p.add_argument("--template", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--repetition", type=int, default=0)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except SpharmShapeError as exc:
        sys.stderr.write(
            json.dumps(
                {"error": type(exc).__name__, "message": str(exc)},
                sort_keys=True,
            )
            + "\n"
        )
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
