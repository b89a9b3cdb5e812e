"""Repeated stratified evaluation of the classifier, p_cut sweeps and the
significance-map export, plus ground-truth mapping for synthetic cohorts."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .config import METHODS
from .errors import IndexOutOfRange, InvalidParameter, TooFewSubjects
from .features import bagged_ttest
from .harmonics import fit_coefficients
from .mesh import save_ply_colored
from .sphere import parametrize_sphere
from .svm import predict, train_svm
from .synth import GroundTruth, clean_base_mesh
from .template import align_to_reference, foe_normalize


def method_columns(schema, method):
    """Feature universe of a method as absolute column indices."""
    if method == "qc-spharm":
        return np.arange(schema.total)
    if method == "qc":
        s = schema.block_slice("shape")
        return np.arange(s.start, s.stop)
    if method == "spharm":
        s = schema.block_slice("spharm")
        return np.arange(s.start, s.stop)
    if method == "volume":
        s = schema.block_slice("volume")
        return np.arange(s.start, s.stop)
    raise InvalidParameter(f"method {method!r} not one of {METHODS}")


def _splits(labels, config):
    """Per-repetition stratified (train, test) row indices."""
    labels = np.asarray(labels)
    pos = np.flatnonzero(labels == 1)
    neg = np.flatnonzero(labels == -1)
    need = config.train_per_class + config.test_per_class
    if len(pos) < need or len(neg) < need:
        raise TooFewSubjects(
            f"classes of sizes {len(pos)}/{len(neg)} cannot supply "
            f"{config.train_per_class}+{config.test_per_class} per class"
        )
    seeds = np.random.SeedSequence(config.seed).spawn(config.repetitions)
    out = []
    for s in seeds:
        rng = np.random.default_rng(s)
        p = rng.permutation(pos)
        n = rng.permutation(neg)
        tr = np.concatenate([p[: config.train_per_class],
                             n[: config.train_per_class]])
        te = np.concatenate([p[config.train_per_class:need],
                             n[config.train_per_class:need]])
        out.append((tr, te))
    return out


def _metrics(y_true, y_pred):
    sens = float(np.mean(y_pred[y_true == -1] == -1))
    spec = float(np.mean(y_pred[y_true == 1] == 1))
    acc = float(np.mean(y_pred == y_true))
    return sens, spec, acc


def _classify(Xm, labels, train, test, omega_rel, config):
    """Train on the rows and selection given; empty selection degrades to
    the constant +1 prediction (the zero decision value's sign)."""
    if len(omega_rel) == 0:
        return np.ones(len(test), dtype=np.int64)
    model = train_svm(
        Xm[train], labels[train], omega=omega_rel,
        eta=config.eta, C=config.C,
    )
    return predict(model, Xm[test])


@dataclass
class EvaluationReport:
    method: str
    p_cut: float
    repetitions: int
    seed: int
    train_per_class: int
    test_per_class: int
    sensitivity_mean: float
    sensitivity_std: float
    specificity_mean: float
    specificity_std: float
    accuracy_mean: float
    accuracy_std: float
    per_repetition: list = field(default_factory=list)

    def to_json(self):
        return json.dumps(
            {
                "accuracy_mean": self.accuracy_mean,
                "accuracy_std": self.accuracy_std,
                "method": self.method,
                "p_cut": self.p_cut,
                "per_repetition": self.per_repetition,
                "repetitions": self.repetitions,
                "seed": self.seed,
                "sensitivity_mean": self.sensitivity_mean,
                "sensitivity_std": self.sensitivity_std,
                "specificity_mean": self.specificity_mean,
                "specificity_std": self.specificity_std,
                "test_per_class": self.test_per_class,
                "train_per_class": self.train_per_class,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text):
        return cls(**json.loads(text))

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(fh.read())


def _summary(values):
    v = np.asarray(values, dtype=np.float64)
    return float(v.mean()), float(v.std())


def evaluate(features, config, splits=None, p_cache=None):
    """Repeated stratified train/test evaluation on a feature matrix.

    Selection and standardization are fit on the training rows of each
    repetition only.  The volume method skips selection (one column).
    """
    config.validate()
    cols = method_columns(features.schema, config.method)
    Xm = features.X[:, cols]
    labels = features.labels
    if splits is None:
        splits = _splits(labels, config)
    per_rep = []
    for k, (train, test) in enumerate(splits):
        if config.method == "volume":
            omega_rel = np.array([0], dtype=np.int64)
        else:
            if p_cache is not None:
                p = p_cache[k]
            else:
                p = bagged_ttest(Xm[train], labels[train])
            omega_rel = np.flatnonzero(p <= config.p_cut)
        y_pred = _classify(Xm, labels, train, test, omega_rel, config)
        sens, spec, acc = _metrics(labels[test], y_pred)
        per_rep.append(
            {
                "accuracy": acc,
                "n_selected": int(len(omega_rel)),
                "omega": [int(cols[i]) for i in omega_rel],
                "sensitivity": sens,
                "specificity": spec,
            }
        )
    s_mean, s_std = _summary([r["sensitivity"] for r in per_rep])
    c_mean, c_std = _summary([r["specificity"] for r in per_rep])
    a_mean, a_std = _summary([r["accuracy"] for r in per_rep])
    return EvaluationReport(
        method=config.method,
        p_cut=float(config.p_cut),
        repetitions=config.repetitions,
        seed=config.seed,
        train_per_class=config.train_per_class,
        test_per_class=config.test_per_class,
        sensitivity_mean=s_mean,
        sensitivity_std=s_std,
        specificity_mean=c_mean,
        specificity_std=c_std,
        accuracy_mean=a_mean,
        accuracy_std=a_std,
        per_repetition=per_rep,
    )


DEFAULT_PCUT_GRID = (0.0001, 0.001, 0.005, 0.01, 0.05, 0.1, 0.5)


def sweep_pcut(features, config, grid=DEFAULT_PCUT_GRID):
    """Evaluate a p_cut grid on shared splits (paired across grid values).

    The bagged p-values per repetition are computed once and rethresholded.
    """
    config.validate()
    if config.method == "volume":
        raise InvalidParameter("the volume method has no selection to sweep")
    for v in grid:
        if not 0.0 < v < 1.0:
            raise InvalidParameter(f"p_cut {v} outside (0, 1)")
    cols = method_columns(features.schema, config.method)
    Xm = features.X[:, cols]
    labels = features.labels
    splits = _splits(labels, config)
    p_cache = [bagged_ttest(Xm[tr], labels[tr]) for tr, _ in splits]
    rows = []
    for v in grid:
        rep = evaluate(
            features, replace(config, p_cut=float(v)),
            splits=splits, p_cache=p_cache,
        )
        rows.append(
            {
                "accuracy_mean": rep.accuracy_mean,
                "accuracy_std": rep.accuracy_std,
                "mean_selected": float(
                    np.mean([r["n_selected"] for r in rep.per_repetition])
                ),
                "p_cut": float(v),
                "sensitivity_mean": rep.sensitivity_mean,
                "specificity_mean": rep.specificity_mean,
            }
        )
    return {
        "grid": rows,
        "method": config.method,
        "repetitions": config.repetitions,
        "seed": config.seed,
    }


def save_sweep(sweep, path):
    with open(path, "w") as fh:
        fh.write(json.dumps(sweep, sort_keys=True))


# ---------------------------------------------------------------------------
# significance map and synthetic ground truth

def export_significance_map(report, template, schema, directory,
                            repetition=0):
    """Write the selected-feature map of one repetition: a colored PLY of
    the mean surface (selected shape vertices red) plus a JSON sidecar for
    the non-vertex features."""
    if not 0 <= repetition < len(report.per_repetition):
        raise InvalidParameter(
            f"repetition {repetition} outside 0..{len(report.per_repetition) - 1}"
        )
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    omega = np.array(report.per_repetition[repetition]["omega"], dtype=np.int64)
    n_shape = schema.n_shape
    shape_sel = omega[omega < n_shape]
    spharm_sel = omega[(omega >= n_shape) & (omega < n_shape + schema.n_spharm)]
    vol_sel = bool(np.any(omega == schema.total - 1))

    surface = template.surface()
    if shape_sel.size and shape_sel.max() >= surface.n_vertices:
        raise IndexOutOfRange(
            f"shape index {int(shape_sel.max())} exceeds the "
            f"{surface.n_vertices}-vertex template"
        )
    colors = np.full((surface.n_vertices, 3), 180, dtype=np.int64)
    colors[shape_sel] = (220, 30, 30)
    save_ply_colored(surface, colors, d / "significance_map.ply")
    sidecar = {
        "n_selected": int(len(omega)),
        "p_cut": report.p_cut,
        "repetition": int(repetition),
        "selected_shape_vertices": [int(i) for i in shape_sel],
        "selected_spharm": [int(i - n_shape) for i in spharm_sel],
        "volume_selected": vol_sel,
    }
    with open(d / "significance_map.json", "w") as fh:
        fh.write(json.dumps(sidecar, sort_keys=True))
    return sidecar


def ground_truth_template_mask(template, spec, config):
    """Map a synthetic cohort's affected region onto template vertices.

    The clean base shape is parametrized, pose-normalized and aligned to
    the template; a template vertex s then corresponds to the generation
    direction R s (R the winning parametrization rotation), where the
    ground-truth cap is defined.
    """
    clean = clean_base_mesh(spec)
    param = parametrize_sphere(
        clean,
        max_iterations=config.param_max_iterations,
        step=config.param_step,
        tol=config.param_tol,
    )
    coeffs = fit_coefficients(param.directions, clean.vertices, config.degree)
    normalized, _ = foe_normalize(coeffs)
    result = align_to_reference(
        normalized,
        template.coeffs,
        score_points=config.align_points,
        score_degree=config.align_degree,
        depth=config.align_depth,
    )
    gen_dirs = template.sphere.vertices @ result.param_rotation.T
    gt = GroundTruth(
        np.asarray(spec.bump_center), spec.bump_radius, spec.bump_amplitude
    )
    return gt.vertex_mask(gen_dirs)
