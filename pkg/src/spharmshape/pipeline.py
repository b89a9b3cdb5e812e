"""Stage orchestration: mesh improvement through feature assembly, with
content-hashed run artifacts."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .distortion import compute_distortion, volume_distortion
from .errors import SpharmShapeError, StageError, TooFewSubjects
from .features import FeatureMatrix, FeatureSchema, assemble_feature_vector
from .harmonics import fit_coefficients
from .mesh import improve_mesh
from .sphere import parametrize_sphere
from .template import (
    build_mean_surface,
    build_template_sphere,
    foe_normalize,
    register_subject,
)


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(directory, extra=None):
    """Hash every artifact in a run directory into manifest.json."""
    d = Path(directory)
    artifacts = {}
    for p in sorted(d.rglob("*")):
        if p.is_file() and p.name != "manifest.json":
            artifacts[str(p.relative_to(d))] = sha256_file(p)
    payload = {"artifacts": artifacts}
    if extra:
        payload.update(extra)
    with open(d / "manifest.json", "w") as fh:
        fh.write(json.dumps(payload, sort_keys=True))
    return payload


def improve_stage(mesh, config):
    return improve_mesh(
        mesh,
        smooth_iterations=config.smooth_iterations,
        smooth_step=config.smooth_step,
        simplify_target=config.simplify_target,
        refine_passes=config.refine_passes,
    )


def subject_coefficients(mesh, config):
    """Improve, parametrize and expand one subject.

    Returns (coefficients, parametrization, improved mesh); the
    coefficients are raw, pose normalization happens at cohort entry.
    """
    improved = improve_stage(mesh, config)
    param = parametrize_sphere(
        improved,
        max_iterations=config.param_max_iterations,
        step=config.param_step,
        tol=config.param_tol,
    )
    coeffs = fit_coefficients(param.directions, improved.vertices, config.degree)
    return coeffs, param, improved


def _per_subject(items, fn):
    out = []
    for i, item in enumerate(items):
        try:
            out.append(fn(item))
        except SpharmShapeError as exc:
            raise StageError(i, exc) from exc
    return out


def normalized_cohort_coefficients(meshes, config):
    """Fit and pose-normalize every subject; StageError names the failure."""
    fitted = _per_subject(
        meshes, lambda m: subject_coefficients(m, config)[0]
    )
    return _per_subject(fitted, lambda c: foe_normalize(c)[0])


def build_cohort_template(norm_coeffs, labels, config):
    """Mean template from the class +1 subjects only."""
    positives = [c for c, lab in zip(norm_coeffs, labels) if lab == 1]
    if not positives:
        raise TooFewSubjects("template needs at least one class +1 subject")
    sphere = build_template_sphere(config.template_points)
    return build_mean_surface(
        positives,
        sphere,
        max_iterations=config.mean_max_iterations,
        tol=config.mean_tol,
        score_points=config.align_points,
        score_degree=config.align_degree,
        depth=config.align_depth,
    )


def cohort_feature_matrix(meshes, labels, config, template=None):
    """Full front half of the pipeline: meshes to a labeled feature matrix.

    Returns (FeatureMatrix, template, registered surfaces).  A template is
    built from the +1 subjects when none is supplied.
    """
    labels = np.asarray(labels, dtype=np.int64)
    norm_coeffs = normalized_cohort_coefficients(meshes, config)
    if template is None:
        template = build_cohort_template(norm_coeffs, labels, config)
    template_surface = template.surface()
    schema = FeatureSchema(
        n_vertices=template.sphere.n_vertices, L=config.degree
    )

    def one(coeffs):
        reg = register_subject(
            coeffs,
            template,
            score_points=config.align_points,
            score_degree=config.align_degree,
            depth=config.align_depth,
        )
        dist = compute_distortion(
            template_surface, reg.mesh, config.alpha, config.beta, config.gamma
        )
        vol = volume_distortion(reg.mesh, template_surface)
        vec = assemble_feature_vector(dist.shape, reg.coeffs, vol, schema)
        return reg, vec

    results = _per_subject(norm_coeffs, one)
    registered = [r for r, _ in results]
    X = np.stack([v for _, v in results])
    return FeatureMatrix(X, labels, schema), template, registered
