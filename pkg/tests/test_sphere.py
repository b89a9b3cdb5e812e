import numpy as np
import pytest

import helpers
from spharmshape.errors import InvalidParameter, ParamFailure
from spharmshape.mesh import TriangleMesh
from spharmshape.sphere import (
    SphericalParam,
    check_bijectivity,
    fold_count,
    parametrize_sphere,
    spherical_face_areas,
)


def test_unit_sphere_mesh_is_a_fixed_point():
    # the icosahedron is vertex-transitive, so its one-ring means are
    # exactly radial and relaxation must not move anything
    ico = helpers.icosahedron()
    param = parametrize_sphere(ico, max_iterations=50)
    assert np.abs(param.directions - ico.vertices).max() == 0.0
    assert param.fold_count == 0


def test_sphere_vertices_survive_radial_initialization(ico2):
    param = parametrize_sphere(ico2, max_iterations=0)
    assert np.abs(param.directions - ico2.vertices).max() < 1e-12
    assert param.fold_count == 0


def test_ellipsoid_param_is_fold_free_and_unit():
    ell = helpers.ellipsoid(3, (2.0, 1.0, 1.0))
    param = parametrize_sphere(ell, max_iterations=300)
    assert param.fold_count == 0
    norms = np.linalg.norm(param.directions, axis=1)
    assert np.abs(norms - 1.0).max() < 1e-12


def test_area_distortion_decreases_on_ellipsoid():
    ell = helpers.ellipsoid(3, (2.0, 1.0, 1.0))
    param = parametrize_sphere(ell, max_iterations=300, step=0.1)
    h = np.asarray(param.area_distortion_history)
    assert len(h) > 100
    assert np.all(np.diff(h) < 0.0)


def test_zero_iterations_is_exact_radial_projection():
    ell = helpers.ellipsoid(2, (2.0, 1.0, 1.0))
    param = parametrize_sphere(ell, max_iterations=0)
    centered = ell.vertices - ell.vertices.mean(axis=0)
    radial = centered / np.linalg.norm(centered, axis=1)[:, None]
    assert np.array_equal(param.directions, radial)


def test_parameter_validation():
    ell = helpers.ellipsoid(2, (2.0, 1.0, 1.0))
    with pytest.raises(InvalidParameter):
        parametrize_sphere(ell, step=0.0)
    with pytest.raises(InvalidParameter):
        parametrize_sphere(ell, step=1.5)
    with pytest.raises(InvalidParameter):
        parametrize_sphere(ell, max_iterations=-1)


def test_fold_count_on_icosahedron():
    ico = helpers.icosahedron()
    assert fold_count(ico.vertices, ico.faces) == 0
    swapped = ico.vertices.copy()
    swapped[[0, 3]] = swapped[[3, 0]]
    assert fold_count(swapped, ico.faces) > 0


def test_successful_param_passes_bijectivity_check():
    ell = helpers.ellipsoid(2, (2.0, 1.0, 1.0))
    param = parametrize_sphere(ell, max_iterations=200)
    assert check_bijectivity(param, ell) == 0


def test_folded_projection_fails_with_fold_count():
    # denting one vertex through the centroid folds its one-ring under
    # the radial initialization; a zero budget cannot repair that
    ico2 = helpers.icosphere(2)
    v = ico2.vertices.copy()
    v[0] = -1.05 * v[0]
    dented = TriangleMesh(v, ico2.faces)
    with pytest.raises(ParamFailure) as err:
        parametrize_sphere(dented, max_iterations=0)
    assert err.value.fold_count > 0
    # with an iteration budget the relaxation untangles it
    param = parametrize_sphere(dented, max_iterations=300)
    assert param.fold_count == 0


def test_rotation_equivariant_distortion(rng):
    ell = helpers.ellipsoid(2, (2.0, 1.0, 1.0))
    R = helpers.random_rotation(rng)
    rotated = TriangleMesh(ell.vertices @ R.T, ell.faces)
    pa = parametrize_sphere(ell, max_iterations=200)
    pb = parametrize_sphere(rotated, max_iterations=200)
    a = np.sort(np.abs(spherical_face_areas(pa.directions, ell.faces)))
    b = np.sort(np.abs(spherical_face_areas(pb.directions, rotated.faces)))
    assert np.abs(a - b).max() < 1e-9


def test_spherical_areas_close_to_4pi(ico2):
    areas = spherical_face_areas(ico2.vertices, ico2.faces)
    assert areas.sum() == pytest.approx(4.0 * np.pi, abs=1e-9)
    assert np.all(areas > 0)


def test_param_json_roundtrip(tmp_path):
    ell = helpers.ellipsoid(2, (2.0, 1.0, 1.0))
    param = parametrize_sphere(ell, max_iterations=50)
    path = tmp_path / "param.json"
    param.save(path)
    again = SphericalParam.load(path)
    assert np.array_equal(again.directions, param.directions)
    assert again.fold_count == param.fold_count
    assert again.iterations == param.iterations
