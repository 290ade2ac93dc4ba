import numpy as np

from dtactive.geometry import is_simple_star_shaped, polygon_area, polygon_centroid
from dtactive.shapes import ALL_IDS, NOVEL_IDS, TRAINED_IDS, build_object_library, get_object


def test_library_has_twelve_objects(library):
    assert len(library) == 12
    assert tuple(s.id for s in library) == ALL_IDS


def test_categories():
    assert len(TRAINED_IDS) == 9 and len(NOVEL_IDS) == 3
    assert get_object("N2").is_novel and not get_object("A1").is_novel


def test_a1_is_a_circle(circle_a1):
    r = circle_a1.radii()
    assert np.allclose(r, 10.0, atol=1e-9)


def test_square_has_flat_face_down(square_b1):
    # at theta=0 the vertical extent is the face-to-face distance, not the diagonal
    assert square_b1.vertical_extent(0.0) < 2 * square_b1.max_radius() - 1e-9
    ys = square_b1.vertices[:, 1]
    assert np.isclose(ys.max(), -ys.min())


def test_size_envelope(library):
    for s in library:
        assert s.max_radius() <= 30.0
        assert s.min_radius() >= 3.0


def test_star_shaped_about_centroid(library):
    for s in library:
        assert is_simple_star_shaped(s.vertices, np.zeros(2)), s.id
        assert polygon_area(s.vertices) > 0, s.id
        assert np.allclose(polygon_centroid(s.vertices), 0.0, atol=1e-6), s.id


def test_build_is_deterministic():
    a = build_object_library()
    b = build_object_library()
    for s1, s2 in zip(a, b):
        assert s1.id == s2.id
        assert np.array_equal(s1.vertices, s2.vertices)
