import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from helpers import circle, square, square_circle_contour

from freesketch.contour import ContourImage, render_contour_image
from freesketch.edge_init import (FeatureSegment, greedy_saliency_points, init_strokes,
                                  initialize, place_seed_points, saliency_map, seed_overlay,
                                  segment_features)
from freesketch.errors import InputError

BLANK = ContourImage(np.zeros((224, 224), bool))


@pytest.fixture(scope="module")
def two_features():
    img = square_circle_contour()
    return img, segment_features(img), saliency_map(img)


def _counts(placement, n_segments):
    return [int((placement.owner == i).sum()) for i in range(n_segments)]


# -- segmentation ------------------------------------------------------------------

def test_two_disjoint_circles_give_two_closed_segments():
    img = render_contour_image([circle(0.4, (-0.5, 0)), circle(0.4, (0.5, 0))])
    segs = segment_features(img)
    assert len(segs) == 2 and all(s.closed for s in segs)


def test_square_outline_is_one_closed_segment_of_perimeter_length():
    segs = segment_features(render_contour_image([square()]))
    assert len(segs) == 1 and segs[0].closed
    assert segs[0].length == pytest.approx(4 * 179, rel=0.01)


def test_open_path_is_traced_end_to_end():
    img = render_contour_image([np.array([[0, 0], [1, 0], [1, 1]])])
    (seg,) = segment_features(img)
    assert not seg.closed
    assert len(seg.pixels) == img.ink_count
    assert seg.length == pytest.approx(2 * 179, rel=0.01)


def test_segments_sorted_by_length(two_features):
    _, segs, _ = two_features
    assert [s.length for s in segs] == sorted((s.length for s in segs), reverse=True)


def test_blank_image_errors():
    with pytest.raises(InputError):
        segment_features(BLANK)
    with pytest.raises(InputError):
        saliency_map(BLANK)


def test_segment_invariants():
    with pytest.raises(InputError):
        FeatureSegment([[0, 0], [0, 1], [0, 2]], closed=False)
    with pytest.raises(InputError):
        FeatureSegment([[0, 0], [0, 1], [0, 3], [0, 4]], closed=False)
    seg = FeatureSegment([[0, 0], [0, 1], [1, 2], [2, 2]], closed=False)
    assert np.all(np.diff(seg.cumulative) > 0)


def test_seed_fractions():
    closed = FeatureSegment([[0, 0], [0, 1], [1, 1], [1, 0]], closed=True)
    opened = FeatureSegment([[0, 0], [0, 1], [0, 2], [0, 3]], closed=False)
    assert closed.seed_fractions(4) == [0, 0.25, 0.5, 0.75]
    assert opened.seed_fractions(4) == [0, 1 / 3, 2 / 3, 1]
    assert opened.seed_fractions(1) == [0.5]


# -- saliency --------------------------------------------------------------------------

def test_saliency_normalised_and_decays(two_features):
    img, _, sal = two_features
    assert sal.max() == pytest.approx(1.0)
    from scipy.ndimage import distance_transform_edt
    far = distance_transform_edt(~img.pixels) >= 15
    assert sal[far].max() < 1e-3


def test_saliency_symmetric_features_equal_peaks():
    img = render_contour_image([circle(0.4, (-0.5, 0)), circle(0.4, (0.5, 0))])
    sal = saliency_map(img)
    left, right = sal[:, :112].max(), sal[:, 112:].max()
    assert left == pytest.approx(right, rel=1e-6)


def test_greedy_points_respect_suppression_radius():
    rng = np.random.default_rng(0)
    sal = rng.uniform(size=(224, 224))
    pts = np.array(greedy_saliency_points(sal, 20, radius=8))
    d = np.linalg.norm(pts[:, None] - pts[None], axis=2)
    assert d[np.triu_indices(len(pts), 1)].min() > 8


# -- seed placement -------------------------------------------------------------------

def test_n_equals_four_per_feature(two_features):
    img, segs, sal = two_features
    pl = place_seed_points(segs, sal, 8)
    assert _counts(pl, 2) == [4, 4]
    assert all(img.pixels[r, c] for r, c in pl.pixels)
    for i, seg in enumerate(segs):
        mine = pl.pixels[pl.owner == i]
        expected = np.array([seg.point_at(f) for f in (0, 0.25, 0.5, 0.75)])
        assert np.array_equal(mine, expected)


def test_even_discard_to_three_each(two_features):
    _, segs, sal = two_features
    assert _counts(place_seed_points(segs, sal, 6), 2) == [3, 3]
    assert _counts(place_seed_points(segs, sal, 7), 2) == [4, 3]
    assert _counts(place_seed_points(segs, sal, 3), 2) == [2, 1]


def test_greedy_extras_beyond_four_per_feature(two_features):
    img, segs, sal = two_features
    pl = place_seed_points(segs, sal, 10)
    assert _counts(pl, 2) == [4, 4]
    extra = pl.pixels[pl.owner == -1]
    assert len(extra) == 2
    assert np.linalg.norm(extra[0] - extra[1]) >= 8


def test_single_segment_with_two_greedy_extras():
    img = render_contour_image([circle()])
    segs = segment_features(img)
    pl = place_seed_points(segs, saliency_map(img), 6)
    assert (pl.owner == 0).sum() == 4 and (pl.owner == -1).sum() == 2
    extra = pl.pixels[pl.owner == -1]
    assert np.linalg.norm(extra[0] - extra[1]) >= 8


def test_fewer_strokes_than_features_warns(two_features):
    _, segs, sal = two_features
    with pytest.warns(UserWarning, match="lost coverage"):
        pl = place_seed_points(segs, sal, 1)
    assert len(pl) == 1 and pl.dropped == [1]


def test_placement_errors(two_features):
    _, segs, sal = two_features
    with pytest.raises(InputError):
        place_seed_points(segs, sal, 0)
    with pytest.raises(InputError):
        place_seed_points([], sal, 4)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 16))
def test_seed_placement_properties(n):
    img = square_circle_contour()
    segs = segment_features(img)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        a = place_seed_points(segs, saliency_map(img), n)
        b = place_seed_points(segs, saliency_map(img), n)
    assert len(a) == n
    assert np.array_equal(a.pixels, b.pixels)
    edge = a.owner >= 0
    assert all(img.pixels[r, c] for r, c in a.pixels[edge])
    extra = a.pixels[~edge]
    if len(extra) > 1:
        d = np.linalg.norm(extra[:, None] - extra[None], axis=2)
        assert d[np.triu_indices(len(extra), 1)].min() >= 8


def test_equal_length_segments_differ_by_at_most_one():
    img = render_contour_image([circle(0.4, (-0.5, 0)), circle(0.4, (0.5, 0))])
    segs = segment_features(img)
    assert segs[0].length == pytest.approx(segs[1].length)
    for n in range(2, 8):
        counts = _counts(place_seed_points(segs, saliency_map(img), n), 2)
        assert abs(counts[0] - counts[1]) <= 1


# -- stroke init ------------------------------------------------------------------------

def test_init_strokes_contract():
    seeds = np.array([[0.2, 0.3], [0.5, 0.5], [0.8, 0.1]])
    sk = init_strokes(seeds, rng_seed=4)
    assert len(sk) == 3
    pts = sk.control_points
    assert np.array_equal(pts[:, 0], seeds)
    assert np.linalg.norm(pts[:, 1:] - pts[:, :1], axis=2).max() <= 0.05
    assert init_strokes(seeds, rng_seed=4) == sk
    assert init_strokes(seeds, rng_seed=5) != sk
    assert np.all(sk.widths == 1.5)


def test_init_strokes_requires_a_seed():
    with pytest.raises(InputError):
        init_strokes(np.zeros((0, 2)))


def test_initialize_and_overlay(two_features):
    img, _, _ = two_features
    sk, pl = initialize(img, 8, rng_seed=0)
    assert len(sk) == 8
    assert np.allclose(sk.control_points[:, 0], pl.normalized())
    overlay = np.asarray(seed_overlay(img, pl))
    assert overlay.shape == (224, 224, 3)
    r, c = pl.pixels[0]
    assert tuple(overlay[r, c]) == (255, 0, 0)
