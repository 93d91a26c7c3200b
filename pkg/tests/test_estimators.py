import numpy as np
import pytest
from helpers import circle_contour, square_circle_contour
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from freesketch.errors import InputError
from freesketch.estimators import GuidanceSketcher, ViewSelector
from freesketch.validation import check_contour, check_contours, check_stroke_count


def test_params_and_clone():
    est = GuidanceSketcher(n_strokes=20, steps=30)
    assert est.get_params()["n_strokes"] == 20
    est.set_params(beta_h=0.3)
    twin = clone(est)
    assert twin.get_params() == est.get_params() and twin is not est
    assert ViewSelector(n_views=2).get_params() == {"n_views": 2, "dedup_threshold": 6}


def test_not_fitted():
    with pytest.raises(NotFittedError):
        ViewSelector().transform([circle_contour()])
    with pytest.raises(NotFittedError):
        GuidanceSketcher().transform(None)
    with pytest.raises(NotFittedError):
        GuidanceSketcher().score([circle_contour()])


def test_view_selector_on_cube(cube_views):
    sel = ViewSelector(n_views=3).fit(cube_views)
    assert len(sel.kept_) == 3 and len(sel.selected_) == 3
    assert sel.n_features_in_ == 26
    picked = sel.transform(cube_views)
    assert [im.source_viewpoint.name for im in picked] == ["mmm", "mm0", "m00"]
    with pytest.raises(ValueError):
        sel.transform(cube_views[:5])
    with pytest.raises(ValueError):
        ViewSelector(n_views=0).fit(cube_views)


def test_guidance_sketcher_fit_transform_score():
    contours = [circle_contour(), square_circle_contour()]
    est = GuidanceSketcher(n_strokes=8, steps=16, random_state=2)
    sketches = est.fit_transform(contours)
    assert len(sketches) == 2 and all(len(s) == 8 for s in sketches)
    assert len(est.traces_[0]) == 8 and est.loss_history_[1].shape == (16,)
    assert 0.0 <= est.score(contours) <= 1.0
    again = clone(est).fit(contours)
    assert again.sketches_ == est.sketches_
    with pytest.raises(ValueError):
        est.score(contours[:1])


def test_validation_helpers(tmp_path):
    c = circle_contour()
    assert check_contour(c) is c
    path = tmp_path / "c.png"
    c.save_png(path)
    assert np.array_equal(check_contour(path).pixels, c.pixels)
    assert np.array_equal(check_contour(c.pixels.astype(float)).pixels, c.pixels)
    with pytest.raises(InputError):
        check_contour(np.zeros((10, 10)))
    with pytest.raises(InputError):
        check_contours([])
    assert check_stroke_count(64) == 64
    for bad in (0, 65, 2.5):
        with pytest.raises(InputError):
            check_stroke_count(bad)
