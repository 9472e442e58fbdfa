"""
Shared pytest fixtures for both unit and integration tests.
"""

import os
import sys

import numpy as np
import pytest

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from mono3d.shared.schemas import Box2D, Box3D, CameraModel  # noqa: E402


@pytest.fixture
def unit_cube():
    """
    Provide a unit cube at the origin.
    """
    return Box3D(cx=0.0, cy=0.0, cz=0.0, l=1.0, w=1.0, h=1.0)


@pytest.fixture
def two_box_arrays():
    """
    Provide the two-box case s = (0.9, 0.6) with overlap 0.5.
    """
    return np.array([0.9, 0.6]), np.array([[1.0, 0.5], [0.5, 1.0]])


@pytest.fixture
def overlapping_boxes2d():
    """
    Provide two image boxes sharing one unit square.
    """
    return Box2D(x1=0.0, y1=0.0, x2=2.0, y2=2.0), Box2D(x1=1.0, y1=1.0, x2=3.0, y2=3.0)


@pytest.fixture
def kitti_camera():
    """
    Provide a level camera with KITTI-like intrinsics.
    """
    return CameraModel(f=707.0, cu=600.0, cv=180.0, H=1.65, image_h=370.0)


@pytest.fixture
def output_dir(tmp_path, monkeypatch):
    """
    Point MONO3D_OUTPUT_DIR at a temporary directory.
    """
    monkeypatch.setenv("MONO3D_OUTPUT_DIR", str(tmp_path))
    return tmp_path
