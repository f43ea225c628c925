import os
import tempfile
import unittest

import numpy as np

from src.models.errors import InputError, MetricError
from src.models.rd_curve import ErfMap, RDCurve, RDPoint


class TestRDCurve(unittest.TestCase):
    """Test cases for RD curves."""

    def setUp(self):
        """Create a temporary directory."""
        self.tmp = tempfile.TemporaryDirectory()
        self.path = os.path.join(self.tmp.name, "curve.csv")

    def tearDown(self):
        self.tmp.cleanup()

    def test_points_sorted_by_rate(self):
        """Points are kept in increasing bpp."""
        curve = RDCurve("a", [RDPoint(0.5, 33.0), RDPoint(0.1, 28.0), RDPoint(0.3, 31.0)])
        self.assertEqual(curve.bpp.tolist(), [0.1, 0.3, 0.5])

    def test_invalid_points(self):
        """Non-positive or repeated rates raise MetricError."""
        with self.assertRaises(MetricError):
            RDCurve("a", [RDPoint(0.0, 30.0)])
        with self.assertRaises(MetricError):
            RDCurve("a", [RDPoint(0.2, 30.0), RDPoint(0.2, 31.0)])

    def test_csv_round_trip(self):
        """Curves survive a CSV round trip."""
        curve = RDCurve("curve", [RDPoint(0.1, 28.0, "q1"), RDPoint(0.3, 31.0, "q2")])
        curve.to_csv(self.path)
        self.assertEqual(RDCurve.from_csv(self.path), curve)

    def test_csv_without_labels(self):
        """Files with only bpp and psnr columns are accepted."""
        with open(self.path, "w") as f:
            f.write("bpp,psnr\n0.2,30\n0.4,33\n")
        self.assertEqual(len(RDCurve.from_csv(self.path)), 2)

    def test_csv_errors(self):
        """Missing files and columns raise InputError."""
        with self.assertRaises(InputError):
            RDCurve.from_csv(self.path)
        with open(self.path, "w") as f:
            f.write("rate,quality\n0.2,30\n")
        with self.assertRaises(InputError):
            RDCurve.from_csv(self.path)


class TestErfMap(unittest.TestCase):
    """Test cases for ERF maps."""

    def test_area_and_image(self):
        """Area counts pixels above the threshold and the image saturates at it."""
        erf = ErfMap(values=np.array([[0.0, 0.15], [0.3, 1.0]]), threshold=0.3)
        self.assertEqual(erf.area(), 1)
        self.assertEqual(erf.to_image().tolist(), [[0, 128], [255, 255]])
