import os
import tempfile
import unittest
from pathlib import Path
from unittest import mock

import cmbx.file as cf

path_testfiles = Path(__file__).parents[0] / "testfiles"


class FileTest(unittest.TestCase):
    def test_env(self):
        with self.assertRaises(KeyError, msg=f"No environment variable Key found"):
            cf.env_get("Key")

        os.environ["FUN"] = "True"
        self.assertTrue(cf.env_get("FUN", boolean=True))
        os.environ["ISITWEEKENDYET"] = "0"
        self.assertFalse(cf.env_get("ISITWEEKENDYET", boolean=True))

    def test_default_seed(self):
        with mock.patch.dict(os.environ, clear=True):
            self.assertEqual(cf.default_seed(), 0)
            self.assertEqual(cf.default_seed(fallback=5), 5)
        with mock.patch.dict(os.environ, {"CMBX_SEED": "17"}):
            self.assertEqual(cf.default_seed(), 17)
        with mock.patch.dict(os.environ, {"CMBX_SEED": "seventeen"}):
            with self.assertRaises(ValueError, msg="CMBX_SEED must be an integer, got 'seventeen'"):
                cf.default_seed()

    def test_read_regression_csv(self):
        U, a = cf.read_regression_csv(path_testfiles / "bss_identity.csv")
        self.assertEqual(U.tolist(), [[1.0, 0.0], [0.0, 1.0]])
        self.assertEqual(a.tolist(), [1.0, 1.0])

    def test_read_regression_csv_malformed(self):
        with self.assertRaises(ValueError) as cm:
            cf.read_regression_csv(path_testfiles / "bss_malformed.csv")
        self.assertIn("line 3", str(cm.exception))
        self.assertIn("'abc'", str(cm.exception))

        with tempfile.TemporaryDirectory() as tmpdir:
            single = Path(tmpdir) / "single.csv"
            single.write_text("a\n1\n2\n")
            with self.assertRaises(ValueError):
                cf.read_regression_csv(single)

    def test_json_and_csv(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            path = Path(tmpdir) / "nested" / "data.json"
            cf.write_json({"a": [1, 2.5], "b": None}, path)
            self.assertEqual(cf.read_json(path), {"a": [1, 2.5], "b": None})

            path = Path(tmpdir) / "rows.csv"
            cf.write_csv([{"iteration": 1, "bound": -2.0}, {"iteration": 2, "bound": -1.5, "cuts": 3}], path)
            lines = path.read_text().splitlines()
            self.assertEqual(lines[0], "iteration,bound,cuts")
            self.assertEqual(lines[2], "2,-1.5,3.0")


if __name__ == "__main__":
    unittest.main()
