import math
import tempfile
import unittest
from pathlib import Path

import numpy as np

import cmbx.model as mdl
from cmbx.conic import residual
from cmbx.exceptions import DomainError, ModelSchemaError, StructureError
from cmbx.members import ConeTag, Criterion, LinearConstraint, ProblemFamily, Sense
from cmbx.set_function import AiccDecay, Complement, ExpDecay, PNormAugmented, evaluate

path_testfiles = Path(__file__).parents[0] / "testfiles"


class BuilderTest(unittest.TestCase):
    def test_build_H(self):
        model = mdl.build_H(0.0, [1.0, 1.0])
        self.assertEqual(model.family, ProblemFamily.H)
        self.assertEqual(model.n, 2)
        self.assertEqual(len(model.vars), 1)
        self.assertEqual([b.cone.tag for b in model.blocks], [ConeTag.Soc, ConeTag.NonnegOrthant])
        self.assertFalse(model.vars[0].lb_artificial)
        self.assertTrue(model.vars[0].ub_artificial)

        model = mdl.build_H(1.0, [1.0, 2.0], d=[4.0, 1.0], m=3)
        self.assertEqual(model.blocks[0].cone.dim, 4)
        # (y, 2 x1, x2) <= x3
        image = model.blocks[0].image(np.array([1.0, 2.0, 3.0]), np.array([1.0]))
        self.assertEqual(image.tolist(), [1.0, 2.0, 2.0, 3.0])

    def test_build_R(self):
        model = mdl.build_R(0.0, [1.0], m=2)
        self.assertEqual(model.family, ProblemFamily.R)
        block = model.blocks[0]
        self.assertEqual(block.cone.tag, ConeTag.RotatedSoc)
        # y^2 <= 4 x1 x2
        self.assertLessEqual(residual(block.cone, block.image(np.array([1.0, 1.0]), np.array([2.0]))), 1e-15)
        self.assertGreater(residual(block.cone, block.image(np.array([1.0, 0.5]), np.array([2.0]))), 0.0)

        with self.assertRaises(StructureError, msg="block needs m >= 2, got m=1"):
            mdl.build_R(0.0, [1.0], m=1)

    def test_build_M(self):
        model = mdl.build_M(
            h_params=[{"sigma": 0.5, "c": [1.0, 2.0], "d": [1.0], "m": 2}],
            r_params=[mdl.BlockParams(sigma=0.0, c=[1.0, 1.0], m=2)],
        )
        self.assertEqual(model.family, ProblemFamily.M)
        self.assertEqual(len(model.functions), 2)
        self.assertEqual(len(model.blocks), 4)
        self.assertEqual([b.y_index for b in model.blocks], [0, None, 1, None])
        self.assertEqual(model.blocks[2].x_index, [2, 3])

    def test_build_M_validation(self):
        with self.assertRaises(StructureError, msg="at least one block is needed"):
            mdl.build_M()
        with self.assertRaises(StructureError, msg="expected 1 entries in d for m=2, got 0"):
            mdl.build_H(0.0, [1.0], m=2)
        with self.assertRaises(DomainError, msg="sigma, c and d must be nonnegative"):
            mdl.build_H(-1.0, [1.0])
        with self.assertRaises(StructureError):
            mdl.build_M(h_params=[{"c": [1.0], "m": 1}, {"c": [1.0, 1.0], "m": 1}])

    def test_build_fractional(self):
        model = mdl.build_fractional([1.0], [[1.0, 2.0]], [1.0], [[1.0, 0.0]])
        self.assertEqual(model.family, ProblemFamily.Fractional)
        self.assertEqual([v.name for v in model.vars], ["u1", "v1"])
        self.assertEqual(model.objective.x, {0: 1.0})
        self.assertEqual(model.linear, [LinearConstraint(x={1: 1.0}, z={0: -1.0}, sense=Sense.EQ, rhs=1.0)])
        self.assertAlmostEqual(evaluate(model.functions[0], 0b11), math.sqrt(16.0))
        # the largest ratio is 3 at z = (0, 1)
        self.assertEqual(model.vars[0].ub, mdl.BOX)
        self.assertFalse(model.vars[1].ub_artificial)

    def test_build_fractional_restricted_choices(self):
        X = [LinearConstraint(z={0: 1.0, 1: 1.0}, sense=Sense.GE, rhs=1.0)]
        model = mdl.build_fractional([0.0], [[1.0, 1.0]], [0.0], [[1.0, 1.0]], X=X)
        self.assertEqual(model.linear[-1], X[0])

        with self.assertRaises(DomainError, msg="denominator vanishes at z=[0, 0]"):
            mdl.build_fractional([0.0], [[1.0, 1.0]], [0.0], [[1.0, 1.0]])
        with self.assertRaises(DomainError):
            mdl.build_fractional([-1.0], [[1.0, 1.0]], [1.0], [[1.0, 1.0]])
        with self.assertRaises(StructureError, msg="rows of X may only involve z"):
            mdl.build_fractional([1.0], [[1.0]], [1.0], [[1.0]], X=[LinearConstraint(x={0: 1.0})])

    def test_decay_function(self):
        self.assertIsInstance(mdl.decay_function(Criterion.AIC, 1.0, 3), ExpDecay)
        self.assertIsInstance(mdl.decay_function("bic", 2.0, 3), ExpDecay)
        self.assertIsInstance(mdl.decay_function(Criterion.AICc, 5.0, 3), AiccDecay)
        with self.assertRaises(DomainError, msg="AICc needs alpha > n, got alpha=3.0, n=3"):
            mdl.decay_function(Criterion.AICc, 3.0, 3)
        with self.assertRaises(DomainError):
            mdl.decay_function(Criterion.AIC, -1.0, 3)

    def test_build_bss(self):
        model = mdl.build_bss([[1.0, 0.0], [0.0, 1.0]], [1.0, 1.0], bigM=5.0, criterion=Criterion.BIC, alpha=0.3)
        self.assertEqual(model.family, ProblemFamily.BSS)
        self.assertIsInstance(model.functions[0], Complement)
        self.assertEqual([v.name for v in model.vars], ["t", "beta1", "beta2", "v"])
        self.assertEqual(model.pins(), {3: 1.0})
        # v = 1 plus two big-M rows per feature
        self.assertEqual(len(model.linear), 5)
        self.assertEqual(model.meta["criterion"], "bic")
        self.assertEqual(model.objective.x, {0: 1.0})

        # t = ||a - U beta||^2 / h(z) sits on the cone boundary
        block = model.blocks[0]
        z, beta = 0b01, [0.5, 0.0]
        h = math.exp(-0.3)
        t = (0.25 + 1.0) / h
        y = evaluate(model.functions[0], z)
        image = block.image(np.array([t] + beta + [1.0]), np.array([y]))
        self.assertAlmostEqual(residual(block.cone, image), 0.0, places=12)

        with self.assertRaises(DomainError):
            mdl.build_bss([[1.0]], [1.0], bigM=0.0)
        with self.assertRaises(StructureError):
            mdl.build_bss([[1.0], [2.0]], [1.0], bigM=1.0)

    def test_build_drccp_norm(self):
        model = mdl.build_drccp_norm(p=3.0, eta1=1, eta2=0, m=2, n=4)
        self.assertEqual(model.family, ProblemFamily.DRCCP)
        self.assertEqual(model.functions[0], PNormAugmented(p=3.0, eta2=0, n=4))
        self.assertEqual(model.blocks[0].cone.p, 3.0)
        self.assertEqual(model.blocks[0].cone.dim, 4)

        with self.assertRaises(DomainError, msg="eta1 must be 1, got 2"):
            mdl.build_drccp_norm(p=2.0, eta1=2, eta2=1, m=1, n=2)
        with self.assertRaises(DomainError):
            mdl.build_drccp_norm(p=2.0, eta1=1, eta2=3, m=1, n=2)

    def test_build_example1(self):
        model = mdl.build_example1()
        self.assertEqual(model.family, ProblemFamily.Example1)
        self.assertEqual(len(model.cuts), 2)
        self.assertEqual(model.pins(), {2: 1.0})
        np.testing.assert_allclose(model.cuts[0].cut.pi, [1.0, math.sqrt(2.0) - 1.0])
        np.testing.assert_allclose(model.cuts[1].cut.pi, [math.sqrt(2.0) - 1.0, 1.0])

    def test_generate(self):
        for family in ProblemFamily:
            if family is ProblemFamily.Custom:
                with self.assertRaises(StructureError):
                    mdl.generate(family, n=3)
                continue
            model = mdl.generate(family, n=3, m=2, seed=7)
            self.assertEqual(model.family, family)
            self.assertEqual(model.meta["seed"], 7)

        first = mdl.generate("M", n=4, m=3, seed=1)
        second = mdl.generate(ProblemFamily.M, n=4, m=3, seed=1)
        self.assertEqual(first.model_dump(), second.model_dump())
        self.assertNotEqual(first.model_dump(), mdl.generate("M", n=4, m=3, seed=2).model_dump())


class ModelTest(unittest.TestCase):
    def setUp(self):
        self.model = mdl.build_H(0.0, [1.0, 1.0])

    def test_save_and_load(self):
        model = mdl.build_example1().with_objective(mdl.Objective(x={0: 1.0}, z={1: -0.5}, constant=2.0))
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "example1.json"
            mdl.save(model, path)
            loaded = mdl.load(path)
        self.assertEqual(loaded.model_dump(), model.model_dump())
        self.assertEqual(loaded.objective.x, {0: 1.0})

    def test_load_errors(self):
        with self.assertRaises(FileNotFoundError):
            mdl.load(path_testfiles / "missing.json")
        with self.assertRaises(ModelSchemaError, msg="version: expected 1, got 2"):
            mdl.load(path_testfiles / "model_version2.json")
        with self.assertRaises(ModelSchemaError, msg="not valid JSON"):
            mdl.load(path_testfiles / "cuts_corrupted.json")
        with self.assertRaises(ModelSchemaError, msg="expected a JSON object, got list"):
            mdl.parse_model([])

    def test_load_fixture(self):
        model = mdl.load(path_testfiles / "condstar_fail.json")
        self.assertEqual(model.family, ProblemFamily.Custom)
        self.assertEqual(model.objective.x, {0: -1.0})

    def test_cross_references(self):
        data = self.model.model_dump(mode="json")
        data["blocks"][1]["y_index"] = 0
        data["blocks"][1]["B"] = [1.0]
        with self.assertRaises(ModelSchemaError) as ctx:
            mdl.parse_model(data)
        self.assertIn("functions[0]: referenced by 2 blocks", str(ctx.exception))

        data = self.model.model_dump(mode="json")
        data["linear"] = [{"x": {"3": 1.0}, "rhs": 1.0}]
        with self.assertRaises(ModelSchemaError) as ctx:
            mdl.parse_model(data)
        self.assertIn("linear[0].x: index 3 out of range", str(ctx.exception))

        data = self.model.model_dump(mode="json")
        data["functions"][0]["c"] = [1.0]
        with self.assertRaises(ModelSchemaError) as ctx:
            mdl.parse_model(data)
        self.assertIn("functions[0]: n=1 differs from model n=2", str(ctx.exception))

    def test_bounds(self):
        with self.assertRaises(ValueError):
            mdl.VarBound(lb=1.0, ub=0.0)
        with self.assertRaises(ValueError):
            mdl.VarBound(lb=0.0, ub=float("inf"))

    def test_inflated(self):
        inflated = self.model.inflated(10.0)
        self.assertEqual(inflated.vars[0].lb, 0.0)
        self.assertEqual(inflated.vars[0].ub, 10.0 * mdl.BOX)

        model = mdl.build_example1(bounds=(-0.5, 2.0)).inflated(3.0)
        self.assertEqual(model.vars[0].lb, -0.5 - 2.0)
        self.assertEqual(model.vars[0].ub, 2.0 + 4.0)

    def test_with_objective_validates(self):
        with self.assertRaises(ValueError):
            self.model.with_objective(mdl.Objective(z={5: 1.0}))
        updated = self.model.with_objective(mdl.Objective(x={0: 1.0}))
        self.assertEqual(updated.objective.x, {0: 1.0})
        self.assertEqual(self.model.objective.x, {})

    def test_pins_ignore_coupled_rows(self):
        model = mdl.build_fractional([1.0], [[1.0]], [1.0], [[1.0]])
        self.assertEqual(model.pins(), {})


if __name__ == "__main__":
    unittest.main()
