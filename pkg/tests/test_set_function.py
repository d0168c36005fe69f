import math
import unittest

import numpy as np

import cmbx.set_function as sf
from cmbx.exceptions import CapacityError, StructureError
from cmbx.members import Extremum


def _pairwise_holds(table: np.ndarray, n: int) -> bool:
    # f(A) + f(B) >= f(A | B) + f(A & B) for every pair of subsets
    masks = np.arange(1 << n)
    gap = table[masks[:, None] | masks[None, :]] + table[masks[:, None] & masks[None, :]]
    gap = gap - table[:, None] - table[None, :]
    return not bool((gap > 1e-9).any())


class SetFunctionTest(unittest.TestCase):
    def setUp(self):
        self.f = sf.SqrtAffine(sigma=0.0, c=[1.0, 1.0])

    def test_members_and_characteristic(self):
        self.assertEqual(sf.members(0), [])
        self.assertEqual(sf.members(0b1011), [1, 2, 4])
        self.assertEqual(sf.characteristic(0b101, 4).tolist(), [1, 0, 1, 0])
        self.assertEqual(sf.bitmasks(np.array([[1, 0, 1], [0, 1, 1]])).tolist(), [5, 6])

    def test_subset_rows_in_bitmask_order(self):
        rows = sf.subset_rows(3)
        self.assertEqual(rows.shape, (8, 3))
        self.assertEqual(sf.bitmasks(rows).tolist(), list(range(8)))

    def test_evaluate(self):
        self.assertEqual(sf.evaluate(self.f, 0), 0.0)
        self.assertEqual(sf.evaluate(self.f, 0b01), 1.0)
        self.assertAlmostEqual(sf.evaluate(self.f, 0b11), math.sqrt(2.0), places=15)
        self.assertAlmostEqual(sf.evaluate_point(self.f, [1, 1]), math.sqrt(2.0), places=15)

        with self.assertRaises(ValueError, msg="subset 4 is not a bitmask over 2 variables"):
            sf.evaluate(self.f, 4)
        with self.assertRaises(ValueError):
            sf.evaluate_point(self.f, [1, 0, 1])

    def test_values_agree_with_evaluate(self):
        f = sf.ConcaveOfAffine(g="log1p", sigma=0.5, c=[0.3, 1.2, 2.0])
        table = sf.values(f)
        for mask in range(8):
            self.assertAlmostEqual(table[mask], sf.evaluate(f, mask), places=14)

    def test_families(self):
        power = sf.ConcaveOfAffine(g="power", rho=0.5, sigma=1.0, c=[3.0])
        self.assertAlmostEqual(sf.evaluate(power, 1), 2.0)

        pnorm = sf.PNormAugmented(p=2.0, eta2=1, n=3)
        self.assertAlmostEqual(sf.evaluate(pnorm, 0), 1.0)
        self.assertAlmostEqual(sf.evaluate(pnorm, 0b111), 2.0)

        decay = sf.ExpDecay(alpha=0.5, n=2)
        self.assertAlmostEqual(sf.evaluate(decay, 0b11), math.exp(-1.0))

        aicc = sf.AiccDecay(alpha=4.0, n=2)
        self.assertAlmostEqual(sf.evaluate(aicc, 0b01), math.exp(-8.0 / 3.0))

    def test_invalid_parameters(self):
        with self.assertRaises(ValueError, msg="g='power' needs an exponent rho in (0, 1)"):
            sf.ConcaveOfAffine(g="power", c=[1.0])
        with self.assertRaises(ValueError, msg="AICc decay needs alpha > n"):
            sf.AiccDecay(alpha=2.0, n=2)
        with self.assertRaises(ValueError):
            sf.SqrtAffine(sigma=-1.0, c=[1.0])
        with self.assertRaises(StructureError, msg="Table needs 2^n values"):
            sf.evaluate(sf.Table(values=[0.0, 1.0, 2.0]), 0)

    def test_capacity(self):
        big = sf.PNormAugmented(p=2.0, n=sf.TABLE_LIMIT + 1)
        with self.assertRaises(CapacityError):
            sf.values(big)
        # single evaluations stay available beyond the table bound
        self.assertAlmostEqual(sf.evaluate(big, 0), 1.0)
        with self.assertRaises(CapacityError):
            sf.check_submodular(sf.PNormAugmented(p=2.0, n=sf.CHECK_LIMIT + 1))

    def test_check_submodular(self):
        self.assertIsNone(sf.check_submodular(self.f))
        for p in (1.5, 2.0, 3.0):
            self.assertIsNone(sf.check_submodular(sf.PNormAugmented(p=p, eta2=1, n=6)))
            self.assertIsNone(sf.check_submodular(sf.PNormAugmented(p=p, eta2=0, n=6)))

        found = sf.check_submodular(sf.Table(values=[0.0, 1.0, 1.0, 3.0]))
        self.assertEqual(found.first, [1])
        self.assertEqual(found.second, [2])
        self.assertAlmostEqual(found.gap, 1.0)

    def test_check_submodular_on_product_table(self):
        # z1 z2 is supermodular
        found = sf.check_submodular(sf.Table(values=[0.0, 0.0, 0.0, 1.0]))
        self.assertEqual(found.first, [1])
        self.assertEqual(found.second, [2])
        self.assertAlmostEqual(found.gap, 1.0)

    def test_sqrt_affine_is_submodular(self):
        rng = np.random.default_rng(7)
        for trial in range(100):
            n = int(rng.integers(1, 9))
            f = sf.SqrtAffine(sigma=float(rng.uniform(0.0, 3.0)), c=rng.uniform(0.0, 5.0, n).tolist())
            self.assertIsNone(sf.check_submodular(f), msg=f"trial {trial}: {f}")

    def test_marginal_form_matches_pairwise_definition(self):
        rng = np.random.default_rng(11)
        verdicts = set()
        for trial in range(200):
            n = int(rng.integers(1, 7))
            if trial % 2:
                values = rng.integers(0, 5, 1 << n).astype(float)
            else:
                # concave of the cardinality plus a modular part, submodular by construction
                steps = np.sort(rng.integers(0, 4, n))[::-1]
                concave = np.concatenate([[0], np.cumsum(steps)])
                rows = sf.subset_rows(n)
                values = concave[rows.sum(axis=1)] + rows @ rng.integers(-3, 4, n)
            pairwise = _pairwise_holds(np.asarray(values, dtype=float), n)
            marginal = sf.check_submodular(sf.Table(values=np.asarray(values, dtype=float).tolist())) is None
            self.assertEqual(marginal, pairwise, msg=f"trial {trial}: {values}")
            verdicts.add(marginal)
        self.assertEqual(verdicts, {True, False})

    def test_check_nonnegative(self):
        self.assertIsNone(sf.check_nonnegative(self.f))
        found = sf.check_nonnegative(sf.Table(values=[1.0, -0.5, 2.0, -3.0]))
        self.assertEqual(found.subset, [1])
        self.assertEqual(found.value, -0.5)

    def test_extremal_value(self):
        table = sf.Table(values=[-1.0, 0.0, 2.0, 1.0])
        self.assertEqual(sf.extremal_value(table), 2.0)
        self.assertEqual(sf.extremal_value(table, Extremum.Min), -1.0)
        self.assertEqual(sf.extremal_value(table, "min"), -1.0)

    def test_complement_of_supermodular_decay(self):
        h = sf.ExpDecay(alpha=0.7, n=4)
        self.assertIsNotNone(sf.check_submodular(h))
        f = sf.to_submodular_complement(h)
        self.assertEqual(f.h_max, 1.0)
        self.assertIsNone(sf.check_submodular(f))
        self.assertIsNone(sf.check_nonnegative(f))
        self.assertEqual(sf.evaluate(f, 0), 0.0)

    def test_complement_of_product_table(self):
        h = sf.Table(values=[0.0, 0.0, 0.0, 1.0])
        self.assertIsNotNone(sf.check_submodular(h))
        f = sf.to_submodular_complement(h)
        self.assertEqual(f.h_max, 1.0)
        self.assertEqual(sf.values(f).tolist(), [1.0, 1.0, 1.0, 0.0])
        self.assertIsNone(sf.check_submodular(f))
        self.assertIsNone(sf.check_nonnegative(f))

    def test_shifts(self):
        f = sf.SqrtAffine(sigma=4.0, c=[5.0])
        self.assertEqual(sf.evaluate(sf.normalized(f), 0), 0.0)
        self.assertEqual(sf.evaluate(sf.normalized(f), 1), 1.0)

        shifted = sf.shift_to_nonnegative(sf.Table(values=[-1.0, 0.0, 2.0, 1.0]))
        self.assertEqual(sf.values(shifted).tolist(), [0.0, 1.0, 3.0, 2.0])
        self.assertIsNone(sf.check_nonnegative(shifted))

    def test_to_table(self):
        table = sf.to_table(self.f)
        self.assertEqual(table.n, 2)
        self.assertEqual(table.values[3], sf.evaluate(self.f, 3))

    def test_parse_spec(self):
        nested = sf.to_submodular_complement(sf.ExpDecay(alpha=0.2, n=3))
        parsed = sf.parse_spec(nested.model_dump())
        self.assertIsInstance(parsed, sf.Complement)
        self.assertIsInstance(parsed.inner, sf.ExpDecay)
        self.assertEqual(parsed, nested)

        with self.assertRaises(ValueError):
            sf.parse_spec({"family": "cubic", "c": [1.0]})


if __name__ == "__main__":
    unittest.main()
