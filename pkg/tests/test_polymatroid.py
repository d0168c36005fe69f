import math
import unittest

import numpy as np

import cmbx.polymatroid as pm
from cmbx.exceptions import CapacityError
from cmbx.set_function import (
    AiccDecay,
    ConcaveOfAffine,
    ExpDecay,
    PNormAugmented,
    SqrtAffine,
    Table,
    evaluate,
    to_submodular_complement,
)

ROOT2 = math.sqrt(2.0)


class PolymatroidTest(unittest.TestCase):
    def setUp(self):
        self.f = SqrtAffine(sigma=0.0, c=[1.0, 1.0])

    def test_vertex_from_permutation(self):
        cut = pm.vertex_from_permutation(self.f, [0, 1])
        np.testing.assert_allclose(cut.pi, [1.0, ROOT2 - 1.0], atol=1e-15)
        self.assertEqual(cut.offset, 0.0)
        self.assertEqual(cut.perm, [0, 1])

        cut = pm.vertex_from_permutation(self.f, (1, 0))
        np.testing.assert_allclose(cut.pi, [ROOT2 - 1.0, 1.0], atol=1e-15)

        with self.assertRaises(ValueError, msg="[0, 0] is not a permutation of range(2)"):
            pm.vertex_from_permutation(self.f, [0, 0])

    def test_vertex_telescopes_to_f(self):
        f = SqrtAffine(sigma=2.0, c=[0.5, 1.5, 3.0, 0.25])
        cut = pm.vertex_from_permutation(f, [2, 0, 3, 1])
        self.assertAlmostEqual(cut.offset + sum(cut.pi), evaluate(f, 0b1111), places=14)
        self.assertAlmostEqual(cut.offset + cut.pi[2], evaluate(f, 0b0100), places=14)

    def test_greedy_order_breaks_ties_by_index(self):
        self.assertEqual(pm.greedy_order(np.array([0.5, 0.5, 0.9])), [2, 0, 1])
        self.assertEqual(pm.greedy_order(np.zeros(3)), [0, 1, 2])

    def test_separate_greedy(self):
        sep = pm.separate_greedy(self.f, [0.5, 0.5], 0.5)
        self.assertTrue(sep.violated)
        self.assertAlmostEqual(sep.value, ROOT2 / 2.0, places=15)
        self.assertEqual(sep.cut.perm, [0, 1])

        sep = pm.separate_greedy(self.f, [0.5, 0.5], 1.0)
        self.assertFalse(sep.violated)

        sep = pm.separate_greedy(self.f, [0.2, 0.7], 0.0)
        self.assertEqual(sep.cut.perm, [1, 0])

    def test_separate_greedy_rejects_bad_points(self):
        with self.assertRaises(ValueError, msg="expected a point of length 2"):
            pm.separate_greedy(self.f, [0.5], 0.0)
        with self.assertRaises(ValueError, msg="point [1.5, 0.0] is outside [0, 1]^2"):
            pm.separate_greedy(self.f, [1.5, 0.0], 0.0)

    def test_lovasz_extension_matches_f_on_binaries(self):
        f = SqrtAffine(sigma=1.0, c=[1.0, 2.0, 3.0])
        self.assertAlmostEqual(pm.lovasz_extension(f, [1.0, 0.0, 1.0]), math.sqrt(5.0), places=14)
        for mask in range(8):
            z = [(mask >> i) & 1 for i in range(3)]
            self.assertAlmostEqual(pm.lovasz_extension(f, z), evaluate(f, mask), places=14)

    def test_greedy_is_the_best_permutation_vertex(self):
        f = PNormAugmented(p=3.0, eta2=1, n=4)
        vertices = pm.permutation_vertices(f)
        self.assertEqual(len(vertices), 24)
        rng = np.random.default_rng(3)
        for _ in range(20):
            z = rng.random(4)
            greedy = pm.separate_greedy(f, z, 0.0).value
            self.assertAlmostEqual(greedy, max(v.value(z) for v in vertices), places=12)

    def test_validate_cut(self):
        self.assertIsNone(pm.validate_cut(self.f, pm.vertex_from_permutation(self.f, [0, 1])))

        found = pm.validate_cut(self.f, pm.GreedyCut(pi=[1.0, 1.0], offset=0.0))
        self.assertEqual(found.subset, [1, 2])
        self.assertAlmostEqual(found.slack, 2.0 - ROOT2, places=15)

        with self.assertRaises(ValueError, msg="cut has 3 coefficients, f has n=2"):
            pm.validate_cut(self.f, pm.GreedyCut(pi=[1.0, 1.0, 1.0], offset=0.0))

    def test_greedy_vertex_of_non_submodular_function_is_invalid(self):
        f = Table(values=[0.0, 1.0, 1.0, 3.0])
        cut = pm.vertex_from_permutation(f, [0, 1])
        self.assertEqual(cut.pi, [1.0, 2.0])
        found = pm.validate_cut(f, cut)
        self.assertEqual(found.subset, [2])
        self.assertEqual(found.slack, 1.0)

    def test_product_table(self):
        # z1 z2: the greedy vertex overshoots f({2}), the only polar vertex is the origin
        f = Table(values=[0.0, 0.0, 0.0, 1.0])
        cut = pm.vertex_from_permutation(f, [0, 1])
        self.assertEqual(cut.pi, [0.0, 1.0])
        found = pm.validate_cut(f, cut)
        self.assertEqual(found.subset, [2])
        self.assertEqual(found.slack, 1.0)

        vertices = pm.enumerate_polar_vertices(f)
        self.assertEqual(len(vertices), 1)
        np.testing.assert_allclose(vertices[0].pi, [0.0, 0.0], atol=1e-12)

    def test_lovasz_extension_is_convex_on_segments(self):
        rng = np.random.default_rng(5)
        for trial in range(30):
            n = int(rng.integers(2, 6))
            f = SqrtAffine(sigma=float(rng.uniform(0.0, 2.0)), c=rng.uniform(0.0, 3.0, n).tolist())
            a, b = rng.random(n), rng.random(n)
            la, lb = pm.lovasz_extension(f, a), pm.lovasz_extension(f, b)
            for t in np.linspace(0.0, 1.0, 11):
                mid = pm.lovasz_extension(f, t * a + (1.0 - t) * b)
                self.assertLessEqual(mid, t * la + (1.0 - t) * lb + 1e-12, msg=f"trial {trial}, t={t}")

    def test_greedy_vertices_of_submodular_families_are_valid(self):
        rng = np.random.default_rng(17)

        def weights(n):
            return rng.uniform(0.0, 3.0, n).tolist()

        families = {
            "sqrt_affine": lambda n: SqrtAffine(sigma=float(rng.uniform(0.0, 2.0)), c=weights(n)),
            "log1p": lambda n: ConcaveOfAffine(g="log1p", sigma=float(rng.uniform(0.0, 2.0)), c=weights(n)),
            "power": lambda n: ConcaveOfAffine(
                g="power", rho=float(rng.uniform(0.1, 0.9)), sigma=float(rng.uniform(0.0, 2.0)), c=weights(n)
            ),
            "pnorm": lambda n: PNormAugmented(p=float(rng.uniform(1.0, 4.0)), eta2=int(rng.integers(0, 2)), n=n),
            "exp_decay": lambda n: to_submodular_complement(ExpDecay(alpha=float(rng.uniform(0.0, 2.0)), n=n)),
            "aicc_decay": lambda n: to_submodular_complement(
                AiccDecay(alpha=float(n + rng.uniform(0.5, 5.0)), n=n)
            ),
        }
        for name, draw in families.items():
            for trial in range(50):
                n = int(rng.integers(1, 7))
                f = draw(n)
                cut = pm.vertex_from_permutation(f, rng.permutation(n))
                self.assertIsNone(pm.validate_cut(f, cut), msg=f"{name} trial {trial}: {f}")

    def test_enumerate_polar_vertices(self):
        vertices = pm.enumerate_polar_vertices(self.f)
        self.assertEqual(len(vertices), 2)
        np.testing.assert_allclose(vertices[0].pi, [1.0, ROOT2 - 1.0], atol=1e-9)
        np.testing.assert_allclose(vertices[1].pi, [ROOT2 - 1.0, 1.0], atol=1e-9)

        vertices = pm.enumerate_polar_vertices(Table(values=[0.0, 1.0, 1.0, 3.0]))
        self.assertEqual(len(vertices), 1)
        np.testing.assert_allclose(vertices[0].pi, [1.0, 1.0])

    def test_polar_vertices_are_the_greedy_vertices_for_submodular_f(self):
        f = SqrtAffine(sigma=0.5, c=[1.0, 2.0, 0.5])
        greedy = {tuple(np.round(v.pi, 9)) for v in pm.permutation_vertices(f)}
        polar = {tuple(np.round(v.pi, 9)) for v in pm.enumerate_polar_vertices(f)}
        self.assertEqual(greedy, polar)

    def test_capacity(self):
        with self.assertRaises(CapacityError):
            pm.permutation_vertices(PNormAugmented(p=2.0, n=pm.BRUTE_FORCE_LIMIT + 1))
        with self.assertRaises(CapacityError):
            pm.enumerate_polar_vertices(PNormAugmented(p=2.0, n=pm.POLAR_LIMIT + 1))
        with self.assertRaises(CapacityError):
            big = PNormAugmented(p=2.0, n=pm.VALIDATE_LIMIT + 1)
            pm.validate_cut(big, pm.GreedyCut(pi=[0.0] * big.n, offset=1.0))

    def test_cut_key_rounds(self):
        a = pm.GreedyCut(pi=[0.1 + 0.2, 1.0], offset=0.0)
        b = pm.GreedyCut(pi=[0.3, 1.0], offset=0.0)
        self.assertEqual(a.key, b.key)


if __name__ == "__main__":
    unittest.main()
