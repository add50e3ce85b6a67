import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hsch.littlewood_paley import (
    ANNULUS_INNER,
    ANNULUS_OUTER,
    HARNESS_COLUMNS,
    LEMMAS,
    LOW_OUTER,
    EnsembleSpec,
    NormSpec,
    bernstein_ratio,
    block_l2_norms,
    bony_decompose,
    build_partition,
    dyadic_block,
    fractional_multiplier,
    harness_csv_rows,
    holder_norm,
    inequality_harness,
    lemma_ratio,
    low_pass,
    norm,
    refinement_study,
    smooth_step,
    sobolev_norm,
)
from hsch.spectral import QUADRATIC, SpectralField, TorusGrid, dealiased_product, random_field

TWO_PI = 2 * np.pi


def rand(grid, seed, k_max=None):
    return random_field(grid, np.random.default_rng(seed), slope=-2.0, k_max=k_max)


def const(grid, v=1.0):
    return SpectralField(grid, phys=np.full(grid.shape, v))


def test_smooth_step_is_monotone_and_saturates():
    x = np.linspace(-1, 2, 3001)
    y = smooth_step(x)
    assert np.all(np.diff(y) >= 0)
    assert np.all(y[x <= 0] == 0) and np.all(y[x >= 1] == 1)


@pytest.mark.parametrize("dim,n", [(2, 8), (2, 64), (2, 256), (3, 16)])
def test_partition_of_unity(dim, n):
    part = build_partition(TorusGrid(dim, n))
    assert part.j_max == int(np.ceil(np.log2(n / 2))) + 1
    assert np.max(np.abs(part.weights.sum(axis=0) - 1.0)) <= 1e-14
    assert np.all(part.weights >= 0)


def test_supports():
    g = TorusGrid(2, 128)
    part = build_partition(g)
    r = g.k_norm
    assert np.all(part.chi_hat[r > LOW_OUTER] == 0)
    for j in range(part.j_max + 1):
        w = part.weight(j)
        outside = (r < ANNULUS_INNER * 2**j) | (r > ANNULUS_OUTER * 2**j)
        assert np.all(w[outside] == 0)


def test_dc_mode_and_radius_two():
    g = TorusGrid(2, 32)
    part = build_partition(g)
    assert part.chi_hat[0, 0] == 1.0
    assert np.all(part.phi_hat[:, 0, 0] == 0)
    active = [j for j in part.indices if part.weight(j)[2, 0] > 0]
    assert active == [0, 1]
    with pytest.raises(ValueError):
        part.weight(part.j_max + 1)
    with pytest.raises(ValueError):
        part.weight(-2)


def test_partition_is_cached_per_grid():
    assert build_partition(TorusGrid(2, 32)) is build_partition(TorusGrid(2, 32))


def test_blocks_of_constant():
    g = TorusGrid(2, 16)
    part = build_partition(g)
    c = const(g, 0.7)
    np.testing.assert_array_equal(dyadic_block(c, -1, part).phys, c.phys)
    for j in range(part.j_max + 1):
        assert dyadic_block(c, j, part).max_abs() == 0.0
        np.testing.assert_allclose(low_pass(c, j, part).phys, c.phys, atol=1e-16)


@pytest.mark.parametrize("dim,n", [(2, 64), (3, 16)])
def test_reconstruction(dim, n):
    g = TorusGrid(dim, n)
    part = build_partition(g)
    f = SpectralField(g, phys=np.random.default_rng(dim).standard_normal(g.shape))
    total = sum((dyadic_block(f, j, part) for j in part.indices), start=f * 0.0)
    assert (total - f).l2_norm() <= 1e-12 * max(1.0, f.l2_norm())
    assert (low_pass(f, part.j_max + 1, part) - f).l2_norm() <= 1e-12


def test_low_pass_examples():
    g = TorusGrid(2, 32)
    part = build_partition(g)
    f = rand(g, 1)
    np.testing.assert_array_equal(low_pass(f, 0, part).spec, dyadic_block(f, -1, part).spec)
    s3 = sum((dyadic_block(f, k, part) for k in range(-1, 3)), start=f * 0.0)
    assert (low_pass(f, 3, part) - s3).max_abs() <= 1e-15
    assert low_pass(f, -1, part).max_abs() == 0.0


def test_distant_blocks_are_disjoint():
    g = TorusGrid(2, 128)
    part = build_partition(g)
    f = rand(g, 2)
    for j in part.indices:
        for jp in part.indices:
            if abs(j - jp) >= 2:
                assert dyadic_block(dyadic_block(f, j, part), jp, part).max_abs() == 0.0


def test_h0_norm_within_overlap_of_l2():
    g = TorusGrid(2, 64)
    part = build_partition(g)
    for seed in range(10):
        f = rand(g, seed)
        h0 = sobolev_norm(f, 0.0, part)
        l2 = f.l2_norm()
        # sum_j w_j^2 lies in [1/2, 1] because at most two weights overlap
        assert l2 / np.sqrt(2) - 1e-14 <= h0 <= l2 * (1 + 1e-14)


def test_constant_has_unit_norm_in_every_space():
    g = TorusGrid(2, 32)
    part = build_partition(g)
    one = const(g)
    for s in (-1.0, 0.0, 2.5):
        assert sobolev_norm(one, s, part) == pytest.approx(1.0, abs=1e-15)
        assert norm(one, NormSpec("besov_B_s_2_inf", s), part) == pytest.approx(1.0, abs=1e-15)
    assert holder_norm(one, 0.5, part) == pytest.approx(1.0, abs=1e-15)
    assert norm(one, NormSpec("lebesgue_Linf"), part) == 1.0


def test_besov_bounded_by_sobolev():
    g = TorusGrid(2, 32)
    part = build_partition(g)
    rng = np.random.default_rng(3)
    for _ in range(100):
        f = random_field(g, rng, slope=-1.5)
        s = float(rng.uniform(-1, 3))
        assert norm(f, NormSpec("besov_B_s_2_inf", s), part) <= sobolev_norm(f, s, part) * (1 + 1e-14)


@pytest.mark.parametrize("alpha", [0.0, 1.0, -0.3, 1.5])
def test_holder_exponent_rejected(alpha):
    with pytest.raises(ValueError):
        NormSpec("holder_C_alpha", alpha)


def test_unknown_space_rejected():
    with pytest.raises(ValueError):
        NormSpec("sobolev_Wkp", 1.0)


def test_bony_with_constant_factor():
    g = TorusGrid(2, 32)
    part = build_partition(g)
    f = rand(g, 4, k_max=10)
    one = const(g, 2.0)
    tfg, tgf, rem = bony_decompose(f, one, part)
    assert tfg.max_abs() == 0.0
    assert (tfg + tgf + rem - f * 2.0).l2_norm() <= 1e-12


def test_bony_cosine_square():
    g = TorusGrid(2, 32)
    part = build_partition(g)
    x = g.coordinates()
    c = SpectralField(g, phys=np.cos(TWO_PI * x[0]))
    parts = bony_decompose(c, c, part)
    total = parts[0] + parts[1] + parts[2]
    np.testing.assert_allclose(total.phys, 0.5 + 0.5 * np.cos(2 * TWO_PI * x[0]), atol=1e-12)


def test_bony_reconstructs_dealiased_product_and_is_bilinear():
    g = TorusGrid(2, 64)
    part = build_partition(g)
    f, h = rand(g, 5), rand(g, 6)
    parts = bony_decompose(f, h, part)
    prod = dealiased_product([f, h], QUADRATIC)
    assert (parts[0] + parts[1] + parts[2] - prod).l2_norm() <= 1e-10
    scaled = bony_decompose(f * 3.0, h, part)
    for a, b in zip(scaled, parts):
        assert (a - b * 3.0).max_abs() <= 1e-13


def test_fractional_multiplier():
    g = TorusGrid(2, 32)
    x = g.coordinates()
    f = rand(g, 7)
    np.testing.assert_array_equal(fractional_multiplier(f, 0.0).spec, f.spec)
    np.testing.assert_allclose(fractional_multiplier(const(g), 3.3).phys, 1.0, atol=1e-15)
    c = SpectralField(g, phys=np.cos(TWO_PI * x[0]))
    np.testing.assert_allclose(fractional_multiplier(c, 2.0).phys, 2 * c.phys, atol=1e-14)
    back = fractional_multiplier(fractional_multiplier(f, 1.7), -1.7)
    assert (back - f).max_abs() <= 1e-12


def test_fractional_multiplier_isometry_up_to_overlap():
    g = TorusGrid(2, 64)
    part = build_partition(g)
    for seed in range(5):
        f = rand(g, seed)
        t, s = 2.0, 1.5
        a = sobolev_norm(fractional_multiplier(f, s), t - s, part)
        b = sobolev_norm(f, t, part)
        assert 0.5 <= a / b <= 2.0


def test_bernstein_single_mode():
    g = TorusGrid(2, 64)
    part = build_partition(g)
    x = g.coordinates()
    for j in range(0, 5):
        f = SpectralField(g, phys=np.cos(TWO_PI * 2**j * x[0]))
        blk = dyadic_block(f, j, part)
        grad = SpectralField(g, spec=g.grad_symbol * blk.spec)
        ratio = grad.l2_norm() / (2**j * blk.l2_norm())
        assert ratio == pytest.approx(TWO_PI, rel=1e-13)
        assert 1.5 * np.pi <= bernstein_ratio(f, part) <= 16 * np.pi / 3


def test_harness_trivial_cases():
    g = TorusGrid(2, 32)
    part = build_partition(g)
    f = rand(g, 8, k_max=10)
    h = rand(g, 9, k_max=10)
    assert lemma_ratio("commutator_6_4", const(g, 1.7), h, 1.5, part) <= 1e-14
    assert lemma_ratio("product_6_2", f, const(g), 1.5, part) <= 1.0 + 1e-12
    with pytest.raises(ValueError):
        lemma_ratio("lemma_9_9", f, h, 1.0, part)
    with pytest.raises(ValueError):
        inequality_harness("lemma_9_9", EnsembleSpec(count=1), g)


@pytest.mark.parametrize("lemma", LEMMAS)
def test_harness_reports_finite_positive_ratios(lemma):
    rep = inequality_harness(lemma, EnsembleSpec(count=5, seed=3), TorusGrid(2, 32))
    assert rep.samples == 5
    assert np.all(np.isfinite(rep.ratios)) and np.all(rep.ratios > 0)
    assert rep.median_ratio <= rep.max_ratio


def test_harness_is_seeded():
    g = TorusGrid(2, 32)
    a = inequality_harness("product_6_2", EnsembleSpec(count=4, seed=11), g)
    b = inequality_harness("product_6_2", EnsembleSpec(count=4, seed=11), g)
    np.testing.assert_array_equal(a.ratios, b.ratios)


def test_refinement_study_and_csv():
    ens = EnsembleSpec(count=8, seed=1)
    verdict = refinement_study("product_6_2", ens, (16, 32))
    assert len(verdict.reports) == 2
    rows = harness_csv_rows(verdict.reports)
    assert rows[0] == ",".join(HARNESS_COLUMNS)
    fields = rows[1].split(",")
    assert fields[0] == "product_6_2" and fields[2] == "16" and fields[3] == "8"
    assert float(fields[4]) == verdict.reports[0].max_ratio


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31), logn=st.integers(3, 7))
def test_reconstruction_property(seed, logn):
    g = TorusGrid(2, 2**logn)
    part = build_partition(g)
    f = SpectralField(g, phys=np.random.default_rng(seed).standard_normal(g.shape))
    blocks = block_l2_norms(f, part)
    assert np.all(blocks >= 0)
    total = sum((dyadic_block(f, j, part) for j in part.indices), start=f * 0.0)
    assert (total - f).l2_norm() <= 1e-12 * f.l2_norm()
