use num_complex::Complex64;
use polygeom::circle::{opuc_basis, sobolev_opuc_basis};
use polygeom::geometry::{circle_gram_entries, gram_matrix, FourierCoefficients, GeometrySpec, WeightFunction};
use polygeom::laplacian::{assemble_laplacian, band_profile};
use polygeom::numerics::{
    cholesky_hpd, hermitian_eigh, inverse_hpd, operator_norm, operator_norm_via_gram, polar_unitary, DenseMatrix,
};
use polygeom::ortho::{orthonormalize, projector, reproducing_kernel};
use polygeom::quadrature::uniform_angles;
use polygeom::resolvent::{basis_alignment, kernel_distance, resolvent_distance, weyl_gap};
use polygeom::Tolerances;
use proptest::collection::vec;
use proptest::prelude::*;

fn tol() -> Tolerances {
    Tolerances::default()
}

fn square(n: usize, data: &[f64]) -> DenseMatrix {
    DenseMatrix::from_fn(n, n, |i, j| {
        Complex64::new(data[2 * (i * n + j)], data[2 * (i * n + j) + 1])
    })
    .unwrap()
}

fn matrix_strategy(max: usize) -> impl Strategy<Value = DenseMatrix> {
    (1..=max).prop_flat_map(|n| vec(-1.0..1.0f64, 2 * n * n).prop_map(move |d| square(n, &d)))
}

fn pair_strategy(max: usize) -> impl Strategy<Value = (DenseMatrix, DenseMatrix)> {
    (1..=max).prop_flat_map(|n| {
        (vec(-1.0..1.0f64, 2 * n * n), vec(-1.0..1.0f64, 2 * n * n))
            .prop_map(move |(a, b)| (square(n, &a), square(n, &b)))
    })
}

fn hpd(a: &DenseMatrix) -> DenseMatrix {
    &(&a.adjoint() * a) + &DenseMatrix::identity(a.nrows()).scale(0.1)
}

/// Trigonometric weights with `ŵ(0) = 1` and `Σ|ŵ(k)| ≤ 0.45`, so `w ≥ 0.1`.
fn circle_weight() -> impl Strategy<Value = FourierCoefficients> {
    vec((-1.0..1.0f64, -1.0..1.0f64), 0..=3).prop_map(|raw| {
        let total: f64 = raw.iter().map(|(a, b)| a.hypot(*b)).sum::<f64>().max(1.0);
        let mut c = vec![Complex64::new(1.0, 0.0)];
        c.extend(raw.iter().map(|(a, b)| Complex64::new(*a, *b) * (0.45 / total)));
        FourierCoefficients::new(c).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn cholesky_reconstructs(a in matrix_strategy(10)) {
        let g = hpd(&a);
        let l = cholesky_hpd(&g, &tol()).unwrap();
        prop_assert!((&(&l * &l.adjoint()) - &g).max_abs() <= 1e-12 * g.max_abs());
        for i in 0..l.nrows() {
            prop_assert!(l[(i, i)].re > 0.0 && l[(i, i)].im == 0.0);
            for j in i + 1..l.ncols() {
                prop_assert_eq!(l[(i, j)], Complex64::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn polar_factor_is_unitary_and_recovered(a in matrix_strategy(8), b in matrix_strategy(8)) {
        let n = a.nrows().min(b.nrows());
        // random matrices are invertible with probability one; skip the rest
        let Ok(u0) = polar_unitary(&a.block(0, 0, n, n), &tol()) else { return Ok(()) };
        prop_assert!((&(&u0.adjoint() * &u0) - &DenseMatrix::identity(n)).max_abs() < 1e-12);
        let p = hpd(&b.block(0, 0, n, n));
        let u = polar_unitary(&(&u0 * &p), &tol()).unwrap();
        prop_assert!((&u - &u0).max_abs() < 1e-9);
    }

    #[test]
    fn operator_norm_agrees_with_gram_route(a in matrix_strategy(12)) {
        let x = operator_norm(&a);
        let y = operator_norm_via_gram(&a);
        prop_assert!((x - y).abs() <= 1e-10 * x.max(1.0));
        prop_assert!(x <= a.frobenius_norm() * (1.0 + 1e-12));
        prop_assert!(x >= a.max_abs() * (1.0 - 1e-12));
    }

    #[test]
    fn weyl_gap_and_compression_contract((a, b) in pair_strategy(12), mask in vec(any::<bool>(), 12)) {
        let n = a.nrows();
        let r1 = inverse_hpd(&(&DenseMatrix::identity(n) + &(&a.adjoint() * &a)), &tol()).unwrap();
        let r2 = inverse_hpd(&(&DenseMatrix::identity(n) + &(&b.adjoint() * &b)), &tol()).unwrap();
        let diff = operator_norm(&(&r1 - &r2));
        prop_assert!(weyl_gap(&r1, &r2, &tol()).unwrap() <= diff + 1e-12);
        let u = polar_unitary(&a, &tol());
        let Ok(u) = u else { return Ok(()) };
        let d = DenseMatrix::from_real_diagonal(&mask[..n].iter().map(|&m| f64::from(u8::from(m))).collect::<Vec<_>>()).unwrap();
        let p = &(&u * &d) * &u.adjoint();
        let compressed = operator_norm(&(&(&p * &(&r1 - &r2)) * &p));
        prop_assert!(compressed <= diff + 1e-12);
    }

    #[test]
    fn banded_products_double_bandwidth(r in 1usize..=4, n in 5usize..=40, data in vec(-1.0..1.0f64, 2 * 40 * 40)) {
        let b = DenseMatrix::from_fn(n, n, |i, j| {
            if i.abs_diff(j) <= r { Complex64::new(data[2 * (i * n + j)], data[2 * (i * n + j) + 1]) } else { Complex64::new(0.0, 0.0) }
        }).unwrap();
        let profile = band_profile(&(&b.adjoint() * &b), &tol());
        prop_assert!(profile.bandwidth <= 2 * r);
    }

    #[test]
    fn weighted_circle_gram_is_banded_toeplitz(w in circle_weight(), n in 2usize..=6) {
        let g = circle_gram_entries(&w, 0.0, n);
        let r = (1..=w.degree()).rev().find(|&k| w.coefficient(k as i64).norm() > 0.0).unwrap_or(0);
        let labels: Vec<i64> = (-(n as i64)..=n as i64).collect();
        let mut width = 0;
        for (i, m) in labels.iter().enumerate() {
            for (j, k) in labels.iter().enumerate() {
                if g[(i, j)].norm() > 0.0 {
                    width = width.max(m.abs_diff(*k) as usize);
                }
                prop_assert_eq!(g[(i, j)], w.coefficient(m - k));
            }
        }
        prop_assert_eq!(width, r.min(2 * n));
    }

    #[test]
    fn circle_gram_sandwich(w in circle_weight(), lambda in 0.0..3.0f64, n in 1usize..=6) {
        let weight = WeightFunction::trigonometric(w.clone()).unwrap();
        let (lo, hi) = weight.bounds();
        let plain = hermitian_eigh(&circle_gram_entries(&w, 0.0, n), &tol()).unwrap().eigenvalues;
        prop_assert!(plain[0] >= lo - 1e-10 && plain[plain.len() - 1] <= hi + 1e-10);
        let sob = hermitian_eigh(&circle_gram_entries(&w, lambda, n), &tol()).unwrap().eigenvalues;
        prop_assert!(sob[0] >= lo - 1e-10);
    }

    #[test]
    fn projector_is_idempotent(w in circle_weight(), lambda in 0.0..2.0f64, n in 1usize..=4) {
        let spec = GeometrySpec::circle(w, lambda).unwrap();
        let g = gram_matrix(&spec, n + 3).unwrap();
        let p = projector(&g, n, &tol()).unwrap();
        prop_assert!((&(&p * &p) - &p).max_abs() < 1e-10);
        // self-adjoint in the geometry's inner product: G P = P* G
        prop_assert!((&(&g.entries * &p) - &(&p.adjoint() * &g.entries)).max_abs() < 1e-10);
    }

    #[test]
    fn laplacian_is_factored_psd(w in circle_weight(), lambda in 0.0..2.0f64, n in 1usize..=5) {
        let spec = GeometrySpec::circle(w, lambda).unwrap();
        let basis = orthonormalize(&gram_matrix(&spec, n).unwrap(), &tol()).unwrap();
        let lap = assemble_laplacian(&basis);
        prop_assert!(lap.factorization_residual() < 1e-10);
        let ev = lap.eigenvalues(&tol()).unwrap();
        prop_assert!(ev[0] >= -1e-10);
    }

    #[test]
    fn gauge_rotation_is_undone(w in circle_weight(), data in vec(-1.0..1.0f64, 2 * 9 * 9), n in 0usize..=4) {
        let basis = opuc_basis(&w, n, &tol()).unwrap();
        let Ok(v) = polar_unitary(&square(basis.dimension(), &data), &tol()) else { return Ok(()) };
        let rotated = basis.rotated(&v);
        let alignment = basis_alignment(&basis, &rotated, &basis.gram.entries, &tol()).unwrap();
        prop_assert!(alignment.residual_g1 < 1e-10 && alignment.residual_flat < 1e-10);
        prop_assert!((&alignment.unitary - &v.adjoint()).max_abs() < 1e-10);
        let points = uniform_angles(16);
        prop_assert!(kernel_distance(&basis, &rotated, &points) < 1e-10);
    }

    #[test]
    fn kernel_reproduces_polynomials(w in circle_weight(), n in 1usize..=5) {
        let basis = opuc_basis(&w, n, &tol()).unwrap();
        let ys = uniform_angles(4 * n + 4 * w.degree() + 8);
        let xs = [0.3, 1.7, 4.0];
        let k = reproducing_kernel(&basis, &xs, &ys);
        let weights: Vec<f64> = ys.iter().map(|&y| w.evaluate(y)).collect();
        for j in 0..basis.dimension() {
            let values: Vec<Complex64> = ys.iter().map(|&y| basis.evaluate(y)[j]).collect();
            for (i, &x) in xs.iter().enumerate() {
                let integral: Complex64 = (0..ys.len()).map(|t| k.values[(i, t)] * values[t] * weights[t]).sum::<Complex64>()
                    / ys.len() as f64;
                prop_assert!((integral - basis.evaluate(x)[j]).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn sobolev_opuc_tend_to_opuc(w in circle_weight(), n in 1usize..=4) {
        let plain = opuc_basis(&w, n, &tol()).unwrap();
        let mut previous = f64::INFINITY;
        for lambda in [1e-2, 1e-4, 1e-6] {
            let s = sobolev_opuc_basis(&w, lambda, n, &tol()).unwrap();
            let diff = (&s.coefficients - &plain.coefficients).max_abs();
            prop_assert!(diff < previous);
            prop_assert!(diff <= 10.0 * (n.pow(2) as f64) * lambda);
            previous = diff;
        }
    }
}

#[test]
fn metric_axioms_on_circle_geometries() {
    let w = FourierCoefficients::cosine(1.0, 0.5);
    let specs = [
        GeometrySpec::circle(w.clone(), 0.0).unwrap(),
        GeometrySpec::circle(w.clone(), 1e-2).unwrap(),
        GeometrySpec::circle(w, 1e-1).unwrap(),
        GeometrySpec::circle(FourierCoefficients::constant(1.0), 0.0).unwrap(),
        GeometrySpec::circle(FourierCoefficients::real(&[1.0, 0.2, -0.1]).unwrap(), 0.3).unwrap(),
    ];
    let (n, m) = (3, 24);
    let mut d = [[0.0; 5]; 5];
    for i in 0..5 {
        for j in 0..5 {
            d[i][j] = resolvent_distance(&specs[i], &specs[j], n, m, &tol()).unwrap();
        }
    }
    for i in 0..5 {
        assert_eq!(d[i][i], 0.0);
        for j in 0..5 {
            assert!((d[i][j] - d[j][i]).abs() <= 1e-12);
            for k in 0..5 {
                assert!(d[i][k] <= d[i][j] + d[j][k] + 1e-10);
            }
        }
    }
}

#[test]
fn gram_projector_stable_under_rescaling() {
    let spec = GeometrySpec::interval_uniform(-1.0, 1.0).unwrap();
    let g = gram_matrix(&spec, 6).unwrap();
    let p = projector(&g, 3, &tol()).unwrap();
    let q = projector(&g.scaled(7.5), 3, &tol()).unwrap();
    assert!((&p - &q).max_abs() < 1e-10);
}
