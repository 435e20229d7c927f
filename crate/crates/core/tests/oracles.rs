//! Exact rational oracles: Gram–Schmidt on moment sequences in `BigRational`,
//! compared with the floating-point pipeline.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use polygeom::geometry::{
    gram_matrix, sobolev_gram_interval, BasisLabel, FourierCoefficients, GeometrySpec, GramMatrix, WeightRepr,
};
use polygeom::numerics::DenseMatrix;
use polygeom::ortho::{jacobi_coefficients, multiplication_matrix, orthonormalize};
use polygeom::Tolerances;

type Q = BigRational;

fn q(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

fn f(x: &Q) -> f64 {
    x.to_f64().unwrap()
}

/// `∫_a^b x^k w(x) dx` for a polynomial weight with rational coefficients and integer endpoints.
fn moments(a: i64, b: i64, weight: &[Q], count: usize) -> Vec<Q> {
    (0..count)
        .map(|k| {
            weight.iter().enumerate().fold(Q::zero(), |acc, (j, c)| {
                let p = (k + j + 1) as u32;
                let antider = |x: i64| Q::from_integer(BigInt::from(x).pow(p)) / Q::from_integer(BigInt::from(p));
                acc + c * (antider(b) - antider(a))
            })
        })
        .collect()
}

fn inner(p: &[Q], r: &[Q], mu: &[Q]) -> Q {
    let mut s = Q::zero();
    for (i, pi) in p.iter().enumerate() {
        for (j, rj) in r.iter().enumerate() {
            s += pi * rj * &mu[i + j];
        }
    }
    s
}

/// Monic orthogonal polynomials `π_0..π_n` and their squared norms.
fn monic_orthogonal(mu: &[Q], n: usize) -> (Vec<Vec<Q>>, Vec<Q>) {
    let mut polys: Vec<Vec<Q>> = Vec::new();
    let mut norms: Vec<Q> = Vec::new();
    for k in 0..=n {
        let mut p = vec![Q::zero(); k + 1];
        p[k] = Q::one();
        let xk = p.clone();
        for (pj, hj) in polys.iter().zip(&norms) {
            let c = inner(&xk, pj, mu) / hj;
            for (i, v) in pj.iter().enumerate() {
                p[i] -= &c * v;
            }
        }
        norms.push(inner(&p, &p, mu));
        polys.push(p);
    }
    (polys, norms)
}

fn tol() -> Tolerances {
    Tolerances::default()
}

#[test]
fn monomial_gram_matches_rational_moments() {
    let spec = GeometrySpec::interval_uniform(-1.0, 1.0).unwrap();
    let g = gram_matrix(&spec, 6).unwrap();
    let mu = moments(-1, 1, &[Q::one()], 13);
    for i in 0..=6 {
        for j in 0..=6 {
            assert!((g.entries[(i, j)].re - f(&mu[i + j])).abs() < 1e-15);
            assert_eq!(g.entries[(i, j)].im, 0.0);
        }
    }
}

#[test]
fn legendre_coefficients_from_exact_moments() {
    let n = 5;
    let mu = moments(-1, 1, &[Q::one()], 2 * n + 1);
    let spec = GeometrySpec::interval_uniform(-1.0, 1.0).unwrap();
    let template = gram_matrix(&spec, n).unwrap();
    let exact = GramMatrix {
        entries: DenseMatrix::from_fn(n + 1, n + 1, |i, j| f(&mu[i + j]).into()).unwrap(),
        ..template
    };
    let basis = orthonormalize(&exact, &tol()).unwrap();
    let (polys, norms) = monic_orthogonal(&mu, n);
    for k in 0..=n {
        let scale = 1.0 / f(&norms[k]).sqrt();
        for (i, c) in polys[k].iter().enumerate() {
            let got = basis.coefficients[(i, k)];
            assert!(
                (got.re - f(c) * scale).abs() < 1e-12,
                "k={k} i={i}: {got} vs {}",
                f(c) * scale
            );
            assert!(got.im.abs() < 1e-15);
        }
    }
    // p_2 = √(5/2)(3x² - 1)/2
    let c = (2.5f64).sqrt() / 2.0;
    assert!((basis.coefficients[(2, 2)].re - 3.0 * c).abs() < 1e-12);
    assert!((basis.coefficients[(0, 2)].re + c).abs() < 1e-12);
}

#[test]
fn jacobi_coefficients_match_rational_recurrence() {
    // w = 1 and w = 2 + x on [-1, 1]
    for weight in [vec![q(1, 1)], vec![q(2, 1), q(1, 1)]] {
        let n = 5;
        let mu = moments(-1, 1, &weight, 2 * n + 3);
        let (polys, norms) = monic_orthogonal(&mu, n);
        let spec =
            GeometrySpec::interval_weighted(-1.0, 1.0, WeightRepr::Polynomial(weight.iter().map(f).collect())).unwrap();
        let jac = jacobi_coefficients(&multiplication_matrix(&spec, n, &tol()).unwrap(), &tol()).unwrap();
        for k in 1..=n {
            let expected = (f(&(&norms[k] / &norms[k - 1]))).sqrt();
            assert!((jac.a[k - 1] - expected).abs() < 1e-12, "a_{k}");
        }
        for k in 0..=n {
            let mut xp = vec![Q::zero()];
            xp.extend(polys[k].iter().cloned());
            let expected = f(&(inner(&xp, &polys[k], &mu) / &norms[k]));
            assert!((jac.b[k] - expected).abs() < 1e-12, "b_{k}");
        }
    }
}

#[test]
fn sobolev_closed_form_matches_rational() {
    // λ = (1, 1/2, 1/4) on [0, 2]
    let lambdas = [q(1, 1), q(1, 2), q(1, 4)];
    let n = 5;
    let g = sobolev_gram_interval(0.0, 2.0, &lambdas.iter().map(f).collect::<Vec<_>>(), n).unwrap();
    let mu = moments(0, 2, &[Q::one()], 2 * n + 1);
    let falling = |i: usize, k: usize| -> Q { (0..k).fold(Q::one(), |acc, t| acc * q((i - t) as i64, 1)) };
    for i in 0..=n {
        for j in 0..=n {
            let mut exact = Q::zero();
            for (k, l) in lambdas.iter().enumerate() {
                if i >= k && j >= k {
                    exact += l * falling(i, k) * falling(j, k) * &mu[i + j - 2 * k];
                }
            }
            let got = g.entries[(i, j)].re;
            assert!((got - f(&exact)).abs() <= 1e-13 * f(&exact).abs().max(1.0), "({i},{j})");
        }
    }
    assert_eq!(g.labels[3], BasisLabel::Monomial(3));
}

#[test]
fn circle_gram_is_toeplitz_plus_diagonal() {
    let w = FourierCoefficients::real(&[1.0, 0.25, 0.1]).unwrap();
    let lambda = 0.375;
    let spec = GeometrySpec::circle(w.clone(), lambda).unwrap();
    let g = gram_matrix(&spec, 3).unwrap();
    for (i, li) in g.labels.iter().enumerate() {
        for (j, lj) in g.labels.iter().enumerate() {
            let (BasisLabel::Fourier(m), BasisLabel::Fourier(k)) = (*li, *lj) else {
                panic!()
            };
            let mut expected = w.coefficient(m - k);
            if m == k {
                expected += lambda * (k * k) as f64;
            }
            assert_eq!(g.entries[(i, j)], expected, "({m},{k})");
        }
    }
}
