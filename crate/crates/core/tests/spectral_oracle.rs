//! Cross-checks the eigensolver against an independent oracle built from
//! first principles: characteristic polynomial coefficients via the
//! Faddeev-LeVerrier recursion, square-free deflation via Euclidean
//! polynomial GCD, and roots via Durand-Kerner iteration. No QR machinery
//! anywhere on the oracle side.

use nalgebra::DMatrix;
use num_complex::Complex;
use opinionlab_core::graph::{spectral_extrema, AdjacencySpec, GraphKind};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Coefficients of det(xI - A) = x^n + c[1] x^(n-1) + ... + c[n].
fn char_poly(a: &DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    let mut coeffs = vec![1.0];
    let mut m = DMatrix::<f64>::zeros(n, n);
    for k in 1..=n {
        // M_k = A M_{k-1} + c_{k-1} I
        m = a * &m;
        let c_prev = *coeffs.last().unwrap();
        for i in 0..n {
            m[(i, i)] += c_prev;
        }
        let c_k = -(a * &m).trace() / k as f64;
        coeffs.push(c_k);
    }
    coeffs
}

fn poly_eval(coeffs: &[f64], x: Complex<f64>) -> Complex<f64> {
    let mut acc = Complex::new(0.0, 0.0);
    for &c in coeffs {
        acc = acc * x + c;
    }
    acc
}

fn poly_derivative(coeffs: &[f64]) -> Vec<f64> {
    let deg = coeffs.len() - 1;
    coeffs[..deg]
        .iter()
        .enumerate()
        .map(|(i, &c)| c * (deg - i) as f64)
        .collect()
}

/// Remainder of polynomial long division (coefficients highest first).
fn poly_rem(num: &[f64], den: &[f64]) -> Vec<f64> {
    let mut rem = num.to_vec();
    let dd = den.len() - 1;
    let lead = den[0];
    while rem.len() - 1 >= dd && rem.len() > 1 {
        let factor = rem[0] / lead;
        for (i, &d) in den.iter().enumerate() {
            rem[i] -= factor * d;
        }
        rem.remove(0);
    }
    rem
}

fn poly_norm(p: &[f64]) -> f64 {
    p.iter().fold(0.0f64, |m, c| m.max(c.abs()))
}

fn normalize_monic(mut p: Vec<f64>) -> Vec<f64> {
    let lead = p[0];
    for c in &mut p {
        *c /= lead;
    }
    p
}

/// Euclidean GCD with a coefficient-norm cutoff; exact arithmetic is not
/// needed here because the structured test matrices have small integer
/// entries and random matrices have trivial GCD.
fn poly_gcd(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut a = normalize_monic(a.to_vec());
    let mut b = normalize_monic(b.to_vec());
    loop {
        if b.len() == 1 {
            return vec![1.0];
        }
        let mut r = poly_rem(&a, &b);
        // trim numerically-zero leading coefficients
        while r.len() > 1 && r[0].abs() < 1e-8 {
            r.remove(0);
        }
        if r.len() == 1 && r[0].abs() < 1e-8 {
            return b;
        }
        a = b;
        b = normalize_monic(r);
    }
}

/// Quotient a / b assuming (near-)exact divisibility.
fn poly_div(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut rem = a.to_vec();
    let mut quot = Vec::new();
    let dd = b.len() - 1;
    while rem.len() - 1 >= dd {
        let factor = rem[0] / b[0];
        quot.push(factor);
        for (i, &d) in b.iter().enumerate() {
            rem[i] -= factor * d;
        }
        rem.remove(0);
        if rem.is_empty() {
            break;
        }
    }
    quot
}

/// Simultaneous root iteration on a square-free polynomial.
fn durand_kerner(coeffs: &[f64]) -> Vec<Complex<f64>> {
    let n = coeffs.len() - 1;
    if n == 0 {
        return Vec::new();
    }
    let seed = Complex::new(0.4, 0.9);
    let mut roots: Vec<Complex<f64>> = (0..n).map(|k| seed.powu(k as u32 + 1)).collect();
    for _ in 0..800 {
        let mut shift = 0.0f64;
        for i in 0..n {
            let mut denom = Complex::new(1.0, 0.0);
            for j in 0..n {
                if i != j {
                    denom *= roots[i] - roots[j];
                }
            }
            let delta = poly_eval(coeffs, roots[i]) / denom;
            roots[i] -= delta;
            shift = shift.max(delta.norm());
        }
        if shift < 1e-14 {
            break;
        }
    }
    roots
}

/// Distinct roots of the characteristic polynomial, at full accuracy even
/// when the matrix has repeated eigenvalues.
fn oracle_roots(a: &DMatrix<f64>) -> Vec<Complex<f64>> {
    let p = char_poly(a);
    let gcd = poly_gcd(&p, &poly_derivative(&p));
    let square_free = if gcd.len() > 1 {
        normalize_monic(poly_div(&p, &gcd))
    } else {
        p
    };
    durand_kerner(&square_free)
}

fn assert_spectra_match(a: &DMatrix<f64>, label: &str) {
    let summary = spectral_extrema(a).expect("spectral analysis");
    let p = char_poly(a);
    let roots = oracle_roots(a);

    let oracle_max = roots.iter().map(|r| r.re).fold(f64::NEG_INFINITY, f64::max);
    let oracle_min = roots.iter().map(|r| r.re).fold(f64::INFINITY, f64::min);
    assert!(
        (summary.lambda_max - oracle_max).abs() < 1e-9,
        "{label}: lambda_max {} vs oracle {}",
        summary.lambda_max,
        oracle_max
    );
    assert!(
        (summary.lambda_min - oracle_min).abs() < 1e-9,
        "{label}: lambda_min {} vs oracle {}",
        summary.lambda_min,
        oracle_min
    );

    // every solver eigenvalue must (a) sit next to an oracle root and
    // (b) nearly annihilate the characteristic polynomial
    let coeff_scale = poly_norm(&p).max(1.0);
    for lam in &summary.eigenvalues {
        let nearest = roots
            .iter()
            .map(|r| (r - lam).norm())
            .fold(f64::INFINITY, f64::min);
        assert!(
            nearest < 1e-7 * lam.norm().max(1.0),
            "{label}: eigenvalue {lam} missing from oracle root set (distance {nearest:e})"
        );
        let magnitude_scale: f64 = (0..p.len()).map(|k| lam.norm().powi(k as i32)).sum();
        let residual = poly_eval(&p, *lam).norm();
        assert!(
            residual < 1e-6 * coeff_scale * magnitude_scale,
            "{label}: char poly residual {residual:e} at {lam}"
        );
    }
}

#[test]
fn named_families_up_to_eight_agents() {
    for n in 2..=8usize {
        for kind in [GraphKind::Path, GraphKind::Star, GraphKind::AllToAll] {
            let g = AdjacencySpec::build(kind, n, 1.0).unwrap();
            assert_spectra_match(g.entries(), &format!("{}-{n}", kind.as_str()));
        }
    }
    for n in 3..=8usize {
        let g = AdjacencySpec::build(GraphKind::Cycle, n, 1.0).unwrap();
        assert_spectra_match(g.entries(), &format!("cycle-{n}"));
    }
    for n in 4..=8usize {
        let g = AdjacencySpec::build(GraphKind::Wheel, n, 1.0).unwrap();
        assert_spectra_match(g.entries(), &format!("wheel-{n}"));
    }
}

#[test]
fn signed_and_weighted_graphs() {
    let mut m = DMatrix::zeros(5, 5);
    let clusters: [&[usize]; 2] = [&[0, 1], &[2, 3, 4]];
    for (p, cp) in clusters.iter().enumerate() {
        for &i in cp.iter() {
            for &k in cp.iter() {
                if i != k {
                    m[(i, k)] = -1.0;
                }
            }
            let other = clusters[1 - p];
            for &k in other.iter() {
                m[(i, k)] = -2.0;
            }
        }
    }
    assert_spectra_match(&m, "two-cluster signed");

    let g = AdjacencySpec::build(GraphKind::Cycle, 6, -1.3).unwrap();
    assert_spectra_match(g.entries(), "negatively weighted cycle");
}

#[test]
fn random_symmetric_and_asymmetric_matrices() {
    let mut rng = StdRng::seed_from_u64(2024);
    for trial in 0..20 {
        let n = rng.gen_range(2..=8usize);
        let mut m = DMatrix::zeros(n, n);
        let symmetric = trial % 2 == 0;
        for i in 0..n {
            for k in 0..n {
                if i < k {
                    let w = rng.gen_range(-2.0..2.0f64);
                    m[(i, k)] = w;
                    m[(k, i)] = if symmetric { w } else { rng.gen_range(-2.0..2.0) };
                }
            }
        }
        assert_spectra_match(&m, &format!("random-{trial}"));
    }
}
