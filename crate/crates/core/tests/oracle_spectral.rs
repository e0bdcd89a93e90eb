#![allow(clippy::needless_range_loop)]

//! Brute-force eigenvalue oracle for the Jacobi solver: characteristic
//! polynomial coefficients by the Faddeev-LeVerrier recurrence, roots
//! isolated with a Sturm chain and refined by bisection. Shares nothing
//! with the rotation-based implementation under test.

use riskcal_core::scorers::{self, normalize};

/// Characteristic polynomial of an n x n matrix as monic coefficients
/// [c_0, ..., c_n] with p(x) = sum c_i x^i, via Faddeev-LeVerrier.
fn characteristic_polynomial(a: &[Vec<f64>]) -> Vec<f64> {
    let n = a.len();
    let mut coeffs = vec![0.0; n + 1];
    coeffs[n] = 1.0;
    // m starts as A; c_{n-k} accumulates -tr(M_k)/k.
    let mut m = a.to_vec();
    for k in 1..=n {
        let trace: f64 = (0..n).map(|i| m[i][i]).sum();
        let c = -trace / k as f64;
        coeffs[n - k] = c;
        if k == n {
            break;
        }
        // M_{k+1} = A (M_k + c I).
        let mut shifted = m.clone();
        for (i, row) in shifted.iter_mut().enumerate() {
            row[i] += c;
        }
        let mut next = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                next[i][j] = (0..n).map(|l| a[i][l] * shifted[l][j]).sum();
            }
        }
        m = next;
    }
    coeffs
}

fn poly_eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

fn poly_derivative(coeffs: &[f64]) -> Vec<f64> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, c)| i as f64 * c)
        .collect()
}

/// Remainder of polynomial division a / b (coefficients low-to-high).
fn poly_rem(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut r = a.to_vec();
    let db = b.len() - 1;
    let lead = b[db];
    while r.len() > db && r.len() > 1 {
        let dr = r.len() - 1;
        let factor = r[dr] / lead;
        for i in 0..=db {
            r[dr - db + i] -= factor * b[i];
        }
        while r.len() > 1 && r.last().unwrap().abs() < 1e-13 {
            r.pop();
        }
        if r.len() <= db {
            break;
        }
    }
    r
}

/// Sturm chain of p; sign changes at a minus sign changes at b count the
/// distinct roots in (a, b].
fn sturm_chain(coeffs: &[f64]) -> Vec<Vec<f64>> {
    let mut chain = vec![coeffs.to_vec(), poly_derivative(coeffs)];
    loop {
        let last = &chain[chain.len() - 1];
        if last.len() <= 1 {
            break;
        }
        let prev = &chain[chain.len() - 2];
        let mut rem = poly_rem(prev, last);
        for c in &mut rem {
            *c = -*c;
        }
        let degenerate = rem.len() == 1 && rem[0].abs() < 1e-13;
        chain.push(rem);
        if degenerate {
            break;
        }
    }
    chain
}

fn sign_changes(chain: &[Vec<f64>], x: f64) -> usize {
    let mut changes = 0;
    let mut prev_sign = 0i8;
    for poly in chain {
        let v = poly_eval(poly, x);
        let sign = if v > 1e-13 {
            1
        } else if v < -1e-13 {
            -1
        } else {
            0
        };
        if sign != 0 {
            if prev_sign != 0 && sign != prev_sign {
                changes += 1;
            }
            prev_sign = sign;
        }
    }
    changes
}

/// All real roots of the characteristic polynomial of a symmetric matrix,
/// ascending, found by Sturm bisection inside the Gershgorin interval.
fn charpoly_eigenvalues(a: &[Vec<f64>]) -> Vec<f64> {
    let n = a.len();
    let coeffs = characteristic_polynomial(a);
    let chain = sturm_chain(&coeffs);
    let radius = a
        .iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0f64, f64::max)
        + 1.0;
    let lo = -radius;
    let base = sign_changes(&chain, lo);
    // Roots at or below x, counting multiplicity only as distinct roots;
    // random matrices have distinct eigenvalues almost surely.
    let roots_leq = |x: f64| base - sign_changes(&chain, x);

    let mut roots = Vec::with_capacity(n);
    for idx in 1..=n {
        let mut a_lo = lo;
        let mut a_hi = radius;
        for _ in 0..200 {
            if a_hi - a_lo <= 1e-12 {
                break;
            }
            let mid = 0.5 * (a_lo + a_hi);
            if roots_leq(mid) >= idx {
                a_hi = mid;
            } else {
                a_lo = mid;
            }
        }
        roots.push(0.5 * (a_lo + a_hi));
    }
    roots
}

struct SplitMix(u64);

impl SplitMix {
    fn next_f64(&mut self) -> f64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
        (z >> 11) as f64 / (1u64 << 53) as f64
    }
}

#[test]
fn jacobi_matches_characteristic_polynomial_roots() {
    let mut rng = SplitMix(0xC0FFEE);
    let mut checked = 0usize;
    while checked < 1000 {
        let n = 2 + (rng.next_f64() * 3.0) as usize; // 2..=4
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i..n {
                let v = rng.next_f64() * 2.0 - 1.0;
                a[i][j] = v;
                a[j][i] = v;
            }
        }
        let expected = charpoly_eigenvalues(&a);
        let got = scorers::symmetric_spectrum(&a).unwrap();
        for (g, e) in got.iter().zip(&expected) {
            assert!(
                (g - e).abs() < 1e-8,
                "case {checked} (n={n}): jacobi {got:?} vs charpoly {expected:?}"
            );
        }
        checked += 1;
    }
}

#[test]
fn jacobi_matches_oracle_on_laplacians_of_random_similarities() {
    let mut rng = SplitMix(0xBEEF);
    for case in 0..200 {
        let n = 2 + (rng.next_f64() * 3.0) as usize;
        let mut raw = vec![vec![0.0; n]; n];
        for i in 0..n {
            raw[i][i] = 1.0;
            for j in (i + 1)..n {
                let v = rng.next_f64();
                raw[i][j] = v;
                raw[j][i] = v;
            }
        }
        let w = normalize(&raw).unwrap();
        // Rebuild the Laplacian the same way the scorer defines it.
        let degrees: Vec<f64> = (0..n).map(|i| (0..n).map(|j| w.get(i, j)).sum()).collect();
        let mut lap = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                let identity = if i == j { 1.0 } else { 0.0 };
                lap[i][j] = identity - w.get(i, j) / (degrees[i] * degrees[j]).sqrt();
            }
        }
        let expected = charpoly_eigenvalues(&lap);
        let got = scorers::laplacian_spectrum(&w).eigenvalues;
        for (g, e) in got.iter().zip(&expected) {
            assert!(
                (g - e).abs() < 1e-8,
                "case {case}: spectrum {got:?} vs charpoly {expected:?}"
            );
        }
    }
}
