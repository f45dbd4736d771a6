use std::sync::Arc;

use mpsvt_core::dense::{extremal_eigenstate, shrink_standard, DenseState};
use mpsvt_core::measure::measure_all;
use mpsvt_core::mps::{dmrg_extremal, mpo_compile, DmrgOptions};
use mpsvt_core::pauli::{dense_of_string, enumerate_window_strings};
use mpsvt_core::{CoefficientVector, Extremum, Mps, State, C64};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_coefficients(n: usize, w: usize, rng: &mut ChaCha8Rng) -> CoefficientVector {
    let table = Arc::new(enumerate_window_strings(n, w).unwrap());
    let values = (0..table.len()).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
    CoefficientVector::from_values(table, values).unwrap()
}

fn max_abs_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[test]
fn pauli_strings_are_orthogonal() {
    // every string is a signed permutation: row x has one entry, at column f(x)
    for n in 1..=8 {
        let table = enumerate_window_strings(n, n.min(2)).unwrap();
        let dim = 1usize << n;
        let perms: Vec<Vec<(usize, C64)>> = table
            .strings()
            .iter()
            .map(|p| {
                let m = dense_of_string(p).unwrap();
                (0..dim)
                    .map(|r| {
                        let nz: Vec<usize> = (0..dim).filter(|&c| m[(r, c)] != C64::new(0.0, 0.0)).collect();
                        assert_eq!(nz.len(), 1);
                        (nz[0], m[(r, nz[0])])
                    })
                    .collect()
            })
            .collect();
        for (j, a) in perms.iter().enumerate() {
            for (k, b) in perms.iter().enumerate() {
                // tr(P_j P_k) = Σ_x P_j[x, f(x)] P_k[f(x), x]
                let mut tr = C64::new(0.0, 0.0);
                for (x, &(fx, v)) in a.iter().enumerate() {
                    let (gx, u) = b[fx];
                    if gx == x {
                        tr += v * u;
                    }
                }
                let want = if j == k { dim as f64 } else { 0.0 };
                assert_eq!(tr, C64::new(want, 0.0), "N={n} strings {j}, {k}");
            }
        }
    }
}

#[test]
fn mpo_densification_matches_direct_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for i in 0..100 {
        let n = 1 + i % 6;
        let w = 1 + (i / 6) % n.min(3);
        let a = random_coefficients(n, w, &mut rng);
        let mpo = mpo_compile(&a).unwrap().to_dense().unwrap();
        let direct = a.to_dense().unwrap();
        assert!(max_abs_diff(&mpo, &direct) <= 1e-12, "N={n} w={w}");
    }
}

#[test]
fn shrink_standard_matches_eigen_route() {
    // for hermitian Y the singular triplets come from the eigenpairs:
    // shrink(Y) = Σ sign(λ) max(|λ| - τ, 0) v v†
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in 1..=5 {
        let dim = 1 << n;
        for &tau in &[0.0, 0.1, 0.5, 2.0] {
            let g = DMatrix::from_fn(dim, dim, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
            let y = (&g + g.adjoint()) * C64::new(0.5, 0.0);
            let eig = SymmetricEigen::new(y.clone());
            let mut want = DMatrix::<C64>::zeros(dim, dim);
            for (i, &l) in eig.eigenvalues.iter().enumerate() {
                let s = (l.abs() - tau).max(0.0) * l.signum();
                let v = eig.eigenvectors.column(i);
                want += v * v.adjoint() * C64::new(s, 0.0);
            }
            let got = shrink_standard(&y, tau).unwrap();
            assert!(max_abs_diff(&got, &want) <= 1e-10, "N={n} τ={tau}");
        }
    }
}

#[test]
fn shrink_standard_general_matrix() {
    // non-hermitian input: compare with an independent SVD of Y†Y
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let dim = 8;
    let y = DMatrix::from_fn(dim, dim, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    let tau = 0.3;
    let got = shrink_standard(&y, tau).unwrap();
    // Y = U Σ V†; with V from the eigenvectors of Y†Y, U = Y V Σ^{-1}
    let eig = SymmetricEigen::new(y.adjoint() * &y);
    let mut want = DMatrix::<C64>::zeros(dim, dim);
    for i in 0..dim {
        let s = eig.eigenvalues[i].max(0.0).sqrt();
        let v = eig.eigenvectors.column(i).into_owned();
        let u = &y * &v / C64::new(s, 0.0);
        want += u * v.adjoint() * C64::new((s - tau).max(0.0), 0.0);
    }
    assert!(max_abs_diff(&got, &want) <= 1e-10);
}

#[test]
fn dmrg_matches_dense_extremes() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for n in [2, 4, 6, 8, 10] {
        let a = random_coefficients(n, 2, &mut rng);
        let mpo = mpo_compile(&a).unwrap();
        let init = Mps::random(n, 4, &mut rng).unwrap();
        let opts = DmrgOptions {
            chi_max: 64,
            sweeps: 12,
            ..DmrgOptions::default()
        };
        for which in [Extremum::Max, Extremum::Min] {
            let exact = extremal_eigenstate(&a, which, 1e-12).unwrap().value;
            let got = dmrg_extremal(&mpo, which, &init, &opts).unwrap().value;
            assert!((got - exact).abs() <= 1e-8 * exact.abs(), "N={n} {which:?}: {got} vs {exact}");
        }
    }
}

#[test]
fn measurements_agree_across_representations() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for n in [2, 5, 8] {
        let d = DenseState::random(n, &mut rng).unwrap();
        let m = Mps::from_dense(&d, usize::MAX).unwrap();
        let table = Arc::new(enumerate_window_strings(n, 2).unwrap());
        let a = measure_all(&State::Dense(d), Arc::clone(&table), "d").unwrap();
        let b = measure_all(&State::Mps(m), table, "m").unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() <= 1e-10);
        }
    }
}
