//! Checks against routes that share no code with the library: Schur eigenvalues
//! of non-symmetric products, Newton-type square roots, finite differences,
//! gradient descent, SVD norms and Monte-Carlo moments.

mod common;

use bwb_core::estimators::{self, centred_maps, sample_gaussian_vectors, DiagnosticBundle};
use bwb_core::linalg::{basis_element, sym_dim, unvec_sym, vec_sym};
use bwb_core::sbm::{self, SbmConfig};
use bwb_core::truth::{DataSource, SbmSource};
use bwb_core::*;
use common::*;
use nalgebra::DMatrix;

/// Denman–Beavers iteration: returns `(A^{1/2}, A^{-1/2})` for PD `A`.
fn denman_beavers(a: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut y = a.clone();
    let mut z = DMatrix::identity(n, n);
    for _ in 0..100 {
        let y_inv = y.clone().try_inverse().unwrap();
        let z_inv = z.clone().try_inverse().unwrap();
        let y_next = (&y + z_inv) * 0.5;
        let z_next = (&z + y_inv) * 0.5;
        let step = (&y_next - &y).norm();
        y = y_next;
        z = z_next;
        if step < 1e-15 * y.norm() {
            break;
        }
    }
    (y, z)
}

#[test]
fn sqrt_round_trip() {
    let mut r = rng(1);
    for d in 2..=10 {
        let m = random_pd(&mut r, d);
        let root = sqrt_psd(&m).unwrap();
        assert!(rel_err(&(root.matrix() * root.matrix()), m.matrix()) <= 1e-10);
        let (db, _) = denman_beavers(m.matrix());
        assert!(rel_err(root.matrix(), &db) <= 1e-10);
    }
}

#[test]
fn pinv_sqrt_full_rank() {
    let mut r = rng(2);
    for d in 2..=8 {
        let m = random_pd(&mut r, d);
        let p = pinv_sqrt(&m, 1e-12).unwrap();
        let id = p.matrix() * m.matrix() * p.matrix();
        assert!((id - DMatrix::<f64>::identity(d, d)).norm() <= 1e-10);
    }
}

#[test]
fn distance_matches_product_eigenvalues() {
    let mut r = rng(3);
    for d in 2..=8 {
        let q = random_pd(&mut r, d);
        let s = random_pd(&mut r, d);
        let ours = bw_distance(&q, &s).unwrap().powi(2);
        let oracle = bw_sq_oracle(q.matrix(), s.matrix());
        // Compare the trace-of-root terms, which carry all the numerics.
        let scale = q.trace() + s.trace();
        assert!((ours - oracle).abs() <= 1e-9 * scale, "d={d}: {ours} vs {oracle}");
    }
}

#[test]
fn push_forward_matches_source_side_formula() {
    let mut r = rng(4);
    for d in 2..=8 {
        let q = random_pd(&mut r, d);
        let s = random_pd(&mut r, d);
        let t = ot_map(&q, &s).unwrap();
        let (qh, qih) = denman_beavers(q.matrix());
        let inner = &qh * s.matrix() * &qh;
        let (root, _) = denman_beavers(&((&inner + inner.transpose()) * 0.5));
        let oracle = &qih * root * &qih;
        assert!(rel_err(t.matrix(), &oracle) <= 1e-9);
        let back = t.matrix() * q.matrix() * t.matrix();
        assert!(rel_err(&back, s.matrix()) <= 1e-8);
    }
}

#[test]
fn differential_finite_differences_are_first_order() {
    let mut r = rng(5);
    for _ in 0..10 {
        let d = 4;
        let q = pd_with_spectrum(&mut r, d, 0.5, 4.0);
        let s = pd_with_spectrum(&mut r, d, 0.5, 4.0);
        let x = random_sym(&mut r, d);
        let x = &x / x.norm();
        let dt = ot_map_differential(&q, &s).unwrap();
        let analytic = dt.apply_raw(&x);
        let t0 = ot_map(&q, &s).unwrap();
        let errs: Vec<f64> = [1e-3, 1e-4, 1e-5]
            .iter()
            .map(|&h| {
                let qh = SymMatrix::new(q.matrix() + &x * h).unwrap();
                let th = ot_map(&qh, &s).unwrap();
                ((th.matrix() - t0.matrix()) / h - &analytic).norm()
            })
            .collect();
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((5.0..20.0).contains(&ratio), "errors {errs:?}");
        }
    }
}

#[test]
fn single_multiplier_isolates_one_term() {
    let mut r = rng(6);
    let d = 3;
    let q = random_pd(&mut r, d);
    let mats: Vec<SymMatrix> = (0..4).map(|_| random_pd(&mut r, d)).collect();
    let data = SampleSet::new(mats.clone()).unwrap();
    let n = data.len() as f64;
    for k in 0..4 {
        let mut m = vec![0.0; 4];
        m[k] = 1.0;
        let f = estimators::f_op(&q, &data, Some(&m)).unwrap();
        let direct = ot_map_differential(&q, &mats[k]).unwrap();
        let expect = direct.scaled(-1.0 / n);
        assert!((f.matrix() - expect.matrix()).norm() <= 1e-12 * expect.matrix().norm());
    }
}

#[test]
fn sigma_trace_identity() {
    let mut r = rng(7);
    let d = 4;
    let q = random_pd(&mut r, d);
    let data = SampleSet::new((0..6).map(|_| random_pd(&mut r, d)).collect()).unwrap();
    let sigma = estimators::sigma_op(&q, &data).unwrap();
    let maps = centred_maps(&q, &data).unwrap();
    let mean_sq: f64 = maps.iter().map(|t| t.frobenius_norm().powi(2)).sum::<f64>() / 6.0;
    assert!((sigma.trace() - mean_sq).abs() <= 1e-12 * mean_sq.max(1.0));
}

#[test]
fn discrepancy_matches_svd_norms() {
    let mut r = rng(8);
    let d = 3;
    let data = SampleSet::new((0..5).map(|_| random_pd(&mut r, d)).collect()).unwrap();
    let q_ref = barycenter(&data, &SolverConfig::default()).unwrap().q;
    let q = SymMatrix::new(q_ref.matrix() + random_sym(&mut r, d) * 0.05).unwrap();
    let f_ref = estimators::f_op(&q_ref, &data, None).unwrap();
    let f = estimators::f_op(&q, &data, None).unwrap();
    let got = discrepancy(&q_ref, &q, &f_ref, &f).unwrap();

    let whiten = |m: &DMatrix<f64>, x: &DMatrix<f64>| {
        let l = m.clone().cholesky().unwrap().l();
        let li = l.try_inverse().unwrap();
        &li * x * li.transpose()
    };
    let q_dev = spectral_norm(&(whiten(q_ref.matrix(), q.matrix()) - DMatrix::identity(d, d)));
    let m = sym_dim(d);
    let f_dev = spectral_norm(&(whiten(f_ref.matrix(), f.matrix()) - DMatrix::identity(m, m)));
    let sv = f_ref.matrix().clone().svd(false, false).singular_values;
    let kappa = sv.max() / sv.min();
    assert!((got.q - q_dev).abs() <= 1e-10);
    assert!((got.f - f_dev).abs() <= 1e-10);
    assert!((got.eta - 2.0 * kappa.sqrt() * (q_dev + f_dev)).abs() <= 1e-9 * got.eta);
}

#[test]
fn barycenter_matches_gradient_descent() {
    let mut r = rng(9);
    let d = 3;
    let mats: Vec<SymMatrix> = (0..4).map(|_| pd_with_spectrum(&mut r, d, 0.5, 3.0)).collect();
    let objective = |q: &DMatrix<f64>| -> f64 {
        mats.iter().map(|s| bw_sq_oracle(q, s.matrix())).sum::<f64>() / mats.len() as f64
    };
    let m = sym_dim(d);
    let h = 1e-5;
    let mut q = DMatrix::<f64>::identity(d, d);
    for _ in 0..5000 {
        let grad: Vec<f64> = (0..m)
            .map(|p| {
                let e = basis_element(d, p) * h;
                (objective(&(&q + &e)) - objective(&(&q - &e))) / (2.0 * h)
            })
            .collect();
        let g = unvec_sym(d, &nalgebra::DVector::from_vec(grad));
        if g.norm() < 1e-10 {
            break;
        }
        q -= g * 0.5;
        assert!(q.clone().cholesky().is_some(), "iterate left the PD cone");
    }
    let oracle = SymMatrix::new(q).unwrap();
    let data = SampleSet::new(mats.clone()).unwrap();
    let res = barycenter(&data, &SolverConfig::default()).unwrap();
    assert!(res.converged && res.residual <= 1e-10);
    assert!(bw_distance(&res.q, &oracle).unwrap() <= 1e-6);
}

#[test]
fn residual_shrinks_towards_fixed_point() {
    let mut r = rng(10);
    let d = 3;
    let data = SampleSet::new((0..5).map(|_| random_pd(&mut r, d)).collect()).unwrap();
    let q = barycenter(&data, &SolverConfig::default()).unwrap().q;
    let x = random_sym(&mut r, d);
    let res: Vec<f64> = [1e-1, 1e-2, 1e-3]
        .iter()
        .map(|&eps| residual(&SymMatrix::new(q.matrix() + &x * eps).unwrap(), &data).unwrap())
        .collect();
    assert!(res.iter().all(|&v| v > 0.0));
    assert!(res[0] > res[1] && res[1] > res[2], "{res:?}");
}

#[test]
fn mean_map_positive_away_from_barycenter() {
    let a = SymMatrix::from_diagonal(&[1.0, 4.0]).unwrap();
    let b = SymMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
    let data = SampleSet::new(vec![a, b]).unwrap();
    let mean = data.euclidean_mean();
    assert!(mean_map_check(&mean, &data).unwrap() > 1e-3);
    let q = barycenter(&data, &SolverConfig::default()).unwrap().q;
    assert!(mean_map_check(&q, &data).unwrap() <= 1e-8);
}

#[test]
fn gaussian_chi_square_moment() {
    let m = sym_dim(3);
    let draws = sample_gaussian_stat(&SymOperator::identity(3), None, 100_000, 4).unwrap();
    let mean_sq = draws.iter().map(|x| x * x).sum::<f64>() / draws.len() as f64;
    // Var χ²(m) = 2m.
    let sigma = (2.0 * m as f64 / draws.len() as f64).sqrt();
    assert!((mean_sq - m as f64).abs() <= 5.0 * sigma, "{mean_sq}");
}

#[test]
fn gaussian_covariance() {
    let mut r = rng(11);
    let m = sym_dim(3);
    let g = gaussian(&mut r, m, m);
    let xi = SymOperator::new(3, (&g * g.transpose()) / m as f64).unwrap();
    let n = 100_000;
    let z = sample_gaussian_vectors(&xi, n, 5).unwrap();
    let mut cov = DMatrix::<f64>::zeros(m, m);
    for v in &z {
        cov.ger(1.0, v, v, 1.0);
    }
    cov /= n as f64;
    let tol = 5.0 / (n as f64).sqrt() * xi.norm();
    let worst = (cov - xi.matrix()).abs().max();
    assert!(worst <= tol, "{worst} > {tol}");
}

#[test]
fn multiplier_moments() {
    let n = 1_000_000;
    let exp = draw_weights(&WeightScheme::Exp1, n, 12).unwrap();
    let mean = exp.iter().sum::<f64>() / n as f64;
    assert!((mean - 1.0).abs() <= 5e-3);
    // Fourth central moments: Exp(1) 9, Po(1) 4, 2·Be(1/2) 1. The O(1/n) slack
    // covers the unbiased-variance factor, the only error left for 2·Be(1/2).
    for (scheme, mu4) in [(WeightScheme::Exp1, 9.0), (WeightScheme::Po1, 4.0), (WeightScheme::Bern2, 1.0)] {
        let w = draw_weights(&scheme, n, 13).unwrap();
        let mean = w.iter().sum::<f64>() / n as f64;
        let var = w.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let sd_mean = (1.0 / n as f64).sqrt();
        let sd_var = ((mu4 - 1.0_f64) / n as f64).sqrt();
        assert!((mean - 1.0).abs() <= 5.0 * sd_mean, "{scheme} mean {mean}");
        assert!((var - 1.0).abs() <= 5.0 * sd_var + 5.0 / n as f64, "{scheme} var {var}");
    }
}

#[test]
fn sbm_block_frequencies() {
    let cfg = SbmConfig::full_preset(21);
    let mut counts = [[(0usize, 0usize); 2]; 2];
    for i in 0..2000 {
        let g = sbm::generate_sbm_indexed(&cfg, i).unwrap();
        for (a, row) in counts.iter_mut().enumerate() {
            for (b, c) in row.iter_mut().enumerate() {
                let (e, p) = g.block_pair_counts(a, b);
                c.0 += e;
                c.1 += p;
            }
        }
    }
    for (a, b, p) in [(0, 0, 0.8), (1, 1, 0.5), (0, 1, 0.2)] {
        let (e, trials) = counts[a][b];
        let freq = e as f64 / trials as f64;
        let sigma = (p * (1.0 - p) / trials as f64).sqrt();
        assert!((freq - p).abs() <= 5.0 * sigma, "block ({a},{b}): {freq}");
    }
}

#[test]
fn laplacian_and_inverse_round_trip() {
    let cfg = SbmConfig::full_preset(3);
    for i in 0..20 {
        let g = sbm::generate_sbm_indexed(&cfg, i).unwrap();
        let l = sbm::laplacian(&g);
        let row_max = (0..l.dim()).map(|k| l.matrix().row(k).sum().abs()).fold(0.0, f64::max);
        assert!(row_max <= 1e-12);
        // Laplacians are PSD: the smallest singular value of L + I is at least 1.
        let shifted = l.matrix() + DMatrix::<f64>::identity(l.dim(), l.dim());
        let sv = shifted.clone().svd(false, false).singular_values;
        assert!(sv.min() >= 1.0 - 1e-10);
        let s = sbm::invert_laplacian(&l, 1.0).unwrap();
        let back = shifted * s.matrix();
        assert!((back - DMatrix::<f64>::identity(l.dim(), l.dim())).norm() <= 1e-10);
    }
}

#[test]
fn xi_estimate_concentrates() {
    let source = SbmSource {
        config: SbmConfig::desk_preset(0),
        r: 1.0,
    };
    let cfg = SolverConfig::default();
    let big = SampleSet::new(source.draw(20_000, 77).unwrap()).unwrap();
    let q_ref = barycenter(&big, &cfg).unwrap().q;
    let xi_ref = DiagnosticBundle::at(&q_ref, &big).unwrap().xi;
    let mut medians = Vec::new();
    for (k, n) in [100usize, 200, 400].into_iter().enumerate() {
        let mut errs: Vec<f64> = (0..20)
            .map(|rep| {
                let data = SampleSet::new(source.draw(n, 1000 * k as u64 + rep).unwrap()).unwrap();
                let q = barycenter(&data, &cfg).unwrap().q;
                let xi = DiagnosticBundle::at(&q, &data).unwrap().xi;
                xi.sub(&xi_ref).unwrap().nuclear_norm()
            })
            .collect();
        errs.sort_by(f64::total_cmp);
        medians.push((errs[9] + errs[10]) / 2.0);
    }
    assert!(medians[0] > medians[1] && medians[1] > medians[2], "{medians:?}");
}

#[test]
fn vectorization_of_basis_is_identity() {
    for d in 1..=4 {
        for p in 0..sym_dim(d) {
            let v = vec_sym(&basis_element(d, p));
            assert_eq!(v.iter().filter(|&&x| x != 0.0).count(), 1);
            assert!((v[p] - 1.0).abs() < 1e-15);
        }
    }
}
