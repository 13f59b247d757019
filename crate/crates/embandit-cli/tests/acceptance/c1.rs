//! Criterion 1: component oracles. GP posterior, nuclear dominant closed
//! form, baseline estimator, and every Θ term of the moment-matched
//! estimator against independent dense / quadrature references.

use std::time::{Duration, Instant};

use embandit::cbmp::build_round_state;
use embandit::cme::build_cme_round;
use embandit::gp::{fit_f, UnmatchedDataset};
use embandit::kernels::{kernel_eval, KernelSet, KernelSpec};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::support::{
    adaptive_simpson, gram_naive, random_instance, random_points, rel_err, CriterionReport,
};

pub fn run() -> CriterionReport {
    let mut report = CriterionReport::new(
        "criterion 1: component oracles (GP, nuclear closed form, estimator chains)",
        Duration::from_secs(30),
    );
    let start = Instant::now();

    gp_oracle(&mut report);
    nuclear_quadrature(&mut report);
    estimator_chains(&mut report);

    report.elapsed = start.elapsed();
    report
}

fn gp_oracle(report: &mut CriterionReport) {
    let mut rng = ChaCha12Rng::seed_from_u64(910);
    let mut worst = 0.0f64;
    for case in 0..20 {
        let n = 2 + (case * 7) % 29;
        let d = 1 + case % 2;
        let base = KernelSpec::squared_exponential(rng.gen_range(0.5..2.0), rng.gen_range(0.5..1.5))
            .unwrap();
        let nuclear = KernelSpec::nuclear_dominant_from(&base).unwrap();
        let noise = rng.gen_range(0.01..0.5);
        let points = random_points(n, d, -2.0, 2.0, &mut rng);
        let ys: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..3.0)).collect();
        let d2 = UnmatchedDataset::from_pairs(points.clone(), ys.clone()).unwrap();
        let posterior = fit_f(&d2, &nuclear, noise).unwrap();

        let queries = random_points(6, d, -2.5, 2.5, &mut rng);
        let k_tt = gram_naive(&nuclear, &points, &points);
        let inv = (&k_tt + DMatrix::identity(n, n) * noise)
            .full_piv_lu()
            .try_inverse()
            .unwrap();
        let k_qt = gram_naive(&nuclear, &queries, &points);
        let mean_naive = &k_qt * &inv * DVector::from_vec(ys);
        let cov_naive =
            gram_naive(&nuclear, &queries, &queries) - &k_qt * &inv * k_qt.transpose();
        let mean = posterior.posterior_mean_at(&queries).unwrap();
        let cov = posterior.posterior_cov_at(&queries).unwrap();
        for i in 0..queries.len() {
            worst = worst.max(rel_err(mean[i], mean_naive[i]));
            for j in 0..queries.len() {
                worst = worst.max(rel_err(cov[(i, j)], cov_naive[(i, j)]));
            }
        }
    }
    report.check(
        worst < 1e-8,
        format!("GP posterior vs naive solver, 20 instances n<=30: worst rel err {worst:.2e} (tol 1e-8)"),
    );
}

fn nuclear_quadrature(report: &mut CriterionReport) {
    // d = 1: adaptive quadrature.
    let mut worst1 = 0.0f64;
    for (ell, amp, y1, y2) in
        [(1.0, 1.0, 0.0, 0.0), (0.6, 1.4, 0.2, -1.9), (2.0, 0.8, 1.5, -0.5)]
    {
        let base = KernelSpec::squared_exponential(ell, amp).unwrap();
        let nuclear = KernelSpec::nuclear_dominant_from(&base).unwrap();
        let closed = kernel_eval(&nuclear, &[y1], &[y2]).unwrap();
        let f = |u: f64| {
            kernel_eval(&base, &[y1], &[u]).unwrap() * kernel_eval(&base, &[y2], &[u]).unwrap()
        };
        let quad =
            adaptive_simpson(&f, y1.min(y2) - 8.0 * ell, y1.max(y2) + 8.0 * ell, 1e-10);
        worst1 = worst1.max(rel_err(closed, quad));
    }
    report.check(
        worst1 < 1e-6,
        format!("nuclear closed form vs quadrature d=1: worst rel err {worst1:.2e} (tol 1e-6)"),
    );

    // d = 2: tensor-product composite Simpson.
    let mut worst2 = 0.0f64;
    let cases: [(f64, f64, [f64; 2], [f64; 2]); 2] =
        [(1.0, 1.0, [0.3, -0.2], [-0.8, 1.0]), (0.8, 1.2, [1.0, 1.0], [-0.4, 0.2])];
    for (ell, amp, y1, y2) in cases {
        let base = KernelSpec::squared_exponential(ell, amp).unwrap();
        let nuclear = KernelSpec::nuclear_dominant_from(&base).unwrap();
        let closed = kernel_eval(&nuclear, &y1, &y2).unwrap();
        let n = 240usize;
        let axis = |k: usize| {
            let lo = y1[k].min(y2[k]) - 7.0 * ell;
            let hi = y1[k].max(y2[k]) + 7.0 * ell;
            let h = (hi - lo) / n as f64;
            let pts: Vec<f64> = (0..=n).map(|i| lo + h * i as f64).collect();
            let w: Vec<f64> = (0..=n)
                .map(|i| {
                    let c = if i == 0 || i == n {
                        1.0
                    } else if i % 2 == 1 {
                        4.0
                    } else {
                        2.0
                    };
                    c * h / 3.0
                })
                .collect();
            (pts, w)
        };
        let (xs, wx) = axis(0);
        let (ys, wy) = axis(1);
        let mut quad = 0.0;
        for (i, ui) in xs.iter().enumerate() {
            for (j, uj) in ys.iter().enumerate() {
                let u = [*ui, *uj];
                quad += wx[i]
                    * wy[j]
                    * kernel_eval(&base, &y1, &u).unwrap()
                    * kernel_eval(&base, &y2, &u).unwrap();
            }
        }
        worst2 = worst2.max(rel_err(closed, quad));
    }
    report.check(
        worst2 < 1e-4,
        format!("nuclear closed form vs quadrature d=2: worst rel err {worst2:.2e} (tol 1e-4)"),
    );
}

fn estimator_chains(report: &mut CriterionReport) {
    let mut rng = ChaCha12Rng::seed_from_u64(911);
    let mut worst_cme = 0.0f64;
    let mut worst_theta = 0.0f64;
    let mut worst_moment = 0.0f64;
    for case in 0..6u64 {
        let n = 3 + case as usize;
        let m = 2 + (case as usize) % 3;
        let d_r = 1 + (case as usize) % 3;
        let (d1, d2) = random_instance(n, m, d_r, 7000 + case);
        let se = KernelSpec::squared_exponential(1.0, 1.0).unwrap();
        let ks = KernelSet { k_s: se, k_a: se, k_r: se };
        let nuclear = KernelSpec::nuclear_dominant_from(&se).unwrap();
        let (lambda, lambda_f, jit_rel) = (0.1, 0.1, 1e-6);
        let s_t = rng.gen_range(-3.0..3.25);

        // Dense reference pieces shared by both estimators.
        let kk = gram_naive(&ks.k_s, d1.contexts(), d1.contexts())
            .component_mul(&gram_naive(&ks.k_a, d1.actions(), d1.actions()));
        let kk_inv = (&kk + DMatrix::identity(n, n) * lambda)
            .full_piv_lu()
            .try_inverse()
            .unwrap();
        let phi_at = |a: f64| {
            DVector::<f64>::from_fn(n, |i, _| {
                kernel_eval(&ks.k_s, &d1.contexts()[i], &[s_t]).unwrap()
                    * kernel_eval(&ks.k_a, &d1.actions()[i], &[a]).unwrap()
            })
        };

        // Baseline estimator.
        let cme = build_cme_round(&d1, &d2, &ks, lambda, lambda_f, &[s_t]).unwrap();
        let k_rt = gram_naive(&ks.k_r, d1.rewards(), d2.points());
        let k_tt = gram_naive(&ks.k_r, d2.points(), d2.points());
        let alpha_cme = (&k_tt + DMatrix::identity(m, m) * lambda_f)
            .full_piv_lu()
            .try_inverse()
            .unwrap()
            * d2.ys_vector();
        let w_cme = &kk_inv * &k_rt * &alpha_cme;
        for a in [-2.0f64, 0.5, 3.0] {
            let phi = phi_at(a);
            worst_cme = worst_cme.max(rel_err(cme.mean(&[a]).unwrap(), phi.dot(&w_cme)));
            let joint = kernel_eval(&ks.k_s, &[s_t], &[s_t]).unwrap()
                * kernel_eval(&ks.k_a, &[a], &[a]).unwrap();
            let sig = ((joint - phi.dot(&(&kk_inv * &phi))).max(0.0) / lambda).sqrt();
            worst_cme = worst_cme.max(rel_err(cme.stddev(&[a]).unwrap(), sig));
        }

        // Moment-matched Θ chain.
        let state =
            build_round_state(&d1, &d2, &ks, lambda, lambda_f, jit_rel, &[s_t]).unwrap();
        let mut hat: Vec<Vec<f64>> = d1.rewards().to_vec();
        hat.extend(d2.points().iter().cloned());
        let ridge_inv = |mat: &DMatrix<f64>, rel: f64, extra: f64| {
            let md = (0..mat.nrows()).map(|i| mat[(i, i)]).sum::<f64>() / mat.nrows() as f64;
            (mat + DMatrix::identity(mat.nrows(), mat.ncols()) * (rel * md + extra))
                .full_piv_lu()
                .try_inverse()
                .unwrap()
        };
        let khh_inv = ridge_inv(
            &gram_naive(&se, &hat, &hat),
            jit_rel,
            state.khh_escalation_jitter(),
        );
        let rrr_inv = ridge_inv(
            &gram_naive(&nuclear, d1.rewards(), d1.rewards()),
            jit_rel,
            state.rrr_escalation_jitter(),
        );
        let rhh = gram_naive(&nuclear, &hat, &hat);
        let rhr = gram_naive(&nuclear, &hat, d1.rewards());
        let rht = gram_naive(&nuclear, &hat, d2.points());
        let rtt_inv = (gram_naive(&nuclear, d2.points(), d2.points())
            + DMatrix::identity(m, m) * lambda_f)
            .full_piv_lu()
            .try_inverse()
            .unwrap();
        let theta4 = &khh_inv * &rht * &rtt_inv * d2.ys_vector();
        let theta1 = &khh_inv * &rhr * &rrr_inv * gram_naive(&se, d1.rewards(), d1.rewards());
        let rbar = &rhh - &rht * &rtt_inv * rht.transpose();
        let theta2a = (&rhh * &theta4).dot(&theta4);
        let theta2b = (&rhr * &rrr_inv * rhr.transpose() * &theta4).dot(&theta4);
        let theta3a = (&khh_inv * &rhh * &khh_inv * &rbar).trace();
        let theta3b =
            (&rhr * &rrr_inv * rhr.transpose() * &khh_inv * &rbar * &khh_inv).trace();
        worst_theta = worst_theta.max(rel_err(state.theta2_a(), theta2a));
        worst_theta = worst_theta.max(rel_err(state.theta2_b(), theta2b));
        worst_theta = worst_theta.max(rel_err(state.theta3_a(), theta3a));
        worst_theta = worst_theta.max(rel_err(state.theta3_b(), theta3b));
        for i in 0..(n + m) {
            worst_theta = worst_theta.max(rel_err(state.theta4()[i], theta4[i]));
            for j in 0..n {
                worst_theta = worst_theta.max(rel_err(state.theta1()[(i, j)], theta1[(i, j)]));
            }
        }

        let krh = gram_naive(&se, d1.rewards(), &hat);
        for (a, b) in [(-1.5f64, -1.5f64), (0.0, 2.0)] {
            let (pa, pb) = (phi_at(a), phi_at(b));
            let (ea, eb) = (&kk_inv * &pa, &kk_inv * &pb);
            let mean_naive = ea.dot(&(&krh * &theta4));
            worst_moment = worst_moment.max(rel_err(state.mean(&[a]).unwrap(), mean_naive));
            let term1 = (theta1.transpose() * &rbar * &theta1 * &eb).dot(&ea);
            let f = kernel_eval(&ks.k_s, &[s_t], &[s_t]).unwrap()
                * kernel_eval(&ks.k_a, &[a], &[b]).unwrap();
            let g = pa.dot(&eb);
            let kappa = term1 + (theta2a + theta3a) * f - (theta2b + theta3b) * g;
            worst_moment =
                worst_moment.max(rel_err(state.cov(&[a], &[b]).unwrap(), kappa));
        }
    }
    report.check(
        worst_cme < 1e-8,
        format!("baseline mean/stddev vs dense oracle: worst rel err {worst_cme:.2e} (tol 1e-8)"),
    );
    report.check(
        worst_theta < 1e-8,
        format!("theta terms vs dense chain: worst rel err {worst_theta:.2e} (tol 1e-8)"),
    );
    report.check(
        worst_moment < 1e-8,
        format!("moment-matched mean/cov vs dense chain: worst rel err {worst_moment:.2e} (tol 1e-8)"),
    );
}
