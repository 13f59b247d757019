//! Criterion 3: property suites. Structural invariants checked over seeded
//! random instances: PSD Grams and posteriors, covariance symmetry, the
//! embedding inner-product identity, baseline-variance monotonicity and
//! reward-invariance, acquisition shift-invariance, dataset growth law,
//! and trial determinism.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use embandit::cbmp::build_round_state;
use embandit::cme::build_cme_round;
use embandit::environments::{Environment, Setting};
use embandit::gp::fit_f;
use embandit::harness::{run_trial, run_trial_in, Algorithm, ExperimentConfig};
use embandit::kernels::{gram, kernel_eval, KernelSet, KernelSpec};
use embandit::policies::{ucb_select, PosteriorStats};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::support::{min_eig, random_instance, random_points, CriterionReport};

pub fn run() -> CriterionReport {
    let mut report = CriterionReport::new(
        "criterion 3: property suites (PSD, symmetry, invariances, growth, determinism)",
        Duration::from_secs(60),
    );
    let start = Instant::now();

    psd_properties(&mut report);
    symmetry_and_identity(&mut report);
    baseline_variance_properties(&mut report);
    acquisition_shift_invariance(&mut report);
    growth_law(&mut report);
    determinism(&mut report);

    report.elapsed = start.elapsed();
    report
}

fn se_set(ell: f64) -> KernelSet<f64> {
    let se = KernelSpec::squared_exponential(ell, 1.0).unwrap();
    KernelSet { k_s: se, k_a: se, k_r: se }
}

fn psd_properties(report: &mut CriterionReport) {
    let mut rng = ChaCha12Rng::seed_from_u64(33);
    let mut worst = f64::INFINITY;
    for case in 0..15 {
        let base =
            KernelSpec::squared_exponential(rng.gen_range(0.4..2.5), rng.gen_range(0.5..2.0))
                .unwrap();
        let spec = match case % 3 {
            0 => base,
            1 => KernelSpec::matern52(rng.gen_range(0.4..2.5), 1.0).unwrap(),
            _ => KernelSpec::nuclear_dominant_from(&base).unwrap(),
        };
        let pts = random_points(3 + case % 8, 1 + case % 3, -3.0, 3.25, &mut rng);
        let g = gram(&spec, &pts).unwrap();
        let scale = (0..g.nrows()).map(|i| g[(i, i)]).fold(0.0f64, f64::max).max(1.0);
        worst = worst.min(min_eig(&g) / scale);
    }
    report.check(
        worst >= -1e-8,
        format!("Gram PSD over 15 random instances: worst normalized min eig {worst:.2e} (tol -1e-8)"),
    );

    let mut worst_post = f64::INFINITY;
    for case in 0..8u64 {
        let (_, d2) = random_instance(0, 5 + case as usize % 4, 1 + case as usize % 2, 50 + case);
        let nuclear = KernelSpec::nuclear_dominant_from(
            &KernelSpec::squared_exponential(1.0, 1.0).unwrap(),
        )
        .unwrap();
        let post = fit_f(&d2, &nuclear, 0.1).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(60 + case);
        let queries = random_points(5, d2.points()[0].len(), -2.5, 2.5, &mut rng);
        let cov = post.posterior_cov_at(&queries).unwrap();
        let scale = (0..cov.nrows()).map(|i| cov[(i, i)]).fold(0.0f64, f64::max).max(1.0);
        worst_post = worst_post.min(min_eig(&cov) / scale);
    }
    report.check(
        worst_post >= -1e-8,
        format!("posterior covariance PSD: worst normalized min eig {worst_post:.2e} (tol -1e-8)"),
    );
}

fn symmetry_and_identity(report: &mut CriterionReport) {
    let mut rng = ChaCha12Rng::seed_from_u64(34);
    let mut worst_sym = 0.0f64;
    for case in 0..10u64 {
        let (d1, d2) = random_instance(4, 4, 1 + case as usize % 2, 80 + case);
        let state = build_round_state(&d1, &d2, &se_set(1.0), 0.1, 0.1, 1e-6, &[0.3]).unwrap();
        for _ in 0..6 {
            let a = [rng.gen_range(-3.0..3.25)];
            let b = [rng.gen_range(-3.0..3.25)];
            worst_sym = worst_sym
                .max((state.cov(&a, &b).unwrap() - state.cov(&b, &a).unwrap()).abs());
        }
    }
    report.check(
        worst_sym < 1e-10,
        format!("kappa symmetry: worst |cov(a,b)-cov(b,a)| {worst_sym:.2e} (tol 1e-10)"),
    );

    // ⟨(1/n)Σ k(xᵢ,·), k(z,·)⟩ = (1/n)Σ k(xᵢ,z).
    let mut worst_kme = 0.0f64;
    for _ in 0..200 {
        let spec = KernelSpec::squared_exponential(rng.gen_range(0.4..2.5), 1.0).unwrap();
        let pts = random_points(6, 2, -3.0, 3.25, &mut rng);
        let z: Vec<f64> = (0..2).map(|_| rng.gen_range(-3.0..3.25)).collect();
        let n = pts.len() as f64;
        let lhs: f64 = pts.iter().map(|x| kernel_eval(&spec, x, &z).unwrap() / n).sum();
        let rhs: f64 =
            pts.iter().map(|x| kernel_eval(&spec, &z, x).unwrap()).sum::<f64>() / n;
        worst_kme = worst_kme.max((lhs - rhs).abs());
    }
    report.check(
        worst_kme < 1e-10,
        format!("embedding inner-product identity: worst dev {worst_kme:.2e} (tol 1e-10)"),
    );
}

fn baseline_variance_properties(report: &mut CriterionReport) {
    let mut worst_growth = f64::NEG_INFINITY;
    let mut all_bits_equal = true;
    for case in 0..10u64 {
        let (d1, d2) = random_instance(4, 3, 1, 120 + case);
        let (extra, _) = random_instance(3, 0, 1, 220 + case);
        let mut d1_big = d1.clone();
        for i in 0..extra.len() {
            d1_big
                .push(
                    extra.contexts()[i].clone(),
                    extra.actions()[i].clone(),
                    extra.rewards()[i].clone(),
                )
                .unwrap();
        }
        let ks = se_set(1.0);
        let small = build_cme_round(&d1, &d2, &ks, 0.1, 0.1, &[0.2]).unwrap();
        let big = build_cme_round(&d1_big, &d2, &ks, 0.1, 0.1, &[0.2]).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(300 + case);
        for _ in 0..5 {
            let a = [rng.gen_range(-3.0..3.25)];
            worst_growth =
                worst_growth.max(big.stddev(&a).unwrap() - small.stddev(&a).unwrap());
        }

        // Same D1 with rescaled rewards: the variance chain must not move.
        let mut d1_pert = embandit::cme::MatchedDataset::new();
        for i in 0..d1.len() {
            let r: Vec<f64> = d1.rewards()[i].iter().map(|x| x * 0.5 - 1.0).collect();
            d1_pert.push(d1.contexts()[i].clone(), d1.actions()[i].clone(), r).unwrap();
        }
        let pert = build_cme_round(&d1_pert, &d2, &ks, 0.1, 0.1, &[0.2]).unwrap();
        for _ in 0..5 {
            let a = [rng.gen_range(-3.0..3.25)];
            if small.stddev(&a).unwrap().to_bits() != pert.stddev(&a).unwrap().to_bits() {
                all_bits_equal = false;
            }
        }
    }
    report.check(
        worst_growth <= 1e-8,
        format!("baseline stddev monotone under data growth: worst increase {worst_growth:.2e} (tol 1e-8)"),
    );
    report.check(
        all_bits_equal,
        "baseline stddev bit-identical under reward perturbation".to_string(),
    );
}

fn acquisition_shift_invariance(report: &mut CriterionReport) {
    let mut rng = ChaCha12Rng::seed_from_u64(35);
    let mut ok = true;
    for _ in 0..100 {
        let k = rng.gen_range(1..30);
        let means: Vec<f64> = (0..k).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let stds: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..5.0)).collect();
        let shift = rng.gen_range(-100.0..100.0);
        let beta = rng.gen_range(0.0..10.0);
        let base = PosteriorStats::new(means.clone(), stds.clone()).unwrap();
        let shifted =
            PosteriorStats::new(means.iter().map(|m| m + shift).collect(), stds).unwrap();
        if ucb_select(&base, beta).unwrap() != ucb_select(&shifted, beta).unwrap() {
            ok = false;
        }
    }
    report.check(ok, "acquisition argmax invariant under constant mean shifts (100 cases)");
}

#[derive(Default)]
struct CountingEnv {
    unmatched: AtomicUsize,
    contexts: AtomicUsize,
    intermediates: AtomicUsize,
    ultimates: AtomicUsize,
}

impl Environment<f64> for CountingEnv {
    fn d_r(&self) -> usize {
        1
    }
    fn action_grid(&self) -> Vec<f64> {
        (0..61).map(|i| -3.0 + 6.25 * i as f64 / 60.0).collect()
    }
    fn sample_context<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.contexts.fetch_add(1, Ordering::Relaxed);
        rng.gen_range(-3.0..3.25)
    }
    fn mean_intermediate(&self, s: f64, a: f64) -> Vec<f64> {
        vec![(s * a).tanh()]
    }
    fn sample_intermediate<R: Rng + ?Sized>(&self, s: f64, a: f64, rng: &mut R) -> Vec<f64> {
        self.intermediates.fetch_add(1, Ordering::Relaxed);
        vec![(s * a).tanh() + 0.25 * rng.gen_range(-1.0..1.0)]
    }
    fn mean_ultimate(&self, r: &[f64]) -> embandit::Result<f64> {
        Ok(r[0])
    }
    fn sample_ultimate<R: Rng + ?Sized>(&self, r: &[f64], rng: &mut R) -> embandit::Result<f64> {
        self.ultimates.fetch_add(1, Ordering::Relaxed);
        Ok(r[0] + 0.1 * rng.gen_range(-1.0..1.0))
    }
    fn sample_unmatched_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.unmatched.fetch_add(1, Ordering::Relaxed);
        vec![rng.gen_range(-2.0..2.0)]
    }
}

fn growth_law(report: &mut CriterionReport) {
    // |D₂| = m + (t−1) entering round t, observed through sampler calls:
    // m unmatched draws up front, then one (r, y) pair per round.
    let mut ok = true;
    for (rounds, m) in [(1usize, 0usize), (6, 3), (4, 50)] {
        let env = CountingEnv::default();
        let config = ExperimentConfig {
            rounds,
            trials: 1,
            unmatched_size: m,
            ..ExperimentConfig::new(Setting::A, Algorithm::CmeUcb)
        };
        run_trial_in(&env, &config, 0).unwrap();
        ok &= env.unmatched.load(Ordering::Relaxed) == m;
        ok &= env.contexts.load(Ordering::Relaxed) == rounds;
        ok &= env.intermediates.load(Ordering::Relaxed) == rounds;
        ok &= env.ultimates.load(Ordering::Relaxed) == m + rounds;
    }
    report.check(ok, "dataset growth law m + (t-1) via sampler call counts");
}

fn determinism(report: &mut CriterionReport) {
    let mut ok = true;
    for algorithm in Algorithm::ALL {
        let config = ExperimentConfig {
            rounds: 4,
            trials: 1,
            unmatched_size: 2,
            base_seed: 77,
            ..ExperimentConfig::new(Setting::B, algorithm)
        };
        let mut a = run_trial(&config, 2).unwrap();
        let mut b = run_trial(&config, 2).unwrap();
        for rec in [&mut a, &mut b] {
            for row in &mut rec.rows {
                row.wall_nanos = 0;
            }
        }
        ok &= a == b;
    }
    report.check(ok, "full trial determinism under fixed seed (all policies)");
}
