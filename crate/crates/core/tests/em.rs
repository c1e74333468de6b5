mod common;

use common::{random_ghd, random_spd, rng, to_rows};
use hyperclust::distributions::{GhdParams, StParams};
use hyperclust::em::*;
use hyperclust::gpcm::CovarianceStructure;
use hyperclust::missing::{inject_missingness, MaskedDataset, Mechanism};
use hyperclust::simulation::{builtin_design, generate};
use hyperclust_oracles::{bessel, diff::richardson, gaussian_em, gig};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn small_sim(id: usize, per: usize, seed: u64, rate: f64) -> (MaskedDataset, Vec<usize>) {
    let mut d = builtin_design(id).unwrap();
    d.n_per_component = per;
    let (x, labels) = generate(&d, seed).unwrap();
    (inject_missingness(&x, Mechanism::Mcar, rate, seed + 1).unwrap(), labels)
}

fn quick(seed: u64) -> FitConfig {
    FitConfig { n_starts: 1, max_iter: 150, seed, ..Default::default() }
}

fn ghd_model(comps: Vec<GhdParams>, weights: Vec<f64>) -> MixtureModel {
    MixtureModel::new(Family::Mghd, CovarianceStructure::VVV, weights, comps.into_iter().map(ComponentParams::Ghd).collect()).unwrap()
}

#[test]
fn single_component_responsibilities_are_one() {
    let (ds, _) = small_sim(1, 30, 1, 0.1);
    let mut r = rng(2);
    let model = ghd_model(vec![random_ghd(&mut r, 2)], vec![1.0]);
    let cache = e_step(&ds, &model, &Default::default()).unwrap();
    assert!(cache.resp.iter().all(|&z| z == 1.0));
}

#[test]
fn complete_rows_use_the_gig_posterior() {
    // for a fully observed row W | x is GIG(λ - p/2, ω + δ, ω + βᵀΣ⁻¹β)
    let mut r = rng(3);
    let p = random_ghd(&mut r, 3);
    let x = DVector::from_vec(vec![0.3, -1.0, 2.0]);
    let ds = MaskedDataset::complete(DMatrix::from_row_slice(1, 3, x.as_slice())).unwrap();
    let cache = e_step(&ds, &ghd_model(vec![p.clone()], vec![1.0]), &Default::default()).unwrap();
    let inv = p.sigma.clone().try_inverse().unwrap();
    let d = &x - &p.mu;
    let delta = (d.transpose() * &inv * &d)[(0, 0)];
    let rho = (p.beta.transpose() * &inv * &p.beta)[(0, 0)];
    let (l, chi, psi) = (p.lambda - 1.5, p.omega + delta, p.omega + rho);
    let want = [gig::moment(l, chi, psi, 1.0), gig::moment(l, chi, psi, -1.0), gig::expect_log(l, chi, psi)];
    let got = [cache.a[(0, 0)], cache.b[(0, 0)], cache.c[(0, 0)]];
    for (g, w) in got.iter().zip(want) {
        assert!((g - w).abs() < 1e-8 * w.abs().max(1.0), "{g} vs {w}");
    }
}

#[test]
fn latent_expectations_obey_jensen() {
    let (ds, _) = small_sim(3, 40, 4, 0.3);
    let mut r = rng(5);
    let model = ghd_model(vec![random_ghd(&mut r, 2), random_ghd(&mut r, 2)], vec![0.4, 0.6]);
    let cache = e_step(&ds, &model, &Default::default()).unwrap();
    for i in 0..ds.n() {
        for g in 0..2 {
            let (a, b, c) = (cache.a[(i, g)], cache.b[(i, g)], cache.c[(i, g)]);
            assert!(a * b >= 1.0 - 1e-12 && c <= a.ln() + 1e-12 && -c <= b.ln() + 1e-12);
        }
        let s: f64 = (0..2).map(|g| cache.resp[(i, g)]).sum();
        assert!((s - 1.0).abs() < 1e-12);
    }
}

#[test]
fn e_step_loglik_is_the_observed_loglik() {
    let (ds, _) = small_sim(1, 50, 6, 0.3);
    let mut r = rng(7);
    let model = ghd_model(vec![random_ghd(&mut r, 2), random_ghd(&mut r, 2)], vec![0.5, 0.5]);
    let cache = e_step(&ds, &model, &Default::default()).unwrap();
    let direct = observed_log_likelihood(&ds, &model).unwrap();
    assert!((cache.loglik - direct).abs() < 1e-9 * direct.abs());
}

#[test]
fn em_is_monotone_for_both_families() {
    for (id, family, s) in [(1, Family::Mghd, CovarianceStructure::VEE), (3, Family::Mst, CovarianceStructure::VEI), (5, Family::Mghd, CovarianceStructure::EEE)] {
        let (ds, _) = small_sim(id, 60, 8, 0.15);
        let rep = fit(&ds, 2, family, s, &quick(1)).unwrap();
        for w in rep.loglik_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-8, "{family} {s}: {} -> {}", w[0], w[1]);
        }
    }
}

#[test]
fn skew_t_with_huge_dof_collapses_to_gaussian_em() {
    let (ds, _) = small_sim(5, 25, 9, 0.2);
    let n = ds.n();
    let comps: Vec<ComponentParams> = (0..2)
        .map(|k| {
            let mu = DVector::from_vec(vec![k as f64 - 0.5, 1.0 - 2.0 * k as f64]);
            ComponentParams::St(StParams::new(1e10, mu, random_spd(&mut rng(k), 2), DVector::zeros(2)).unwrap())
        })
        .collect();
    let model = MixtureModel::new(Family::Mst, CovarianceStructure::VVV, vec![0.45, 0.55], comps).unwrap();
    let cache = e_step(&ds, &model, &Default::default()).unwrap();
    let cfg = FitConfig { freeze_skewness: true, freeze_shape: true, ..Default::default() };
    let next = m_step(&ds, &cache, &model, &cfg).unwrap().model;
    let rows: Vec<Vec<Option<f64>>> = (0..n).map(|i| (0..2).map(|j| ds.value(i, j)).collect()).collect();
    let means: Vec<Vec<f64>> = model.components.iter().map(|c| c.mu().iter().copied().collect()).collect();
    let covs: Vec<_> = model.components.iter().map(|c| to_rows(c.sigma())).collect();
    let want = gaussian_em::step(&rows, &model.weights, &means, &covs);
    for k in 0..2 {
        assert!((next.weights[k] - want.weights[k]).abs() < 1e-8);
        for a in 0..2 {
            assert!((next.components[k].mu()[a] - want.means[k][a]).abs() < 1e-8);
            for b in 0..2 {
                assert!((next.components[k].sigma()[(a, b)] - want.covs[k][a][b]).abs() < 1e-8);
            }
        }
    }
}

#[test]
fn index_update_climbs_to_the_gig_mle() {
    // with population moments of GIG(λ0, ω0, ω0) the objective peaks at (λ0, ω0)
    for &(l0, w0, l, w) in &[(1.5, 2.0, 0.5, 1.0), (-1.2, 4.0, -0.4, 1.0), (2.5, 0.7, 1.0, 3.0)] {
        let a = gig::moment(l0, w0, w0, 1.0);
        let b = gig::moment(l0, w0, w0, -1.0);
        let c = gig::expect_log(l0, w0, w0);
        let q = |lam: f64, om: f64| -bessel::log_k(lam, om) + (lam - 1.0) * c - 0.5 * om * (a + b);
        let (mut lam, mut om) = (l, w);
        for _ in 0..3000 {
            let u = update_index_concentration(a, b, c, lam, om, &Default::default()).unwrap();
            assert!(q(u.lambda, u.omega) >= q(lam, om) - 1e-9);
            (lam, om) = (u.lambda, u.omega);
        }
        assert!((lam - l0).abs() < 1e-3 && (om - w0).abs() < 1e-3, "({lam}, {om}) vs ({l0}, {w0})");
        let gl = richardson(|t| q(t, om), lam, 1e-2);
        let gw = richardson(|t| q(lam, t), om, 1e-2);
        assert!(gl.abs() < 1e-4 && gw.abs() < 1e-4, "gradient ({gl}, {gw})");
    }
}

#[test]
fn dof_update_solves_its_equation() {
    for &k in &[1.01, 1.05, 1.3] {
        let u = update_dof(k).unwrap();
        assert!(!u.clamped);
        // residual by an independent Richardson derivative of ln Γ: ψ(v/2) = d/dv 2 ln Γ(v/2)
        let psi = |x: f64| richardson(|t| statrs::function::gamma::ln_gamma(t), x, 1e-2);
        let v = u.dof;
        let resid = (v / 2.0).ln() + 1.0 - psi(v / 2.0) - k;
        assert!(resid.abs() < 1e-7, "k={k}: {resid}");
    }
}

#[test]
fn fit_is_invariant_to_row_order() {
    let (ds, _) = small_sim(3, 40, 10, 0.15);
    let rev: Vec<usize> = (0..ds.n()).rev().collect();
    let shuffled = ds.select_rows(&rev);
    let a = fit(&ds, 2, Family::Mst, CovarianceStructure::VEI, &quick(3)).unwrap();
    let b = fit(&shuffled, 2, Family::Mst, CovarianceStructure::VEI, &quick(3)).unwrap();
    assert_eq!(a.loglik, b.loglik);
    for (k, &i) in rev.iter().enumerate() {
        assert_eq!(a.map_labels[i], b.map_labels[k]);
    }
}

#[test]
fn unconstrained_step_dominates_constrained_fit() {
    // a VEE solution is a valid VVV point, so one VVV EM step from it cannot end lower
    let (ds, _) = small_sim(1, 50, 11, 0.05);
    let vee = fit(&ds, 2, Family::Mghd, CovarianceStructure::VEE, &quick(4)).unwrap();
    let mut start = vee.model.clone();
    start.structure = CovarianceStructure::VVV;
    let cache = e_step(&ds, &start, &Default::default()).unwrap();
    assert!((cache.loglik - vee.loglik).abs() < 1e-9 * vee.loglik.abs());
    let step = m_step(&ds, &cache, &start, &quick(4)).unwrap();
    assert!(observed_log_likelihood(&ds, &step.model).unwrap() >= vee.loglik - 1e-8);
}

#[test]
fn predict_reproduces_fit_outputs() {
    let (ds, _) = small_sim(5, 40, 12, 0.15);
    let rep = fit(&ds, 2, Family::Mghd, CovarianceStructure::VVV, &quick(5)).unwrap();
    let pred = predict(&rep.model, &ds).unwrap();
    assert_eq!(pred.labels, rep.map_labels);
    assert!((pred.loglik - rep.loglik).abs() < 1e-9 * rep.loglik.abs());
    assert!((&pred.imputed - &rep.imputed).amax() < 1e-9);
    for i in 0..ds.n() {
        for j in 0..2 {
            if let Some(v) = ds.value(i, j) {
                assert_eq!(rep.imputed[(i, j)], v);
            }
        }
    }
    assert!(rep.bic < 2.0 * rep.loglik && rep.icl <= rep.bic);
}

#[test]
fn fit_rejects_bad_arguments() {
    let (ds, _) = small_sim(1, 10, 13, 0.0);
    assert!(fit(&ds, 0, Family::Mghd, CovarianceStructure::VVV, &quick(0)).is_err());
    assert!(fit(&ds, 21, Family::Mghd, CovarianceStructure::VVV, &quick(0)).is_err());
    let cfg = FitConfig { init: InitMethod::Labels(vec![0; 3]), ..quick(0) };
    assert!(fit(&ds, 2, Family::Mghd, CovarianceStructure::VVV, &cfg).is_err());
    let cfg = FitConfig { epsilon: 0.0, ..quick(0) };
    assert!(fit(&ds, 2, Family::Mghd, CovarianceStructure::VVV, &cfg).is_err());
}

#[test]
fn seeds_make_fits_reproducible() {
    let (ds, _) = small_sim(3, 40, 14, 0.15);
    let cfg = FitConfig { n_starts: 3, max_iter: 60, seed: 9, ..Default::default() };
    let a = fit(&ds, 2, Family::Mst, CovarianceStructure::VVV, &cfg).unwrap();
    let b = fit(&ds, 2, Family::Mst, CovarianceStructure::VVV, &cfg).unwrap();
    assert_eq!(a.loglik_trace, b.loglik_trace);
    assert_eq!(a.model, b.model);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn relabeling_components_permutes_responsibilities(seed in 0u64..10_000) {
        let (ds, _) = small_sim(1, 15, seed, 0.2);
        let mut r = rng(seed);
        let c = vec![random_ghd(&mut r, 2), random_ghd(&mut r, 2), random_ghd(&mut r, 2)];
        let m1 = ghd_model(c.clone(), vec![0.2, 0.3, 0.5]);
        let m2 = ghd_model(vec![c[2].clone(), c[0].clone(), c[1].clone()], vec![0.5, 0.2, 0.3]);
        let e1 = e_step(&ds, &m1, &Default::default()).unwrap();
        let e2 = e_step(&ds, &m2, &Default::default()).unwrap();
        prop_assert!((e1.loglik - e2.loglik).abs() < 1e-9 * e1.loglik.abs());
        for i in 0..ds.n() {
            for (g1, g2) in [(0, 1), (1, 2), (2, 0)] {
                prop_assert!((e1.resp[(i, g1)] - e2.resp[(i, g2)]).abs() < 1e-12);
                prop_assert!((e1.a[(i, g1)] - e2.a[(i, g2)]).abs() < 1e-12 * e1.a[(i, g1)].max(1.0));
            }
        }
    }

    #[test]
    fn one_em_step_never_lowers_the_likelihood(seed in 0u64..10_000) {
        let (ds, _) = small_sim(3, 30, seed, 0.3);
        let cfg = FitConfig { n_starts: 1, max_iter: 1, seed, ..Default::default() };
        let model = initialize(&ds, 2, Family::Mghd, CovarianceStructure::VVV, &cfg);
        prop_assume!(model.is_ok());
        let model = model.unwrap();
        let cache = e_step(&ds, &model, &Default::default()).unwrap();
        if let Ok(out) = m_step(&ds, &cache, &model, &cfg) {
            let after = observed_log_likelihood(&ds, &out.model).unwrap();
            prop_assert!(after >= cache.loglik - 1e-8, "{} -> {}", cache.loglik, after);
        }
    }
}
