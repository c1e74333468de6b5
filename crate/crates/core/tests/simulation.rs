use hyperclust::distributions::ghd_mean_cov;
use hyperclust::em::{Family, FitConfig};
use hyperclust::gpcm::CovarianceStructure;
use hyperclust::missing::Mechanism;
use hyperclust::selection::ModelGrid;
use hyperclust::simulation::*;

#[test]
fn designs_have_the_documented_shape() {
    for id in 1..=6 {
        let d = builtin_design(id).unwrap();
        assert_eq!((d.g(), d.n()), (2, 400));
        let (x, labels) = generate(&d, 1).unwrap();
        assert_eq!(x.shape(), (400, 2));
        assert_eq!(labels.iter().filter(|&&l| l == 1).count(), 200);
        assert!(x.iter().all(|v| v.is_finite()));
    }
    assert!(builtin_design(0).is_err() && builtin_design(7).is_err());
    assert_eq!(builtin_design(2).unwrap().separation, Separation::Overlapping);
}

#[test]
fn generation_is_seeded() {
    let d = builtin_design(3).unwrap();
    assert_eq!(generate(&d, 5).unwrap().0, generate(&d, 5).unwrap().0);
    assert_ne!(generate(&d, 5).unwrap().0, generate(&d, 6).unwrap().0);
    assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
}

#[test]
fn sample_means_match_component_means() {
    let mut d = builtin_design(1).unwrap();
    d.n_per_component = 20_000;
    let (x, _) = generate(&d, 2).unwrap();
    for (g, comp) in d.components.iter().enumerate() {
        let TrueComponent::Ghd(p) = comp else { unreachable!() };
        let (mean, cov) = ghd_mean_cov(p).unwrap();
        let block = x.rows(g * 20_000, 20_000);
        for j in 0..2 {
            let m = block.column(j).mean();
            let se = (cov[(j, j)] / 20_000.0).sqrt();
            assert!((m - mean[j]).abs() < 5.0 * se, "component {g} coord {j}: {m} vs {}", mean[j]);
        }
    }
}

#[test]
fn alignment_finds_the_relabeling() {
    let truth = vec![0, 0, 1, 1, 2, 2, 2];
    let fitted = vec![2, 2, 0, 0, 1, 1, 0];
    assert_eq!(align_components(&truth, &fitted, 3), vec![2, 0, 1]);
}

#[test]
fn tiny_study_is_reproducible() {
    let mut d = builtin_design(3).unwrap();
    d.n_per_component = 60;
    let grid = ModelGrid::new(vec![2], vec![CovarianceStructure::VEI], vec![Family::Mst]).unwrap();
    let cfg = FitConfig { n_starts: 1, max_iter: 1000, seed: 11, ..Default::default() };
    let run = || run_study(&d, &[Mechanism::Mcar, Mechanism::MarPattern1], &[0.1], 2, &grid, &cfg).unwrap();
    let (a, b) = (run(), run());
    assert_eq!(a.cells.len(), 2);
    for (x, y) in a.cells.iter().zip(&b.cells) {
        assert_eq!(x.aris, y.aris);
        assert_eq!(x.params, y.params);
        assert_eq!(x.aris.len() + x.failures.len(), 2);
    }
    let names: Vec<&str> = a.cells[0].params.iter().map(|p| p.name.as_str()).collect();
    assert!(names.contains(&"mu+beta_1[2]") && names.contains(&"nu_2"));
    assert!(run_study(&d, &[], &[0.1], 1, &grid, &cfg).is_err());
}
