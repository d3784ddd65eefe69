use std::f64::consts::PI;

use nalgebra::DMatrix;
use proptest::prelude::*;

use reluphase::datagen::{
    binary_network, grid_dataset, grid_plane_dataset, init_halfspace, init_random, kelvin, make_subspace_pair, rho_at,
    sample_annulus, AnnulusDistribution, GridDatasetSpec,
};
use reluphase::geometry::{gc_check, DirectionSet, GC_TOL};
use reluphase::io::{read_dataset_csv, write_dataset_csv};
use reluphase::linalg::{dot, norm};
use reluphase::loss::{dataset_loss, LabeledDataset, LabeledSample};
use reluphase::Rng;

fn unit(i: usize, d: usize) -> Vec<f64> {
    (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect()
}

/// Smallest principal angle between two subspaces from the singular values of the cross-Gram matrix.
fn first_principal_angle(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let g = DMatrix::from_fn(a.len(), b.len(), |i, j| dot(&a[i], &b[j]));
    let s = g.singular_values().max();
    s.min(1.0).acos()
}

#[test]
fn principal_angle_matches_theta() {
    for theta in [PI / 6.0, PI / 4.0, PI / 3.0, 1.2] {
        let pair = make_subspace_pair(theta).unwrap();
        let got = first_principal_angle(&pair.class_basis(0), &pair.class_basis(1));
        assert!((got - theta).abs() < 1e-12, "theta {theta}: {got}");
        for v in &pair.basis {
            assert!((norm(v) - 1.0).abs() < 1e-15);
        }
    }
}

#[test]
fn right_angle_pair_is_orthogonal() {
    let pair = make_subspace_pair(PI / 2.0).unwrap();
    for u in pair.class_basis(0) {
        for w in pair.class_basis(1) {
            assert_eq!(dot(&u, &w), 0.0);
        }
    }
    let data = grid_dataset(&pair, &GridDatasetSpec::default(), &mut Rng::new(0)).unwrap();
    for a in data.class_samples(0) {
        for b in data.class_samples(1) {
            assert!(dot(&a.x, &b.x).abs() < 1e-12);
        }
    }
}

#[test]
fn noiseless_grid_counts_and_norms() {
    let pair = make_subspace_pair(PI / 3.0).unwrap();
    let data = grid_dataset(&pair, &GridDatasetSpec::default(), &mut Rng::new(1)).unwrap();
    assert_eq!(data.len(), 1760);
    assert_eq!(data.class_count(0), 880);
    for s in data.samples() {
        let n = norm(&s.x);
        assert!((1.0 - 1e-12..=2.0 + 1e-12).contains(&n), "{n}");
    }
    let plane = grid_plane_dataset(&GridDatasetSpec::default()).unwrap();
    assert_eq!(plane.len(), 880);
    assert_eq!(plane.dim(), 2);
}

#[test]
fn noisy_grid_stays_in_sanity_band() {
    let sigma = 0.05;
    let pair = make_subspace_pair(PI / 4.0).unwrap();
    let data = grid_dataset(&pair, &GridDatasetSpec::with_noise(sigma), &mut Rng::new(2)).unwrap();
    // four coordinates of noise: |e| concentrates near 2 sigma
    let band = 4.0 * 2.0 * sigma;
    let outside = data
        .samples()
        .iter()
        .filter(|s| {
            let n = norm(&s.x);
            n < 1.0 - band || n > 2.0 + band
        })
        .count();
    assert!(outside <= 2, "{outside} samples outside the band");
}

#[test]
fn annulus_radial_fraction() {
    let dist = AnnulusDistribution {
        basis: vec![unit(0, 2), unit(1, 2)],
        m_inner: 1.0,
        m_outer: 2.0,
    };
    let n = 200_000;
    let data = sample_annulus(&[dist], n, &mut Rng::new(3)).unwrap();
    let inner = data.samples().iter().filter(|s| norm(&s.x) <= 1.5).count() as f64 / n as f64;
    let p = 5.0 / 12.0;
    let se = (p * (1.0 - p) / n as f64).sqrt();
    assert!((inner - p).abs() < 4.0 * se, "{inner} vs {p}");
    let mut mean = [0.0; 2];
    for s in data.samples() {
        assert!((1.0..=2.0).contains(&norm(&s.x)));
        mean[0] += s.x[0] / n as f64;
        mean[1] += s.x[1] / n as f64;
    }
    assert!(norm(&mean) < 5.0 / (n as f64).sqrt() * 2.0);
}

#[test]
fn annulus_in_embedded_subspace() {
    let pair = make_subspace_pair(PI / 3.0).unwrap();
    let dist = AnnulusDistribution {
        basis: pair.class_basis(1),
        m_inner: 0.5,
        m_outer: 3.0,
    };
    assert_eq!(dist.ambient_dim(), 4);
    let data = sample_annulus(&[dist], 1000, &mut Rng::new(4)).unwrap();
    for s in data.samples() {
        assert!(s.x[0].abs() < 1e-15 && s.x[1].abs() < 1e-15);
        let n = norm(&s.x);
        assert!((0.5 - 1e-12..=3.0 + 1e-12).contains(&n));
    }
}

#[test]
fn random_init_entry_variance() {
    let w = init_random(10, 10_000, &mut Rng::new(5));
    let xs = w.as_slice();
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    assert!((var - 1.0).abs() < 0.05, "{var}");
    assert_eq!(w, init_random(10, 10_000, &mut Rng::new(5)));
}

#[test]
fn random_init_column_norm_median() {
    // median of chi_4 is about 1.8324
    let w = init_random(4, 20_001, &mut Rng::new(6));
    let mut norms = w.column_norms();
    norms.sort_by(f64::total_cmp);
    let median = norms[norms.len() / 2];
    assert!((median - 1.8324).abs() < 0.03, "{median}");
}

#[test]
fn halfspace_second_coordinates_match_random() {
    let a = init_random(2, 6, &mut Rng::new(7));
    let b = init_halfspace(2, 6, &mut Rng::new(7)).unwrap();
    for j in 0..6 {
        assert_eq!(a.col(j)[1], b.col(j)[1]);
        assert_eq!(a.col(j)[0].abs(), b.col(j)[0]);
    }
}

#[test]
fn kelvin_hand_values() {
    assert_eq!(kelvin(&[2.0, 0.0]).unwrap(), vec![0.5, 0.0]);
    let k = kelvin(&[0.5, 0.5]).unwrap();
    assert!((k[0] - 1.0).abs() < 1e-15 && (k[1] - 1.0).abs() < 1e-15);
    assert!(kelvin(&[0.0, 0.0]).is_err());
}

proptest! {
    #[test]
    fn halfspace_init_never_satisfies_gc(seed in 0u64..10_000, k in 1usize..13, d in 2usize..5) {
        let w = init_halfspace(d, k, &mut Rng::new(seed)).unwrap();
        for c in w.columns() {
            prop_assert!(c[0] >= 0.0);
        }
        let dirs = DirectionSet::from_weights(&w, 0..k);
        if !dirs.is_empty() {
            prop_assert!(!gc_check(&dirs, GC_TOL).unwrap().holds());
        }
    }

    #[test]
    fn kelvin_is_an_involution(x in prop::collection::vec(-10.0f64..10.0, 1..6)) {
        prop_assume!(norm(&x) > 1e-3);
        let back = kelvin(&kelvin(&x).unwrap()).unwrap();
        for (a, b) in back.iter().zip(&x) {
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
        prop_assert!((norm(&kelvin(&x).unwrap()) * norm(&x) - 1.0).abs() < 1e-12);
    }

    /// Zero loss on the planar grid iff `rho(theta) >= |x*|` at every data angle.
    #[test]
    fn rho_criterion_matches_loss(seed in 0u64..400, scale in 0.2f64..6.0) {
        let data = grid_plane_dataset(&GridDatasetSpec::default()).unwrap();
        let w = init_random(2, 6, &mut Rng::new(seed)).scaled(scale);
        let params = binary_network(w).unwrap();
        let zero = dataset_loss(&params, &data).unwrap() == 0.0;
        let mut margin = f64::INFINITY;
        for s in data.samples() {
            margin = margin.min(rho_at(&params, &s.x).unwrap() - 1.0 / norm(&s.x));
        }
        prop_assume!(margin.abs() > 1e-9);
        prop_assert_eq!(zero, margin >= 0.0);
    }

    #[test]
    fn dataset_csv_round_trip(
        rows in prop::collection::vec((prop::collection::vec(-1e6f64..1e6, 3), 0usize..3), 1..40)
    ) {
        let samples: Vec<LabeledSample> = rows.into_iter().map(|(x, label)| LabeledSample { x, label }).collect();
        let data = LabeledDataset::new(samples, 3).unwrap();
        let mut buf = Vec::new();
        write_dataset_csv(&data, &mut buf).unwrap();
        let back = read_dataset_csv(buf.as_slice(), Some(3)).unwrap();
        prop_assert_eq!(back, data);
    }
}
