use proptest::prelude::*;
use sktsim::kernels::{KernelFamily, MollifierProfile};
use sktsim::noise::NoisePlan;
use sktsim::particles::{
    build_cells, empirical_convolution, empirical_grad_convolution, interaction_gradients, interaction_sums,
    sample_initial, InitialDistribution, ParticleEnsemble,
};

const MASSES: [[f64; 2]; 2] = [[0.7, 355.0], [25.0, 0.0]];

fn family(eta: f64) -> KernelFamily {
    let m: Vec<Vec<f64>> = MASSES.iter().map(|r| r.to_vec()).collect();
    KernelFamily::new(MollifierProfile::bump(1).unwrap(), eta, &m).unwrap()
}

fn brute_conv(e: &ParticleEnsemble, kf: &KernelFamily, k: usize, i: usize) -> Vec<f64> {
    let x = e.position(i, k)[0];
    let mut out = vec![0.0; e.species()];
    for j in 0..e.species() {
        for l in 0..e.particles() {
            if (j, l) != (i, k) {
                out[j] += kf.eval(&[x - e.position(j, l)[0]], i, j);
            }
        }
        out[j] /= e.particles() as f64;
    }
    out
}

fn brute_grad(e: &ParticleEnsemble, kf: &KernelFamily, k: usize, i: usize) -> Vec<f64> {
    let x = e.position(i, k)[0];
    let mut out = vec![0.0; e.species()];
    let mut g = [0.0];
    for j in 0..e.species() {
        for l in 0..e.particles() {
            kf.grad(&[x - e.position(j, l)[0]], i, j, &mut g);
            out[j] += g[0];
        }
        out[j] /= e.particles() as f64;
    }
    out
}

fn cloud() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, f64)> {
    (1usize..120).prop_flat_map(|n| {
        (
            prop::collection::vec(-6.0f64..6.0, n),
            prop::collection::vec(-6.0f64..6.0, n),
            0.2f64..3.0,
        )
    })
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * (1.0 + b.abs())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn cell_convolutions_equal_brute_force((a, b, eta) in cloud()) {
        let e = ParticleEnsemble::from_species_1d(&[a, b], 0.0).unwrap();
        let kf = family(eta);
        let cells = build_cells(&e, eta).unwrap();
        let sums = interaction_sums(&e, &cells, &kf).unwrap();
        let grads = interaction_gradients(&e, &cells, &kf).unwrap();
        for i in 0..2 {
            for k in 0..e.particles() {
                let flat = e.flat_index(i, k);
                let want = brute_conv(&e, &kf, k, i);
                let want_g = brute_grad(&e, &kf, k, i);
                let one = empirical_convolution(&e, &cells, k, i, &kf).unwrap();
                let one_g = empirical_grad_convolution(&e, &cells, k, i, &kf).unwrap();
                for j in 0..2 {
                    prop_assert!(close(one[j], want[j]), "{} vs {}", one[j], want[j]);
                    prop_assert!(close(sums[flat * 2 + j], want[j]), "{} vs {}", sums[flat * 2 + j], want[j]);
                    prop_assert!(close(one_g[j][0], want_g[j]));
                    prop_assert!(close(grads[flat * 2 + j], want_g[j]), "{} vs {}", grads[flat * 2 + j], want_g[j]);
                }
            }
        }
    }

    #[test]
    fn neighbor_queries_cover_range_search((a, b, eta) in cloud(), centers in prop::collection::vec(-7.0f64..7.0, 50)) {
        let e = ParticleEnsemble::from_species_1d(&[a, b], 0.0).unwrap();
        let cells = build_cells(&e, eta).unwrap();
        for c in centers {
            let found = cells.neighbors(&[c]);
            for j in 0..2 {
                for l in 0..e.particles() {
                    if (e.position(j, l)[0] - c).abs() <= eta {
                        prop_assert!(found.contains(&(j, l)));
                    }
                }
            }
            // every particle sits in exactly one cell
            let mut seen = found.clone();
            seen.sort();
            seen.dedup();
            prop_assert_eq!(seen.len(), found.len());
        }
    }

    #[test]
    fn relabeling_permutes_outputs((a, b, eta) in cloud(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let e = ParticleEnsemble::from_species_1d(&[a, b], 0.0).unwrap();
        let n = e.particles();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let mut p = e.clone();
        p.permute_species(1, &perm);
        let kf = family(eta);
        let s0 = interaction_sums(&e, &build_cells(&e, eta).unwrap(), &kf).unwrap();
        let s1 = interaction_sums(&p, &build_cells(&p, eta).unwrap(), &kf).unwrap();
        let g0 = interaction_gradients(&e, &build_cells(&e, eta).unwrap(), &kf).unwrap();
        let g1 = interaction_gradients(&p, &build_cells(&p, eta).unwrap(), &kf).unwrap();
        for k in 0..n {
            let new = p.flat_index(1, k);
            let old = e.flat_index(1, perm[k]);
            for j in 0..2 {
                prop_assert_eq!(s1[new * 2 + j], s0[old * 2 + j]);
                prop_assert_eq!(g1[new * 2 + j], g0[old * 2 + j]);
            }
        }
    }

    #[test]
    fn translation_leaves_convolutions_unchanged((a, b, eta) in cloud(), shift in -5.0f64..5.0) {
        let e = ParticleEnsemble::from_species_1d(&[a, b], 0.0).unwrap();
        let mut t = e.clone();
        t.translate(&[shift]);
        let kf = family(eta);
        let s0 = interaction_sums(&e, &build_cells(&e, eta).unwrap(), &kf).unwrap();
        let s1 = interaction_sums(&t, &build_cells(&t, eta).unwrap(), &kf).unwrap();
        let scale = s0.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for (x, y) in s0.iter().zip(&s1) {
            // shifted differences carry rounding of order ulp(shift)
            prop_assert!((x - y).abs() <= 1e-9 * scale, "{} vs {}", x, y);
        }
    }
}

#[test]
fn self_term_is_excluded() {
    let e = ParticleEnsemble::from_species_1d(&[vec![0.3]], 0.0).unwrap();
    let one = KernelFamily::new(MollifierProfile::bump(1).unwrap(), 1.0, &[vec![1.0]]).unwrap();
    let cells = build_cells(&e, 1.0).unwrap();
    assert_eq!(empirical_convolution(&e, &cells, 0, 0, &one).unwrap(), vec![0.0]);
}

#[test]
fn coincident_pair_example() {
    let m = MollifierProfile::bump(1).unwrap();
    let mass = m.mass();
    let kf = KernelFamily::new(m, 2.0, &[vec![mass]]).unwrap();
    let e = ParticleEnsemble::from_species_1d(&[vec![1.0, 1.0]], 0.0).unwrap();
    let cells = build_cells(&e, 2.0).unwrap();
    let s = empirical_convolution(&e, &cells, 0, 0, &kf).unwrap()[0];
    assert!((s - 0.5 * 0.5 * (-1.0f64).exp()).abs() < 1e-12, "{s}");
    assert!((s - 0.091970).abs() < 1e-6);
    let g = empirical_grad_convolution(&e, &cells, 0, 0, &kf).unwrap();
    assert_eq!(g[0][0], 0.0);
}

#[test]
fn symmetric_pair_has_opposite_gradients() {
    let kf = family(1.0);
    let e = ParticleEnsemble::from_species_1d(&[vec![-0.3, 0.3], vec![10.0, 12.0]], 0.0).unwrap();
    let cells = build_cells(&e, 1.0).unwrap();
    let a = empirical_grad_convolution(&e, &cells, 0, 0, &kf).unwrap();
    let b = empirical_grad_convolution(&e, &cells, 1, 0, &kf).unwrap();
    assert!(a[0][0] != 0.0);
    assert_eq!(a[0][0], -b[0][0]);
}

#[test]
fn separated_and_close_queries() {
    let eta = 0.5;
    let far = ParticleEnsemble::from_species_1d(&[vec![0.0, 3.0 * eta]], 0.0).unwrap();
    let cells = build_cells(&far, eta).unwrap();
    assert!(!cells.neighbors(&[0.0]).contains(&(0, 1)));
    let near = ParticleEnsemble::from_species_1d(&[vec![0.0, 0.5 * eta]], 0.0).unwrap();
    let cells = build_cells(&near, eta).unwrap();
    assert!(cells.neighbors(&[0.0]).contains(&(0, 1)));
    assert!(cells.neighbors(&[0.5 * eta]).contains(&(0, 0)));
}

#[test]
fn gaussian_sampling_moments() {
    let dist = InitialDistribution::gaussians_1d(&[-1.0, 1.0], 2.0);
    let e = sample_initial(&dist, 100_000, &NoisePlan::new(11), 0).unwrap();
    for (i, mean) in [(0, -1.0), (1, 1.0)] {
        let xs = e.species_positions(i);
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64;
        assert!((m - mean).abs() < 0.02, "mean {m}");
        assert!((v - 2.0).abs() < 0.05, "variance {v}");
    }
}

#[test]
fn degenerate_sampling_and_determinism() {
    let dist = InitialDistribution::gaussians_1d(&[0.0], 1e-12);
    let e = sample_initial(&dist, 3, &NoisePlan::new(5), 0).unwrap();
    assert!(e.positions().iter().all(|x| x.abs() < 1e-5));
    let dist = InitialDistribution::gaussians_1d(&[-1.0, 1.0], 2.0);
    let a = sample_initial(&dist, 500, &NoisePlan::new(5), 3).unwrap();
    let b = sample_initial(&dist, 500, &NoisePlan::new(5), 3).unwrap();
    assert_eq!(a.positions(), b.positions());
    // prefix property across particle counts
    let c = sample_initial(&dist, 800, &NoisePlan::new(5), 3).unwrap();
    assert_eq!(a.species_positions(1), &c.species_positions(1)[..500]);
}
