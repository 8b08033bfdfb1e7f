use proptest::prelude::*;
use sktsim::kernels::{kernel_mass, profile_eval, KernelFamily, MollifierProfile, ProfileShape};
use sktsim::nonlinearity::{make_cutoff, NonlinearityKind};

fn bump(r: f64) -> f64 {
    if r.abs() < 1.0 {
        (-1.0 / (1.0 - r * r)).exp()
    } else {
        0.0
    }
}

// Trapezoid rule; spectrally accurate for smooth compactly supported integrands.
fn trapezoid(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    (1..n).map(|k| f(a + k as f64 * h)).sum::<f64>() * h + 0.5 * h * (f(a) + f(b))
}

fn family(eta: f64, masses: &[Vec<f64>]) -> KernelFamily {
    KernelFamily::new(MollifierProfile::bump(1).unwrap(), eta, masses).unwrap()
}

#[test]
fn bump_mass_matches_trapezoid() {
    let m = kernel_mass(ProfileShape::Bump, 1.0, 1).unwrap();
    let oracle = trapezoid(bump, -1.0, 1.0, 20_000);
    assert!((m - oracle).abs() < 1e-12, "{m} vs {oracle}");
    assert!((m - 0.443994).abs() < 1e-6);
}

#[test]
fn pair_kernels_integrate_to_pair_mass() {
    let masses = vec![vec![0.0, 355.0, 355.0], vec![25.0, 0.0, 25.0], vec![355.0, 0.0, 0.0]];
    for eta in [0.1, 0.5, 1.0, 2.0] {
        let kf = family(eta, &masses);
        for i in 0..3 {
            for j in 0..3 {
                let q = trapezoid(|x| kf.eval(&[x], i, j), -eta, eta, 20_000);
                let a = masses[i][j];
                assert!((q - a).abs() <= 1e-8 * a.max(1e-300), "eta {eta} ({i},{j}): {q} vs {a}");
            }
        }
    }
}

#[test]
fn profile_matches_closed_form() {
    for k in 0..=200 {
        let r = 1.2 * k as f64 / 200.0;
        let got = profile_eval(ProfileShape::Bump, 1.0, r);
        assert!((got - bump(r)).abs() <= 1e-15, "r = {r}");
    }
}

fn unit_masses() -> Vec<Vec<f64>> {
    vec![vec![0.3, 355.0], vec![25.0, 1.0]]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn kernel_is_even(x in -3.0f64..3.0, eta in 0.05f64..2.5, i in 0usize..2, j in 0usize..2) {
        let kf = family(eta, &unit_masses());
        prop_assert_eq!(kf.eval(&[x], i, j), kf.eval(&[-x], i, j));
    }

    #[test]
    fn kernel_is_nonnegative(x in -3.0f64..3.0, eta in 0.05f64..2.5, i in 0usize..2, j in 0usize..2) {
        let kf = family(eta, &unit_masses());
        prop_assert!(kf.eval(&[x], i, j) >= 0.0);
        prop_assert!(profile_eval(ProfileShape::Bump, 1.0, x.abs()) >= 0.0);
    }

    #[test]
    fn gradient_matches_central_differences(t in -0.95f64..0.95, eta in 0.1f64..2.0) {
        // unit pair mass keeps the absolute tolerance meaningful
        let kf = family(eta, &[vec![1.0]]);
        let x = t * eta;
        let h = 1e-5 * eta;
        let fd = (kf.eval(&[x + h], 0, 0) - kf.eval(&[x - h], 0, 0)) / (2.0 * h);
        let mut g = [0.0];
        kf.grad(&[x], 0, 0, &mut g);
        prop_assert!((g[0] - fd).abs() <= 1e-5, "x {} eta {}: {} vs {}", x, eta, g[0], fd);
    }

    #[test]
    fn gradient_is_odd(x in -3.0f64..3.0, eta in 0.05f64..2.5) {
        let kf = family(eta, &unit_masses());
        let (mut a, mut b) = ([0.0], [0.0]);
        kf.grad(&[x], 0, 1, &mut a);
        kf.grad(&[-x], 0, 1, &mut b);
        prop_assert_eq!(a[0], -b[0]);
    }
}

#[test]
fn multidimensional_kernels_are_radial_and_normalized() {
    for d in [2, 3] {
        let kf = KernelFamily::new(MollifierProfile::bump(d).unwrap(), 0.5, &[vec![2.0]]).unwrap();
        let x = vec![0.1; d];
        let mut y = vec![0.0; d];
        y[0] = (0.01 * d as f64).sqrt();
        assert!((kf.eval(&x, 0, 0) - kf.eval(&y, 0, 0)).abs() < 1e-12);
    }
}

fn squared() -> NonlinearityKind {
    NonlinearityKind::Power { exponent: 2.0 }
}

#[test]
fn cutoff_radius_example() {
    let c = make_cutoff(squared(), 0.1, 0.5).unwrap();
    assert!((c.a_eta() - 0.5811).abs() < 1e-3, "{}", c.a_eta());
    assert_eq!(c.eval(0.3), 0.09);
    assert_eq!(c.eval(0.0), 0.0);
    assert_eq!(c.deriv(0.0), 0.0);
}

#[test]
fn identity_without_cutoff() {
    let c = make_cutoff(NonlinearityKind::Identity, 0.7, 0.0).unwrap();
    assert!(c.a_eta().is_infinite());
    assert_eq!(c.eval(7.0), 7.0);
}

#[test]
fn infeasible_cutoff_is_rejected() {
    assert!(make_cutoff(squared(), 1.0, 0.5).is_err());
}

#[test]
fn lipschitz_audit() {
    use rand::{Rng, SeedableRng};
    for (kind, eta, alpha) in [(squared(), 0.1, 0.5), (squared(), 0.02, 0.8), (NonlinearityKind::Power { exponent: 3.0 }, 0.05, 0.9)] {
        let c = make_cutoff(kind, eta, alpha).unwrap();
        let a = c.a_eta();
        let lip = c.lip_bound();
        assert!((lip - eta.powf(-alpha)).abs() <= 1e-12 * lip);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100_000 {
            let s = rng.random_range(-10.0 * a..10.0 * a);
            let t = rng.random_range(-10.0 * a..10.0 * a);
            assert!((c.eval(s) - c.eval(t)).abs() <= lip * (s - t).abs(), "s {s} t {t}");
        }
        for k in 0..10_000 {
            let s = -a + 2.0 * a * k as f64 / 9_999.0;
            assert_eq!(c.eval(s), c.kind().value(s));
        }
        for k in 0..=20_000 {
            let s = -50.0 * a + 100.0 * a * k as f64 / 20_000.0;
            assert!(c.eval(s) >= 0.0);
            assert!(c.deriv(s).abs() <= lip);
        }
        // saturation far outside the blend band
        assert_eq!(c.eval(a + 10.0), c.eval(a + 20.0));
        assert!(c.eval(a + 10.0) <= c.kind().value(a + 1.0));
    }
}

#[test]
fn cutoff_radius_grows_as_eta_shrinks() {
    let etas = [0.1, 0.05, 0.02, 0.01, 0.001];
    let radii: Vec<f64> = etas.iter().map(|&e| make_cutoff(squared(), e, 0.5).unwrap().a_eta()).collect();
    for w in radii.windows(2) {
        assert!(w[1] >= w[0], "{radii:?}");
    }
}

#[test]
fn cutoff_derivative_is_continuous() {
    let c = make_cutoff(squared(), 0.1, 0.5).unwrap();
    let a = c.a_eta();
    for edge in [a, a + 1.0, -a, -a - 1.0] {
        let h = 1e-9;
        assert!((c.deriv(edge + h) - c.deriv(edge - h)).abs() < 1e-6, "edge {edge}");
    }
}
