use caloric::geometry::{dilate, FracParams, Orientation, ParabolicCube, SpacetimePoint};
use caloric::kernels::KernelKind;
use caloric::measures::{
    cantor_generation, min_separation, segment_measure, unit_segment, Atoms, CantorSpec, DiscreteMeasure,
    SignedDiscreteMeasure,
};
use caloric::potentials::{
    apply_bump, bmo_parabolic_norm, l2_operator_norm, lip_norm_t, potential, sup_norm_on_grid,
    BumpFunction, GridSpec, PotentialVariant,
};
use proptest::prelude::*;

fn half() -> FracParams<f64> {
    FracParams::new(0.5, 1).unwrap()
}

fn signed(pts: &[(f64, f64, f64)]) -> SignedDiscreteMeasure<f64> {
    SignedDiscreteMeasure::new(
        pts.iter().map(|&(x, t, _)| SpacetimePoint::planar(x, t)).collect(),
        pts.iter().map(|&(_, _, w)| w).collect(),
    )
    .unwrap()
}

fn atoms() -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
    prop::collection::vec((0.0..1.0f64, 0.0..1.0f64, -1.0..1.0f64), 1..20)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn linearity(
        pts in atoms(),
        other in prop::collection::vec(-1.0..1.0f64, 20),
        a in -3.0..3.0f64,
        b in -3.0..3.0f64,
        x in -1.0..2.0f64,
        t in -1.0..2.0f64,
    ) {
        let p = half();
        let mu = signed(&pts);
        let nu = SignedDiscreteMeasure::new(mu_atoms(&pts), other[..pts.len()].to_vec()).unwrap();
        let comb = SignedDiscreteMeasure::new(
            mu_atoms(&pts),
            pts.iter().zip(&other).map(|(&(_, _, w), &v)| a * w + b * v).collect(),
        )
        .unwrap();
        let q = SpacetimePoint::planar(x, t);
        for v in [PotentialVariant::Plain, PotentialVariant::Dual, PotentialVariant::Truncated(0.1)] {
            let lhs = potential(&comb, &KernelKind::Half, &v, &q, &p).unwrap().value;
            let rhs = a * potential(&mu, &KernelKind::Half, &v, &q, &p).unwrap().value
                + b * potential(&nu, &KernelKind::Half, &v, &q, &p).unwrap().value;
            let scale = potential(&mu.scaled(a.abs()), &KernelKind::Half, &v, &q, &p).unwrap().value.abs()
                + potential(&nu.scaled(b.abs()), &KernelKind::Half, &v, &q, &p).unwrap().value.abs()
                + mu.total_variation() + nu.total_variation();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * scale.max(1.0), "{} vs {}", lhs, rhs);
        }
    }

    #[test]
    fn maximal_monotone_in_eps_grid(
        pts in atoms(),
        eps in prop::collection::vec(0.001..1.0f64, 1..10),
        extra in prop::collection::vec(0.001..1.0f64, 1..5),
        x in -1.0..2.0f64,
        t in -1.0..2.0f64,
    ) {
        let p = half();
        let mu = signed(&pts);
        let q = SpacetimePoint::planar(x, t);
        let small = potential(&mu, &KernelKind::Half, &PotentialVariant::Maximal(eps.clone()), &q, &p).unwrap().value;
        let mut big_eps = eps.clone();
        big_eps.extend(extra);
        let big = potential(&mu, &KernelKind::Half, &PotentialVariant::Maximal(big_eps), &q, &p).unwrap().value;
        prop_assert!(big >= small);
    }

    #[test]
    fn l2_norm_invariances(
        pts in prop::collection::vec((0.0..1.0f64, 0.0..1.0f64, 0.01..1.0f64), 2..25),
        lam in 0.1..10.0f64,
        perm_seed in any::<u64>(),
    ) {
        let p = half();
        let atoms: Vec<_> = mu_atoms(&pts);
        let w: Vec<f64> = pts.iter().map(|&(_, _, w)| w).collect();
        let mu = DiscreteMeasure::new(atoms.clone(), w.clone()).unwrap();
        prop_assume!(min_separation(&mu, &p).is_some());
        let eps = 0.05;
        let base = l2_operator_norm(&mu, &KernelKind::Half, eps, &p).unwrap();

        // Relabeling.
        let mut order: Vec<usize> = (0..atoms.len()).collect();
        let mut state = perm_seed | 1;
        for i in (1..order.len()).rev() {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            order.swap(i, (state % (i as u64 + 1)) as usize);
        }
        let permuted = DiscreteMeasure::new(
            order.iter().map(|&i| atoms[i].clone()).collect(),
            order.iter().map(|&i| w[i]).collect(),
        )
        .unwrap();
        let perm = l2_operator_norm(&permuted, &KernelKind::Half, eps, &p).unwrap();
        prop_assert!((perm - base).abs() <= 1e-8 * base.max(1e-300), "{} vs {}", perm, base);

        // Parabolic dilation with weights scaled by lam^N (N = 1).
        let dilated = DiscreteMeasure::new(
            atoms.iter().map(|a| dilate(a, lam, &p).unwrap()).collect(),
            w.iter().map(|&v| v * lam).collect(),
        )
        .unwrap();
        let dil = l2_operator_norm(&dilated, &KernelKind::Half, eps * lam, &p).unwrap();
        prop_assert!((dil - base).abs() <= 1e-8 * base.max(1e-300), "{} vs {}", dil, base);
    }
}

fn mu_atoms(pts: &[(f64, f64, f64)]) -> Vec<SpacetimePoint<f64>> {
    pts.iter().map(|&(x, t, _)| SpacetimePoint::planar(x, t)).collect()
}

#[test]
fn segment_potential_convergence_order() {
    // Midpoint atoms integrate the smooth Poisson kernel with O(1/m^2)
    // error at interior points, so doubling m divides the error by about 4.
    let p = half();
    let seg = unit_segment(Orientation::Horizontal, 1.0).unwrap();
    let q = SpacetimePoint::planar(0.3, 0.2);
    let exact = (0.7f64 / 0.2).atan() - (-0.3f64 / 0.2).atan();
    let err = |m: usize| {
        let mu = segment_measure(&seg, m).unwrap();
        (potential(&mu, &KernelKind::Half, &PotentialVariant::Plain, &q, &p).unwrap().value - exact).abs()
    };
    for m in [50, 100, 200, 400] {
        let r = err(m) / err(2 * m);
        assert!((r - 4.0).abs() <= 0.8, "m={m}: ratio {r}");
    }
}

#[test]
fn potential_examples() {
    let p = half();
    let mu = DiscreteMeasure::new(vec![SpacetimePoint::planar(0.0, 0.0)], vec![1.0]).unwrap();
    let q = SpacetimePoint::planar(0.0, 1.0);
    let k = KernelKind::Half;
    assert_eq!(potential(&mu, &k, &PotentialVariant::Plain, &q, &p).unwrap().value, 1.0);
    assert_eq!(potential(&mu, &k, &PotentialVariant::Dual, &q, &p).unwrap().value, 0.0);
    assert_eq!(potential(&mu, &k, &PotentialVariant::Truncated(2.0), &q, &p).unwrap().value, 0.0);
    let seg = segment_measure(&unit_segment(Orientation::Horizontal, 1.0).unwrap(), 2000).unwrap();
    let v = potential(&seg, &k, &PotentialVariant::Plain, &SpacetimePoint::planar(0.5, 0.5), &p)
        .unwrap()
        .value;
    assert!((v - std::f64::consts::FRAC_PI_2).abs() < 1e-3);
}

#[test]
fn sup_norm_examples() {
    let p = half();
    let zero = DiscreteMeasure::new(vec![SpacetimePoint::planar(0.5, 0.5)], vec![0.0]).unwrap();
    let grid = GridSpec::planar((0.0, 1.0), (0.0, 1.0), 11, 11, 0.05).unwrap();
    assert_eq!(sup_norm_on_grid(&zero, &KernelKind::Half, &PotentialVariant::Plain, &grid, &p).unwrap().value, 0.0);
    let one = DiscreteMeasure::new(vec![SpacetimePoint::planar(0.0, 0.0)], vec![1.0]).unwrap();
    let grid = GridSpec::planar((-1.0, 1.0), (-1.0, 1.0), 9, 9, 0.0).unwrap();
    let sup = sup_norm_on_grid(&one, &KernelKind::Half, &PotentialVariant::Plain, &grid, &p).unwrap();
    assert_eq!(sup.value, 4.0);
    // Refinement with the same exclusion never lowers the sup.
    let coarse = GridSpec::planar((-1.0, 2.0), (0.01, 2.0), 31, 21, 0.0).unwrap();
    let fine = GridSpec::planar((-1.0, 2.0), (0.01, 2.0), 61, 41, 0.0).unwrap();
    let seg = segment_measure(&unit_segment(Orientation::Horizontal, 1.0).unwrap(), 400).unwrap();
    let a = sup_norm_on_grid(&seg, &KernelKind::Half, &PotentialVariant::Plain, &coarse, &p).unwrap().value;
    let b = sup_norm_on_grid(&seg, &KernelKind::Half, &PotentialVariant::Plain, &fine, &p).unwrap().value;
    assert!(b >= a);
}

#[test]
fn l2_examples() {
    let p = half();
    let one = DiscreteMeasure::new(vec![SpacetimePoint::planar(0.0, 0.0)], vec![1.0]).unwrap();
    assert_eq!(l2_operator_norm(&one, &KernelKind::Half, 0.5, &p).unwrap(), 0.0);
    let two = DiscreteMeasure::new(
        vec![SpacetimePoint::planar(0.0, 0.0), SpacetimePoint::planar(0.0, 1.0)],
        vec![1.0, 1.0],
    )
    .unwrap();
    assert!((l2_operator_norm(&two, &KernelKind::Half, 0.5, &p).unwrap() - 1.0).abs() < 1e-8);
    // Against a dense SVD.
    let (_, mu) = cantor_generation::<f64>(&CantorSpec::new(1, 2).unwrap()).unwrap();
    let eps = 0.5 * min_separation(&mu, &p).unwrap();
    let v = l2_operator_norm(&mu, &KernelKind::Half, eps, &p).unwrap();
    let n = mu.len();
    let a = mu.atoms();
    let w = mu.weights();
    let b = nalgebra::DMatrix::from_fn(n, n, |i, j| {
        let d = caloric::geometry::dist_p(&a[i], &a[j], &p).unwrap();
        if d > eps {
            let dx = a[i].x[0] - a[j].x[0];
            w[i].sqrt() * KernelKind::Half.value(dx * dx, a[i].t - a[j].t, &p) * w[j].sqrt()
        } else {
            0.0
        }
    });
    let oracle = b.singular_values().max();
    assert!(v > 0.0 && (v - oracle).abs() <= 1e-6 * oracle, "{v} vs {oracle}");
}

#[test]
fn bump_examples() {
    let p = half();
    let cube = ParabolicCube::new(vec![0.0], 1.0, 0.0, &p).unwrap();
    let bump = BumpFunction::new(cube, 1).unwrap();
    let nu = SignedDiscreteMeasure::new(
        vec![SpacetimePoint::planar(0.5, 0.5), SpacetimePoint::planar(2.0, 0.5), SpacetimePoint::planar(0.125, 0.5)],
        vec![1.0, 1.0, 1.0],
    )
    .unwrap();
    let out = apply_bump(&nu, &bump).unwrap();
    assert_eq!(out.len(), 2);
    assert_eq!(out.weights()[0], 1.0);
    // u = 0.75 gives v = 0.5, where the symmetric smoothstep equals 1/2.
    assert!((out.weights()[1] - 0.5).abs() < 1e-15);
    assert!((bump.gradient_bound() - 6.0).abs() < 1e-3);
}

#[test]
fn bmo_and_lip_examples() {
    let p = half();
    let cubes: Vec<_> = (0..5)
        .map(|i| ParabolicCube::new(vec![i as f64], 1.0, 0.0, &p).unwrap())
        .collect();
    let c = bmo_parabolic_norm(|_| Ok(3.0), &cubes, 64).unwrap();
    assert_eq!(c.value, 0.0);
    let t = bmo_parabolic_norm(|q: &SpacetimePoint<f64>| Ok(q.t), &cubes, 400).unwrap();
    assert!((t.value - 0.25).abs() < 1e-3, "{}", t.value);
    let pairs: Vec<_> = (1..40)
        .map(|k| {
            let u = 10f64.powi(-k / 4);
            (SpacetimePoint::planar(0.0, u), SpacetimePoint::planar(0.0, 0.0))
        })
        .collect();
    let l = lip_norm_t(|q: &SpacetimePoint<f64>| Ok(q.t.abs().sqrt()), 0.5, &pairs).unwrap();
    assert!(l <= 1.0 + 1e-12 && l > 0.99);
    let pairs2: Vec<_> = (1..10)
        .map(|k| (SpacetimePoint::planar(0.0, k as f64), SpacetimePoint::planar(0.0, 0.5 * k as f64)))
        .collect();
    let l = lip_norm_t(|_| Ok(1.0), 0.5, &pairs2).unwrap();
    assert!(l < 0.5 || l == 0.0);
}
