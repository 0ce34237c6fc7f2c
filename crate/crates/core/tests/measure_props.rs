use caloric::geometry::{dist_p, FracParams, Orientation, SpacetimePoint};
use caloric::measures::{
    cantor_generation, growth_constant, min_separation, segment_measure, unit_segment, Atoms,
    CantorSpec, DiscreteMeasure,
};
use proptest::prelude::*;

fn half() -> FracParams<f64> {
    FracParams::new(0.5, 1).unwrap()
}

/// Gap between two closed axis-aligned squares in the max metric.
fn square_gap(a: &caloric::geometry::ParabolicCube<f64>, b: &caloric::geometry::ParabolicCube<f64>) -> f64 {
    let (alo, ahi) = a.bounds();
    let (blo, bhi) = b.bounds();
    (0..2)
        .map(|i| (blo[i] - ahi[i]).max(alo[i] - bhi[i]).max(0.0))
        .fold(0.0, f64::max)
}

#[test]
fn cantor_separation() {
    for k in 1..=4 {
        let (cubes, _) = cantor_generation::<f64>(&CantorSpec::new(1, k).unwrap()).unwrap();
        let side = cubes[0].spatial_side;
        let mut gap = f64::INFINITY;
        for i in 0..cubes.len() {
            for j in i + 1..cubes.len() {
                gap = gap.min(square_gap(&cubes[i], &cubes[j]));
            }
        }
        assert!(gap >= 0.5 * side, "k={k}: gap {gap} side {side}");
    }
}

#[test]
fn cantor_mass_conservation() {
    for k in 0..5 {
        let (parents, pmu) = cantor_generation::<f64>(&CantorSpec::new(1, k).unwrap()).unwrap();
        let (_, cmu) = cantor_generation::<f64>(&CantorSpec::new(1, k + 1).unwrap()).unwrap();
        for (q, &w) in parents.iter().zip(pmu.weights()) {
            let children: Vec<f64> = cmu
                .atoms()
                .iter()
                .zip(cmu.weights())
                .filter(|(a, _)| q.contains(a))
                .map(|(_, &w)| w)
                .collect();
            assert_eq!(children.len(), 4);
            assert!(children.iter().all(|&c| c == w / 4.0));
        }
    }
}

#[test]
fn cantor_examples() {
    let (c1, m1) = cantor_generation::<f64>(&CantorSpec::new(1, 1).unwrap()).unwrap();
    assert_eq!(c1.len(), 4);
    assert!(c1.iter().all(|c| c.spatial_side == 0.25));
    assert!(m1.weights().iter().all(|&w| w == 0.25));
    let mut corners: Vec<(f64, f64)> = c1.iter().map(|c| (c.spatial_corner[0], c.time_start)).collect();
    corners.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert_eq!(corners, vec![(0.0, 0.0), (0.0, 0.75), (0.75, 0.0), (0.75, 0.75)]);
}

#[test]
fn growth_examples() {
    let p = half();
    let single = DiscreteMeasure::new(vec![SpacetimePoint::planar(0.0, 0.0)], vec![1.0]).unwrap();
    let g = growth_constant(&single, 1.0, &p, None).unwrap();
    assert_eq!(g.constant, 1.0);
    assert!(g.floor_by_convention);
    let seg = segment_measure(&unit_segment(Orientation::Horizontal, 1.0).unwrap(), 64).unwrap();
    let g = growth_constant(&seg, 1.0, &p, None).unwrap().constant;
    assert!((1.0..=3.0).contains(&g), "{g}");
    let (_, cantor) = cantor_generation::<f64>(&CantorSpec::new(1, 3).unwrap()).unwrap();
    let g = growth_constant(&cantor, 1.0, &p, None).unwrap().constant;
    assert!((1.0..=4.0).contains(&g), "{g}");
}

/// Brute force over every atom and every pairwise distance, without the
/// jump-radius bookkeeping of the library.
fn growth_brute(mu: &DiscreteMeasure<f64>, d: f64, p: &FracParams<f64>) -> f64 {
    let atoms = mu.atoms();
    let floor = min_separation(mu, p).unwrap();
    let mut radii: Vec<f64> = Vec::new();
    for a in atoms {
        for b in atoms {
            let r = dist_p(a, b, p).unwrap();
            if r >= floor {
                radii.push(r);
            }
        }
    }
    let mut best: f64 = 0.0;
    for a in atoms {
        for &r in &radii {
            let m: f64 = atoms
                .iter()
                .zip(mu.weights())
                .filter(|(b, _)| dist_p(a, b, p).unwrap() <= r)
                .map(|(_, &w)| w)
                .sum();
            best = best.max(m / r.powf(d));
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn growth_homogeneous(
        pts in prop::collection::vec((0.0..1.0f64, 0.0..1.0f64, 0.01..1.0f64), 2..12),
        lam in 0.01..100.0f64,
    ) {
        let p = half();
        let atoms: Vec<_> = pts.iter().map(|&(x, t, _)| SpacetimePoint::planar(x, t)).collect();
        let w: Vec<f64> = pts.iter().map(|&(_, _, w)| w).collect();
        let mu = DiscreteMeasure::new(atoms, w).unwrap();
        prop_assume!(min_separation(&mu, &p).is_some());
        let g = growth_constant(&mu, 1.0, &p, None).unwrap().constant;
        let gl = growth_constant(&mu.scaled(lam).unwrap(), 1.0, &p, None).unwrap().constant;
        prop_assert!((gl - lam * g).abs() <= 1e-12 * lam * g);
    }

    #[test]
    fn growth_matches_brute_force(
        pts in prop::collection::vec((0.0..1.0f64, 0.0..1.0f64, 0.01..1.0f64), 2..10),
        s in 0.2..0.9f64,
    ) {
        let p = FracParams::new(s, 1).unwrap();
        let atoms: Vec<_> = pts.iter().map(|&(x, t, _)| SpacetimePoint::planar(x, t)).collect();
        let w: Vec<f64> = pts.iter().map(|&(_, _, w)| w).collect();
        let mu = DiscreteMeasure::new(atoms, w).unwrap();
        prop_assume!(min_separation(&mu, &p).is_some());
        let d = p.critical_dimension();
        let g = growth_constant(&mu, d, &p, None).unwrap().constant;
        let b = growth_brute(&mu, d, &p);
        prop_assert!((g - b).abs() <= 1e-12 * b, "{} vs {}", g, b);
    }

    #[test]
    fn segment_mass_is_length(len in 0.01..10.0f64, m in 1usize..500, vertical in any::<bool>()) {
        let o = if vertical { Orientation::Vertical } else { Orientation::Horizontal };
        let mu = segment_measure(&unit_segment(o, len).unwrap(), m).unwrap();
        prop_assert!((mu.total_mass() - len).abs() <= 1e-12 * len);
        prop_assert_eq!(mu.len(), m);
    }
}
