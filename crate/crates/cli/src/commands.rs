//! One function per subcommand. Each returns its results object and the
//! extra files to write; nothing touches the output directory here.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use caloric::capacity::{
    cantor_corner_sum, capacity_lower, default_exclusion, default_grid, refined_grid,
    CapacityEstimate, CapacityMode, CapacityOptions, ConstraintSpec,
};
use caloric::fractional::{frac_time_derivative, FracTimeSettings, TailModel};
use caloric::geometry::{
    dist_p, parabolic_norm, FracParams, Orientation, ParabolicCube, Segment, SetDescriptor,
    SpacetimePoint,
};
use caloric::kernels::{
    build_profile, eval_kernel, eval_kernel_derivative, profile_dt_fd, profile_frac_laplacian,
    spatial_mass, Derivative, KernelKind, Normalization, ProfileSettings,
};
use caloric::measures::{
    cantor_generation, frostman_rescale, growth_constant, segment_measure, Atoms, CantorSpec,
    DiscreteMeasure,
};
use caloric::potentials::{
    bmo_parabolic_norm, evaluate_on_grid, grid_csv, lip_norm_t, localization_experiment, potential,
    random_cube_family, sup_norm_on_grid, GridSpec, LocalizationConfig, PotentialVariant,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

use crate::config::RunConfig;
use crate::RunError;

type P = FracParams<f64>;

pub struct Outcome {
    pub results: Map<String, Value>,
    /// `(file name, contents)` in write order.
    pub files: Vec<(String, String)>,
}

impl Outcome {
    fn new() -> Self {
        Self {
            results: Map::new(),
            files: Vec::new(),
        }
    }

    fn put(&mut self, key: &str, value: impl serde::Serialize) {
        let v = serde_json::to_value(value).expect("serializable result");
        self.results.insert(key.to_string(), v);
    }

    fn file(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents));
    }
}

pub fn run(cfg: &mut RunConfig) -> Result<Outcome, RunError> {
    match cfg.subcommand.name {
        "kernel-table" => kernel_table(cfg),
        "segment" => segment(cfg),
        "cantor" => cantor(cfg),
        "capacity" => capacity(cfg),
        "growth" => growth(cfg),
        "localize" => localize(cfg),
        "bmo-check" => bmo_check(cfg),
        other => unreachable!("subcommand `{other}` has no handler"),
    }
}

fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// CSV with a header row, comma separator and no quoting.
fn csv(header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

fn measure_csv(atoms: &[SpacetimePoint<f64>], weights: &[f64]) -> String {
    let n = atoms.first().map_or(1, |a| a.x.len());
    let mut header: Vec<String> = (1..=n).map(|i| format!("x_{i}")).collect();
    header.push("t".into());
    header.push("weight".into());
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    csv(
        &header,
        atoms.iter().zip(weights).map(|(a, &w)| {
            let mut row = a.x.clone();
            row.push(a.t);
            row.push(w);
            row
        }),
    )
}

/// Range statistics of a list of values.
fn spread(values: &[f64]) -> Value {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    json!({ "min": lo, "max": hi, "max_over_min": hi / lo })
}

/// The estimate without its wall-clock field, plus the LP diagnostics.
fn estimate_json(e: &CapacityEstimate<f64>) -> Value {
    let mut v = serde_json::to_value(e).expect("serializable estimate");
    let obj = v.as_object_mut().expect("estimate is an object");
    obj.remove("runtime_ms");
    let d = &e.details;
    obj.insert("lp_value".into(), json!(d.lp_value));
    obj.insert("active_rows".into(), json!(d.active_rows));
    obj.insert("rowgen_rounds".into(), json!(d.rowgen_rounds));
    obj.insert("rowgen_complete".into(), json!(d.rowgen_complete));
    obj.insert("constraint_max".into(), json!(d.constraint_max));
    obj.insert("verification".into(), serde_json::to_value(&d.verification).expect("serializable"));
    obj.insert("content".into(), serde_json::to_value(&d.content).expect("serializable"));
    v
}

fn params(s: f64, n: usize) -> Result<P, RunError> {
    Ok(FracParams::new(s, n)?)
}

fn kernel_table(cfg: &mut RunConfig) -> Result<Outcome, RunError> {
    let s = cfg.f64("s");
    let p = params(s, cfg.usize("N"))?;
    let u_max = cfg.auto_f64("u_max").unwrap_or(ProfileSettings::default_u_max(s));
    cfg.settle("u_max", u_max);
    let settings = ProfileSettings {
        u_min: cfg.f64("u_min"),
        u_max: Some(u_max),
        nodes_per_decade: cfg.usize("nodes_per_decade"),
        ..ProfileSettings::default()
    };
    let mut profile = build_profile(&p, &settings)?;
    let meta = profile.quadrature_meta().cloned();
    let normalization = Normalization::parse(cfg.str("normalization")).expect("schema choice");
    if normalization != profile.normalization() {
        profile = profile.renormalized(normalization)?;
    }
    let mut out = Outcome::new();
    out.file("profile.txt", profile.to_table_string());
    let kind = KernelKind::Profile(Arc::new(profile.clone()));
    out.put(
        "profile",
        json!({
            "normalization": normalization.as_str(),
            "nodes": profile.grid().len(),
            "u_max": profile.u_max(),
            "phi_0": profile.phi(0.0)?,
            "mass": profile.mass(),
            "max_panels": meta.as_ref().map(|m| m.max_panels),
            "max_rel_error": meta.as_ref().map(|m| m.max_rel_error),
        }),
    );
    let masses: Vec<f64> = [0.5, 1.0, 2.0]
        .iter()
        .map(|&t| spatial_mass(&kind, t, &p))
        .collect::<caloric::Result<_>>()?;
    out.put("spatial_mass", json!({ "t": [0.5, 1.0, 2.0], "mass": masses }));

    // Envelope, decay ratios and closed-form cross-checks on one log grid.
    let axis = logspace(cfg.f64("grid_lo"), cfg.f64("grid_hi"), cfg.usize("grid_points"));
    let alpha = cfg.f64("alpha");
    let n = p.n() as f64;
    let mut bg = Vec::new();
    let mut half = Vec::new();
    let mut gauss: f64 = 0.0;
    let mut decay = [0.0f64; 4];
    let mut outside = 0usize;
    let mut rows = Vec::new();
    for &t in &axis {
        for &x in &axis {
            let pt = SpacetimePoint::planar(x, t);
            let v = match eval_kernel(&kind, &pt, &p) {
                Ok(v) => v,
                Err(caloric::Error::OutsideProfileRange { .. }) => {
                    outside += 1;
                    continue;
                }
                Err(e) => return Err(e.into()),
            };
            let env = eval_kernel(&KernelKind::BgEnvelope, &pt, &p)?;
            bg.push(v / env);
            rows.push(vec![x, t, v, env, v / env]);
            if p.is_half() {
                half.push(v / eval_kernel(&KernelKind::Half, &pt, &p)?);
            }
            if s == 1.0 && x * x / t < 40.0 {
                let g = eval_kernel(&KernelKind::Gaussian, &pt, &p)?;
                gauss = gauss.max((v / g - 1.0).abs());
            }
            let r = parabolic_norm(&pt, &p);
            let derivs = [
                eval_kernel_derivative(&kind, Derivative::Dt, &pt, &p),
                eval_kernel_derivative(&kind, Derivative::GradX, &pt, &p),
                eval_kernel_derivative(&kind, Derivative::FracLaplacian(alpha), &pt, &p),
            ];
            let scaled = [
                Ok(v * r.powf(n)),
                derivs[0].as_ref().map(|d| d.magnitude() * r.powf(n + 2.0 * s)),
                derivs[1].as_ref().map(|d| d.magnitude() * r.powf(n + 1.0)),
                derivs[2].as_ref().map(|d| d.magnitude() * r.powf(n + 2.0 * alpha)),
            ];
            for (m, val) in decay.iter_mut().zip(scaled) {
                match val {
                    Ok(val) => *m = m.max(val),
                    Err(caloric::Error::OutsideProfileRange { .. }) => outside += 1,
                    Err(e) => return Err(e.clone().into()),
                }
            }
        }
    }
    if bg.is_empty() {
        return Err(RunError::invalid("the ratio grid lies entirely outside the profile range"));
    }
    out.put("envelope_ratio", spread(&bg));
    out.put(
        "decay_ratio_maxima",
        json!({
            "kernel": decay[0],
            "dt": decay[1],
            "grad_x": decay[2],
            "frac_laplacian": decay[3],
            "alpha": alpha,
        }),
    );
    if !half.is_empty() {
        let worst = half.iter().map(|r| (r * PI - 1.0).abs()).fold(0.0, f64::max);
        let mut h = spread(&half);
        h["max_rel_dev_from_inv_pi"] = json!(worst);
        out.put("ratio_to_half", h);
    }
    if s == 1.0 {
        out.put("gaussian_max_rel_dev", gauss);
    }
    if s < 1.0 {
        let count = cfg.usize("pde_points");
        let mut worst: f64 = 0.0;
        for i in 0..count {
            let d = (count.max(2) - 1) as f64;
            let x = 0.05 + 2.95 * i as f64 / d;
            let t = 0.2 + 1.8 * ((i * 7) % count) as f64 / d;
            let dt = profile_dt_fd(&kind, x * x, t, &p, 1e-4 * t);
            let lap = profile_frac_laplacian(&p, s, x, t)?;
            worst = worst.max((dt + lap).abs() / lap.abs());
        }
        out.put("pde_identity_max_rel", worst);
    }
    out.put("points_outside_profile_range", outside);
    out.file("ratios.csv", csv(&["x", "t", "kernel", "envelope", "ratio"], rows));
    Ok(out)
}

struct SegmentRun {
    estimate: CapacityEstimate<f64>,
    grid: GridSpec<f64>,
}

fn segment_capacity(
    set: &SetDescriptor<f64>,
    mode: CapacityMode,
    atoms: usize,
    resolution: usize,
    box_: [f64; 4],
    exclusion: f64,
    shell: f64,
    verify: Option<usize>,
) -> Result<SegmentRun, RunError> {
    let p = params(0.5, 1)?;
    let [x_lo, x_hi, t_lo, t_hi] = box_;
    let grid = GridSpec::planar((x_lo, x_hi), (t_lo, t_hi), resolution, resolution, exclusion)?;
    let verify_grid = match verify {
        Some(0) => None,
        None => Some(refined_grid(&grid)),
        Some(v) => Some(GridSpec::planar((x_lo, x_hi), (t_lo, t_hi), v, v, 0.5 * exclusion)?),
    };
    let opts = CapacityOptions {
        verify_grid,
        shell_radius: Some(shell),
        ..CapacityOptions::default()
    };
    let estimate = capacity_lower(set, mode, &p, atoms, &ConstraintSpec::Grid(grid.clone()), &opts)?;
    Ok(SegmentRun { estimate, grid })
}

fn segment(cfg: &mut RunConfig) -> Result<Outcome, RunError> {
    let p = params(0.5, 1)?;
    let orientation = match cfg.str("orientation") {
        "vertical" => Orientation::Vertical,
        _ => Orientation::Horizontal,
    };
    let len = cfg.f64("L");
    let m = cfg.usize("atoms");
    if m == 0 {
        return Err(RunError::invalid("`atoms` must be positive"));
    }
    let mode = CapacityMode::parse(cfg.str("mode")).expect("schema choice");
    let res = cfg.usize("resolution");
    let seg = Segment::new(orientation, len, SpacetimePoint::planar(0.0, 0.0))?;
    let set = SetDescriptor::Segment(seg.clone());
    let vertical = orientation == Orientation::Vertical;
    let auto_box = if vertical {
        [-len, len, -0.5 * len, 2.0 * len]
    } else {
        [-len, 2.0 * len, 0.005 * len, 2.0 * len]
    };
    let mut box_ = [0.0; 4];
    for (i, key) in ["x_lo", "x_hi", "t_lo", "t_hi"].iter().enumerate() {
        box_[i] = cfg.auto_f64(key).unwrap_or(auto_box[i]);
        cfg.settle(key, box_[i]);
    }
    let spacing_radius = default_exclusion(&set, m, &p)?;
    let exclusion_auto = cfg.is_auto("exclusion");
    let exclusion = cfg
        .auto_f64("exclusion")
        .unwrap_or(if vertical { spacing_radius } else { 0.0 });
    cfg.settle("exclusion", exclusion);
    let shell_auto = cfg.is_auto("shell");
    let shell = cfg.auto_f64("shell").unwrap_or(spacing_radius);
    cfg.settle("shell", shell);
    let verify = cfg.auto_usize("verify_resolution");
    cfg.settle("verify_resolution", 2 * res - 1);

    let run = segment_capacity(&set, mode, m, res, box_, exclusion, shell, verify)?;
    let mut out = Outcome::new();
    out.put("capacity", estimate_json(&run.estimate));

    // The uniform measure: closed form on the horizontal segment, grid sup always.
    let uniform = segment_measure(&seg, m)?;
    let mut check = Map::new();
    if !vertical {
        let count = cfg.usize("check_points");
        let mut worst: f64 = 0.0;
        for i in 0..count {
            let d = (count.max(2) - 1) as f64;
            let a = len * (0.02 + 0.96 * ((i * 37) % count.max(1)) as f64 / d);
            let t = len * (0.05 + 0.95 * i as f64 / d);
            let v = potential(&uniform, &KernelKind::Half, &PotentialVariant::Plain, &SpacetimePoint::planar(a, t), &p)?
                .value;
            let exact = ((len - a) / t).atan() - (-a / t).atan();
            worst = worst.max((v - exact).abs());
        }
        check.insert("closed_form_max_abs_err".into(), json!(worst));
    }
    let sup = sup_norm_on_grid(&uniform, &KernelKind::Half, &PotentialVariant::Plain, &run.grid, &p)?;
    check.insert("grid_sup".into(), json!(sup.value));
    out.put("uniform_measure", check);

    let d = &run.estimate.details;
    let scaled: Vec<f64> = d.weights.iter().map(|w| w * run.estimate.rescale_factor).collect();
    out.file("weights.csv", measure_csv(&d.atom_points, &scaled));
    let mu = DiscreteMeasure::new(d.atom_points.clone(), scaled)?;
    let vals = evaluate_on_grid(&mu, &KernelKind::Half, &PotentialVariant::Plain, &run.grid, &p)?;
    out.file("potential.csv", grid_csv(&vals, &run.grid));

    let doublings = cfg.usize("doublings");
    if doublings > 0 {
        let mut lowers = vec![run.estimate.lower];
        for j in 1..=doublings {
            let mj = m << j;
            let rj = (res - 1) * (1 << j) + 1;
            let ex = if exclusion_auto && vertical { 2.0 * len / mj as f64 } else { exclusion };
            let sh = if shell_auto { 2.0 * len / mj as f64 } else { shell };
            let vj = verify.map(|v| if v == 0 { 0 } else { (v - 1) * (1 << j) + 1 });
            let e = segment_capacity(&set, mode, mj, rj, box_, ex, sh, vj)?.estimate;
            lowers.push(e.lower);
        }
        let decreasing = lowers.windows(2).all(|w| w[1] < w[0]);
        out.put(
            "doubling_sweep",
            json!({
                "lower": lowers,
                "strictly_decreasing": decreasing,
                "last_over_first": lowers[lowers.len() - 1] / lowers[0],
            }),
        );
    }
    Ok(out)
}

fn cantor(cfg: &mut RunConfig) -> Result<Outcome, RunError> {
    let p = params(0.5, 1)?;
    let k_max = cfg.usize("k_max");
    let mode = CapacityMode::parse(cfg.str("mode")).expect("schema choice");
    let d = cfg.f64("growth_d");
    let mut gens = Vec::new();
    let mut lowers = Vec::new();
    let mut last = None;
    for k in 0..=k_max {
        let spec = CantorSpec::new(1, k)?;
        let (cubes, mu) = cantor_generation::<f64>(&spec)?;
        let side = spec.side::<f64>();
        let weight = spec.cube_mass::<f64>();
        let exact = cubes.iter().all(|c| c.spatial_side == side && c.time_length == side)
            && mu.weights().iter().all(|&w| w == weight);
        let g = growth_constant(&mu, d, &p, None)?;
        let mut entry = json!({
            "k": k,
            "count": cubes.len(),
            "side": side,
            "weight": weight,
            "structure_exact": exact,
            "growth_constant": g.constant,
        });
        if cfg.bool("capacity") && k >= 1 {
            let set = SetDescriptor::cubes(cubes)?;
            let rho = default_exclusion(&set, 0, &p)?;
            let res = (2.0 / side).round() as usize + 1;
            let grid = GridSpec::planar((-0.5, 1.5), (-0.5, 1.5), res, res, rho)?;
            let opts = CapacityOptions {
                verify_grid: cfg.bool("verify").then(|| refined_grid(&grid)),
                ..CapacityOptions::default()
            };
            let e = capacity_lower(&set, mode, &p, 0, &ConstraintSpec::Grid(grid), &opts)?;
            lowers.push(e.lower);
            entry["capacity"] = estimate_json(&e);
        }
        gens.push(entry);
        last = Some(mu);
    }
    let mut out = Outcome::new();
    out.put("generations", gens);
    if !lowers.is_empty() {
        out.put(
            "capacity_decay",
            json!({
                "lower": lowers,
                "nonincreasing": lowers.windows(2).all(|w| w[1] <= w[0]),
                "last_over_first": lowers[lowers.len() - 1] / lowers[0],
            }),
        );
    }
    let ms = cfg.usize_list("corner_m");
    let spec0 = CantorSpec::new(1, 0)?;
    let sums: Vec<f64> = ms
        .iter()
        .map(|&m| cantor_corner_sum(&spec0, m))
        .collect::<caloric::Result<_>>()?;
    out.put(
        "corner_sums",
        json!({ "m": ms, "value": sums, "last_over_first": sums[sums.len() - 1] / sums[0] }),
    );
    let mu = last.expect("k_max >= 0");
    out.file("cantor_atoms.csv", measure_csv(mu.atoms(), mu.weights()));
    Ok(out)
}

fn load_set(path: &str, p: &P) -> Result<SetDescriptor<f64>, RunError> {
    if path.is_empty() {
        return Err(RunError::invalid("`set` is required: path to a JSON set descriptor"));
    }
    let text = std::fs::read_to_string(path)
        .map_err(|e| RunError::invalid(format!("cannot read {path}: {e}")))?;
    let raw: SetDescriptor<f64> = serde_json::from_str(&text)
        .map_err(|e| RunError::invalid(format!("{path}: {e}")))?;
    // Rebuild through the checked constructors.
    let set = match raw {
        SetDescriptor::Segment(s) => SetDescriptor::Segment(Segment::new(s.orientation, s.length, s.anchor)?),
        SetDescriptor::UnionOfCubes { cubes } => SetDescriptor::cubes(
            cubes
                .into_iter()
                .map(|c| ParabolicCube::from_parts(c.spatial_corner, c.spatial_side, c.time_start, c.time_length, p))
                .collect::<caloric::Result<_>>()?,
        )?,
        SetDescriptor::PointSet { points } => SetDescriptor::points(points)?,
    };
    if let Some(dim) = set.dim() {
        if dim != p.n() {
            return Err(RunError::invalid(format!("{path}: set has N = {dim}, run has N = {}", p.n())));
        }
    }
    Ok(set)
}

fn capacity(cfg: &mut RunConfig) -> Result<Outcome, RunError> {
    let p = params(cfg.f64("s"), cfg.usize("N"))?;
    let set = load_set(cfg.str("set"), &p)?;
    let mode = CapacityMode::parse(cfg.str("mode")).expect("schema choice");
    let atoms = cfg.usize("atoms");
    let mut opts = CapacityOptions {
        content_depth: cfg.usize("content_depth"),
        ..CapacityOptions::default()
    };
    let spec = if mode == CapacityMode::GrowthS {
        ConstraintSpec::Balls {
            radii: cfg.auto_usize("radii"),
        }
    } else {
        let rho = default_exclusion(&set, atoms, &p)?;
        let exclusion = cfg.auto_f64("exclusion").unwrap_or(rho);
        cfg.settle("exclusion", exclusion);
        let shell = cfg.auto_f64("shell").unwrap_or(rho);
        cfg.settle("shell", shell);
        opts.shell_radius = Some(shell);
        let res = cfg.usize("resolution");
        let grid = default_grid(&set, res, exclusion)?;
        opts.verify_grid = match cfg.auto_usize("verify_resolution") {
            Some(0) => None,
            None => Some(refined_grid(&grid)),
            Some(v) => Some(GridSpec {
                resolution: vec![v; grid.resolution.len()],
                exclusion: 0.5 * exclusion,
                ..grid.clone()
            }),
        };
        cfg.settle("verify_resolution", 2 * res - 1);
        ConstraintSpec::Grid(grid)
    };
    let e = capacity_lower(&set, mode, &p, atoms, &spec, &opts)?;
    let mut out = Outcome::new();
    out.put("capacity", estimate_json(&e));
    let scaled: Vec<f64> = e.details.weights.iter().map(|w| w * e.rescale_factor).collect();
    out.file("weights.csv", measure_csv(&e.details.atom_points, &scaled));
    Ok(out)
}

fn growth(cfg: &mut RunConfig) -> Result<Outcome, RunError> {
    let p = params(cfg.f64("s"), cfg.usize("N"))?;
    let d = cfg.auto_f64("d").unwrap_or(p.critical_dimension());
    cfg.settle("d", d);
    let path = cfg.str("measure").to_string();
    let (source, mu) = if path.is_empty() {
        let k = cfg.usize("cantor_k");
        let (_, mu) = cantor_generation::<f64>(&CantorSpec::new(p.n(), k)?)?;
        (format!("cantor k={k}"), mu)
    } else {
        let mu = DiscreteMeasure::<f64>::load(&path)?;
        if let Some(a) = mu.atoms().first() {
            if a.x.len() != p.n() {
                return Err(RunError::invalid(format!(
                    "{path}: atoms have N = {}, run has N = {}",
                    a.x.len(),
                    p.n()
                )));
            }
        }
        (path.clone(), mu)
    };
    let g = growth_constant(&mu, d, &p, cfg.auto_usize("radii"))?;
    let mut out = Outcome::new();
    out.put("source", source);
    out.put("atoms", mu.len());
    out.put("total_mass", mu.total_mass());
    out.put("growth", g);
    Ok(out)
}

fn localize(cfg: &mut RunConfig) -> Result<Outcome, RunError> {
    let config = LocalizationConfig {
        trials: cfg.usize("trials"),
        atoms: cfg.usize("atoms"),
        resolutions: cfg.usize_list("resolutions"),
        exclusion: cfg.f64("exclusion"),
        margin: cfg.f64("margin"),
        bump_order: cfg.usize("bump_order"),
        seed: cfg.u64("seed"),
    };
    let rep = localization_experiment(&config)?;
    let mut all: Vec<f64> = rep.ratios.iter().flatten().copied().collect();
    all.sort_by(|a, b| a.total_cmp(b));
    let q = |f: f64| all[((all.len() - 1) as f64 * f).round() as usize];
    let mut out = Outcome::new();
    out.put("c_loc", rep.c_loc);
    out.put(
        "distribution",
        json!({ "min": q(0.0), "q25": q(0.25), "median": q(0.5), "q75": q(0.75), "max": q(1.0) }),
    );
    out.put("bump_constants", &rep.bump_constants);
    out.put("ratios", &rep.ratios);
    let rows = rep.ratios.iter().enumerate().flat_map(|(i, row)| {
        row.iter()
            .zip(&config.resolutions)
            .map(move |(&r, &res)| vec![i as f64, res as f64, r])
            .collect::<Vec<_>>()
    });
    out.file("localization.csv", csv(&["trial", "resolution", "ratio"], rows));
    Ok(out)
}

/// Parabolic distance from `a` to the closed cube `q`.
fn dist_to_cube(a: &SpacetimePoint<f64>, q: &ParabolicCube<f64>, p: &P) -> f64 {
    let (lo, hi) = q.bounds();
    let n = p.n();
    let mut spatial: f64 = 0.0;
    for i in 0..n {
        let d = (lo[i] - a.x[i]).max(a.x[i] - hi[i]).max(0.0);
        spatial += d * d;
    }
    let dt = (lo[n] - a.t).max(a.t - hi[n]).max(0.0);
    spatial.sqrt().max(dt.powf(1.0 / p.two_s()))
}

fn bmo_check(cfg: &mut RunConfig) -> Result<Outcome, RunError> {
    let s = cfg.f64("s");
    if !(s > 0.5 && s < 1.0) {
        return Err(RunError::invalid("`s` must lie in (1/2, 1) so the time order 1 - 1/(2s) is positive"));
    }
    let p = params(s, 1)?;
    let d = p.critical_dimension();
    let (_, natural) = cantor_generation::<f64>(&CantorSpec::new(1, cfg.usize("cantor_k"))?)?;
    let g = growth_constant(&natural, d, &p, None)?;
    let mu = frostman_rescale(&natural, &g)?;
    let g1 = growth_constant(&mu, d, &p, None)?.constant;
    let floor = g.radius_floor;
    let kind = KernelKind::Profile(Arc::new(build_profile(&p, &ProfileSettings::default())?));
    let alpha = 1.0 - 1.0 / (2.0 * s);
    let atoms = mu.atoms().to_vec();
    let weights = mu.weights().to_vec();
    let field = |x: f64, t: f64| -> f64 {
        atoms
            .iter()
            .zip(&weights)
            .map(|(a, &w)| w * kind.value((x - a.x[0]).powi(2), t - a.t, &p))
            .sum()
    };
    let away = |q: &SpacetimePoint<f64>| atoms.iter().all(|a| dist_p(q, a, &p).is_ok_and(|r| r >= 0.5 * floor));

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.u64("seed"));
    let want = cfg.usize("pairs");
    let mut pairs = Vec::with_capacity(want);
    let mut draws = 0usize;
    while pairs.len() < want {
        draws += 1;
        if draws > 1000 * want.max(1) {
            return Err(RunError::numerical("too few sample pairs away from the atoms"));
        }
        let x = -0.25 + 1.5 * rng.random::<f64>();
        let t = -0.25 + 1.5 * rng.random::<f64>();
        let u = t + (rng.random::<f64>() - 0.5) * 0.2f64.powf(1.0 + 3.0 * rng.random::<f64>());
        let a = SpacetimePoint::planar(x, t);
        let b = SpacetimePoint::planar(x, u);
        if a.t != b.t && away(&a) && away(&b) {
            pairs.push((a, b));
        }
    }
    let lip = lip_norm_t(|q: &SpacetimePoint<f64>| Ok(field(q.x[0], q.t)), alpha, &pairs)?;

    let mut settings = FracTimeSettings::new(TailModel::PowerLaw(1.0 / (2.0 * s)));
    settings.window = cfg.f64("window");
    settings.tol = cfg.f64("tol");
    settings.breakpoints = atoms.iter().map(|a| a.t).collect();
    let total: f64 = weights.iter().sum();
    let dfrac = |q: &SpacetimePoint<f64>| -> caloric::Result<f64> {
        let x = q.x[0];
        let mut local = settings.clone();
        let near = atoms
            .iter()
            .map(|a| dist_p(q, a, &p))
            .collect::<caloric::Result<Vec<_>>>()?
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        local.lip = Some(total * near.powf(-(1.0 + 2.0 * s)) * 4.0);
        Ok(frac_time_derivative(|t| Ok(field(x, t)), q.t, alpha, &local)?.value)
    };
    let candidates = random_cube_family(
        &[-0.25, -0.25],
        &[1.25, 1.25],
        cfg.usize("candidates"),
        (1e-2, 1.0),
        &p,
        cfg.u64("seed"),
    )?;
    let cubes: Vec<ParabolicCube<f64>> = candidates
        .into_iter()
        .filter(|q| atoms.iter().all(|a| dist_to_cube(a, q, &p) >= 0.5 * floor))
        .take(cfg.usize("cubes"))
        .collect();
    let bmo = bmo_parabolic_norm(dfrac, &cubes, cfg.usize("cube_nodes"))?;

    let mut out = Outcome::new();
    out.put(
        "measure",
        json!({
            "atoms": atoms.len(),
            "degree": d,
            "natural_growth": g.constant,
            "rescaled_growth": g1,
            "radius_floor": floor,
        }),
    );
    out.put("time_order", alpha);
    out.put("lip_t", json!({ "pairs": pairs.len(), "value": lip }));
    out.put(
        "bmo",
        json!({ "cubes": cubes.len(), "value": bmo.value, "argmax_cube": bmo.argmax_cube }),
    );
    let mut rows = String::from("x_1,t,side,oscillation\n");
    for (q, v) in cubes.iter().zip(&bmo.per_cube) {
        let _ = writeln!(rows, "{:e},{:e},{:e},{v:e}", q.spatial_corner[0], q.time_start, q.spatial_side);
    }
    out.file("bmo_cubes.csv", rows);
    Ok(out)
}
