use std::fs;
use std::path::Path;

use fibration_forge::angles::{
    aligning_isometry_complex, aligning_isometry_conjugate, aligning_isometry_real,
    principal_angles_complex, principal_angles_conjugate, principal_angles_real,
};
use fibration_forge::fibration::{
    build_fibration_with, default_schedule, extend_germ, hopf_fibre_through, hopf_map, sample_points,
    standard_hopf_structure, verify_fibration, BaseMap, BuildOptions, BumpProfile, ExtendOptions,
    FibrationArtifact, FibrationBase, MarginGrid, VerifyOptions,
};
use fibration_forge::io::{complex_rows, matrix_rows, parse_germ, parse_linear_map, parse_subspace, to_json_string, Subspace};
use fibration_forge::numeric::min_abs_imag_eigenvalue;
use fibration_forge::sampling::{rng_from_seed, unit_vector};
use fibration_forge::structures::RetractionPath;
use fibration_forge::{ComplexSubspace, ForgeError, OrientedTwoPlane, RealSubspace};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::{AnglesArgs, BuildArgs, ExtendArgs, HopfArgs, RetractArgs, SampleArgs, SampleCounts, Setting, VerifyArgs};
use crate::report::{exit_code, verification_checks, write_atomic, Check, Report, EXIT_INPUT};
use crate::svg;

/// A command that stopped before producing its checks.
#[derive(Debug)]
pub struct Stop {
    pub code: i32,
    pub message: String,
}

impl Stop {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }
}

impl From<ForgeError> for Stop {
    fn from(e: ForgeError) -> Self {
        Self {
            code: exit_code(&e),
            message: e.to_string(),
        }
    }
}

fn read(path: &Path) -> Result<String, Stop> {
    fs::read_to_string(path).map_err(|e| Stop::input(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), Stop> {
    write_atomic(path, bytes).map_err(|e| Stop::input(format!("cannot write {}: {e}", path.display())))
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report data serializes")
}

fn load_artifact(path: &Path) -> Result<FibrationBase, Stop> {
    let art: FibrationArtifact = serde_json::from_str(&read(path)?)
        .map_err(|e| Stop::input(format!("malformed artifact: {e}")))?;
    Ok(art.to_base()?)
}

fn verify_options(counts: &SampleCounts, seed: u64) -> VerifyOptions {
    VerifyOptions {
        samples: counts.samples,
        pairs: counts.pairs,
        seed,
        ..VerifyOptions::default()
    }
}

fn orthogonality_residual(m: &DMatrix<f64>) -> f64 {
    (m.transpose() * m - DMatrix::identity(m.nrows(), m.ncols())).norm()
}

fn square_plus_identity(m: &DMatrix<f64>) -> f64 {
    (m * m + DMatrix::identity(m.nrows(), m.ncols())).norm()
}

pub fn retract(args: &RetractArgs, report: &mut Report) -> Result<(), Stop> {
    let t = parse_linear_map(&read(&args.input)?)?;
    let path = RetractionPath::new(&t, args.tol)?;
    let steps = args.t_grid as usize;
    let mut maps = Vec::with_capacity(steps);
    let mut worst = (f64::INFINITY, 0.0);
    for k in 0..steps {
        let s = k as f64 / (steps - 1) as f64;
        let m = path.eval(s);
        let gap = min_abs_imag_eigenvalue(m.matrix())?;
        if gap < worst.0 {
            worst = (gap, s);
        }
        maps.push((s, m.rows()));
    }
    let j = path.complex_structure().matrix();
    let end = path.endpoint();
    report.push(Check::new("complex_structure", square_plus_identity(j) < 1e-7, square_plus_identity(j), vec![]));
    let junction = path.junction_residual();
    report.push(Check::new("path_continuous", junction < 1e-7, junction, vec![0.5]));
    report.push(Check::new("path_nondegenerate", worst.0 > args.tol, worst.0, vec![worst.1]));
    let ortho = orthogonality_residual(end.matrix()).max(square_plus_identity(end.matrix()));
    report.push(Check::new("endpoint_orthogonal", ortho < 1e-7, ortho, vec![1.0]));
    report.results = Some(json!({
        "J_T": matrix_rows(j),
        "endpoint": matrix_rows(end.matrix()),
    }));
    if let Some(out) = &args.samples_out {
        #[derive(Serialize)]
        struct Sample {
            t: f64,
            map: Vec<Vec<f64>>,
        }
        let samples: Vec<Sample> = maps.into_iter().map(|(t, map)| Sample { t, map }).collect();
        write(out, to_json_string(&samples).as_bytes())?;
    }
    Ok(())
}

fn load_subspaces(paths: &[std::path::PathBuf]) -> Result<Vec<Subspace>, Stop> {
    paths.iter().map(|p| Ok(parse_subspace(&read(p)?)?)).collect()
}

fn reals(subs: Vec<Subspace>) -> Result<Vec<RealSubspace>, Stop> {
    subs.into_iter()
        .map(|s| match s {
            Subspace::Real(r) => Ok(r),
            Subspace::Complex(_) => Err(Stop::input("setting real needs real subspaces")),
        })
        .collect()
}

fn complexes(subs: Vec<Subspace>, setting: &str) -> Result<Vec<ComplexSubspace>, Stop> {
    subs.into_iter()
        .map(|s| match s {
            Subspace::Complex(c) => Ok(c),
            Subspace::Real(_) => Err(Stop::input(format!("setting {setting} needs complex subspaces"))),
        })
        .collect()
}

fn count_check(what: &str, got: usize, want: usize) -> Result<(), Stop> {
    if got != want {
        return Err(Stop::input(format!("{what} takes {want} subspace file(s), got {got}")));
    }
    Ok(())
}

/// Records a profile mismatch as a failed check and any other error as a stop.
fn alignment_outcome<T>(
    report: &mut Report,
    result: fibration_forge::Result<T>,
) -> Result<Option<T>, Stop> {
    match result {
        Ok(f) => Ok(Some(f)),
        Err(e @ ForgeError::Mismatch { max_diff, .. }) => {
            report.push(Check::new("profiles_match", false, max_diff, vec![]));
            report.fail_with(e.to_string());
            Ok(None)
        }
        Err(e) => Err(e.into()),
    }
}

pub fn angles(args: &AnglesArgs, report: &mut Report) -> Result<(), Stop> {
    let subs = load_subspaces(&args.subspaces)?;
    let aligns = load_subspaces(&args.align)?;
    let mut results = serde_json::Map::new();
    match args.setting {
        Setting::Real => {
            count_check("setting real", subs.len(), 2)?;
            let s = reals(subs)?;
            let prof = principal_angles_real(&s[0], &s[1])?;
            report.push(Check::new("pairing", prof.pairing_defect() < 1e-8, prof.pairing_defect(), vec![]));
            results.insert("angles".into(), to_value(&prof.angles));
            if !aligns.is_empty() {
                count_check("--align with setting real", aligns.len(), 2)?;
                let t = reals(aligns)?;
                let f = aligning_isometry_real(&s[0], &s[1], &t[0], &t[1], args.tol);
                if let Some(f) = alignment_outcome(report, f)? {
                    let moved = |a: &RealSubspace, b: &RealSubspace| {
                        let img = &f * a.basis();
                        (0..img.ncols()).map(|k| b.distance_to(&img.column(k).into_owned())).fold(0.0, f64::max)
                    };
                    let resid = moved(&s[0], &t[0]).max(moved(&s[1], &t[1]));
                    let unit = orthogonality_residual(&f);
                    report.push(Check::new("profiles_match", true, 0.0, vec![]));
                    report.push(Check::new("isometry", unit < 1e-8, unit, vec![]));
                    report.push(Check::new("alignment", resid < 1e-8, resid, vec![]));
                    results.insert("isometry".into(), to_value(&matrix_rows(&f)));
                }
            }
        }
        Setting::Complex => {
            count_check("setting complex", subs.len(), 2)?;
            let s = complexes(subs, "complex")?;
            let prof = principal_angles_complex(&s[0], &s[1])?;
            report.push(Check::new("pairing", prof.pairing_defect() < 1e-8, prof.pairing_defect(), vec![]));
            results.insert("angles".into(), to_value(&prof.angles));
            if !aligns.is_empty() {
                count_check("--align with setting complex", aligns.len(), 2)?;
                let t = complexes(aligns, "complex")?;
                let f = aligning_isometry_complex(&s[0], &s[1], &t[0], &t[1], args.tol);
                if let Some(f) = alignment_outcome(report, f)? {
                    let moved = |a: &ComplexSubspace, b: &ComplexSubspace| {
                        let img = &f * a.basis();
                        (0..img.ncols()).map(|k| b.distance_to(&img.column(k).into_owned())).fold(0.0, f64::max)
                    };
                    let resid = moved(&s[0], &t[0]).max(moved(&s[1], &t[1]));
                    let id = DMatrix::identity(f.nrows(), f.ncols());
                    let unit = (f.adjoint() * &f - id).norm();
                    report.push(Check::new("profiles_match", true, 0.0, vec![]));
                    report.push(Check::new("isometry", unit < 1e-8, unit, vec![]));
                    report.push(Check::new("alignment", resid < 1e-8, resid, vec![]));
                    results.insert("isometry".into(), to_value(&complex_rows(&f)));
                }
            }
        }
        Setting::Conjugate => {
            count_check("setting conjugate", subs.len(), 1)?;
            let s = complexes(subs, "conjugate")?;
            let prof = principal_angles_conjugate(&s[0])?;
            report.push(Check::new("pairing", prof.pairing_defect() < 1e-8, prof.pairing_defect(), vec![]));
            results.insert("angles".into(), to_value(&prof.angles));
            if !aligns.is_empty() {
                count_check("--align with setting conjugate", aligns.len(), 1)?;
                let t = complexes(aligns, "conjugate")?;
                let f = aligning_isometry_conjugate(&s[0], &t[0], args.tol);
                if let Some(f) = alignment_outcome(report, f)? {
                    let img = f.map(|x| nalgebra::Complex::new(x, 0.0)) * s[0].basis();
                    let resid = (0..img.ncols())
                        .map(|k| t[0].distance_to(&img.column(k).into_owned()))
                        .fold(0.0, f64::max);
                    let unit = orthogonality_residual(&f);
                    report.push(Check::new("profiles_match", true, 0.0, vec![]));
                    report.push(Check::new("isometry", unit < 1e-8, unit, vec![]));
                    report.push(Check::new("alignment", resid < 1e-8, resid, vec![]));
                    results.insert("isometry".into(), to_value(&matrix_rows(&f)));
                }
            }
        }
    }
    report.results = Some(Value::Object(results));
    Ok(())
}

fn certificate_checks(base: &FibrationBase, report: &mut Report) {
    let gap = base.certified_gap();
    let w = &base.margin().witness;
    let witness = std::iter::once(w.t).chain(w.v.iter().copied()).collect();
    report.push(Check::new("certificate", gap > 0.0, gap, witness));
    let d0 = base.eval_dn(&DVector::zeros(2 * base.n()));
    let dev = (d0 - base.a().matrix()).amax();
    report.push(Check::new("tangent_at_fibre", dev == 0.0, dev, vec![]));
}

fn fibration_results(base: &FibrationBase) -> Value {
    json!({
        "n": base.n(),
        "n_exp": base.bump().n_exp,
        "epsilon": base.epsilon(),
        "slope_sup": base.bump().slope_sup(),
        "diff_norm": base.diff_norm(),
        "J": matrix_rows(base.j().matrix()),
    })
}

pub fn build(args: &BuildArgs, seed: u64, report: &mut Report) -> Result<(), Stop> {
    let a = parse_linear_map(&read(&args.input)?)?;
    if a.dim() % 2 != 0 {
        return Err(Stop::input(format!("A must act on an even-dimensional space, got {}", a.dim())));
    }
    let bump = BumpProfile::new(args.r0, args.r1, 1).map_err(|e| Stop::input(e.to_string()))?;
    let opts = BuildOptions {
        grid: MarginGrid {
            t_count: args.t_count,
            lambda_count: args.lambda_count,
            ..MarginGrid::default()
        },
        ..BuildOptions::default()
    };
    let base = build_fibration_with(&a, &OrientedTwoPlane::standard(a.half_dim()), &bump, &opts)?;
    write(&args.out, to_json_string(&FibrationArtifact::from_base(&base)).as_bytes())?;
    certificate_checks(&base, report);
    let verified = verify_fibration(&base, &verify_options(&args.counts, seed));
    for c in verification_checks(&verified) {
        report.push(c);
    }
    report.results = Some(fibration_results(&base));
    Ok(())
}

pub fn verify(args: &VerifyArgs, seed: u64, report: &mut Report) -> Result<(), Stop> {
    let base = load_artifact(&args.artifact)?;
    let cert = base.recheck(&base.margin().grid);
    let gap = cert.recomputed_epsilon.min(cert.stored_epsilon) - cert.slope_sup * cert.diff_norm;
    report.push(Check::new(
        "certificate",
        cert.holds(),
        gap,
        vec![cert.stored_epsilon, cert.recomputed_epsilon],
    ));
    let d0 = base.eval_dn(&DVector::zeros(2 * base.n()));
    let dev = (d0 - base.a().matrix()).amax();
    report.push(Check::new("tangent_at_fibre", dev == 0.0, dev, vec![]));
    let verified = verify_fibration(&base, &verify_options(&args.counts, seed));
    for c in verification_checks(&verified) {
        report.push(c);
    }
    let mut results = fibration_results(&base);
    results["recomputed_epsilon"] = json!(cert.recomputed_epsilon);
    report.results = Some(results);
    Ok(())
}

pub fn extend(args: &ExtendArgs, seed: u64, report: &mut Report) -> Result<(), Stop> {
    let germ = parse_germ(&read(&args.germ)?)?;
    let opts = ExtendOptions {
        verify: verify_options(&args.counts, seed),
        ..ExtendOptions::default()
    };
    let p = OrientedTwoPlane::standard(germ.n());
    match extend_germ(&germ, &p, &default_schedule(), &opts) {
        Ok(ext) => {
            for c in verification_checks(&ext.report) {
                report.push(c);
            }
            report.results = Some(json!({
                "rho": ext.rho(),
                "attempts": to_value(&ext.attempts),
            }));
            if let Some(out) = &args.out {
                let germ_json: Value = serde_json::from_str(&fibration_forge::io::germ_to_json(&germ))
                    .expect("germ JSON reads back");
                let doc = json!({
                    "germ": germ_json,
                    "rho": ext.rho(),
                    "outer": to_value(&FibrationArtifact::from_base(ext.composite.outer())),
                });
                write(out, to_json_string(&doc).as_bytes())?;
            }
        }
        Err(e @ ForgeError::ExtensionFailed { .. }) => {
            if let ForgeError::ExtensionFailed { best_report, .. } = &e {
                for c in verification_checks(best_report) {
                    report.push(c);
                }
            }
            report.fail_with(e.to_string());
        }
        Err(e) => return Err(e.into()),
    }
    Ok(())
}

pub fn sample_fibres(args: &SampleArgs, seed: u64, report: &mut Report) -> Result<(), Stop> {
    let base = load_artifact(&args.artifact)?;
    if args.svg.is_some() && base.n() != 1 {
        return Err(Stop::input(format!(
            "--svg draws fibres of S^3 only; this artifact fibres S^{}",
            2 * base.n() + 1
        )));
    }
    let xs = sample_points(&base, args.count as usize, seed);
    let circles = xs
        .iter()
        .map(|x| base.fibre(x))
        .collect::<fibration_forge::Result<Vec<_>>>()?;
    let samples: Vec<Vec<(f64, DVector<f64>)>> = circles.iter().map(|c| c.sample(args.points as usize)).collect();

    let mut out = csv::Writer::from_writer(Vec::new());
    let dim = 2 * base.n() + 2;
    let mut header = vec!["fibre_id".to_string(), "t".to_string()];
    header.extend((1..=dim).map(|k| format!("x{k}")));
    out.write_record(&header).map_err(|e| Stop::input(e.to_string()))?;
    let mut unit_dev: f64 = 0.0;
    for (id, fibre) in samples.iter().enumerate() {
        for (t, p) in fibre {
            unit_dev = unit_dev.max((p.norm() - 1.0).abs());
            let mut row = vec![id.to_string(), t.to_string()];
            row.extend(p.iter().map(|v| v.to_string()));
            out.write_record(&row).map_err(|e| Stop::input(e.to_string()))?;
        }
    }
    let bytes = out.into_inner().map_err(|e| Stop::input(e.to_string()))?;
    write(&args.out, &bytes)?;

    let mut closest = (f64::INFINITY, 0usize, 0usize);
    for i in 0..samples.len() {
        for j in i + 1..samples.len() {
            for (_, p) in &samples[i] {
                for (_, q) in &samples[j] {
                    let d = (p - q).norm();
                    if d < closest.0 {
                        closest = (d, i, j);
                    }
                }
            }
        }
    }
    report.push(Check::new("unit_norm", unit_dev < 1e-12, unit_dev, vec![]));
    if samples.len() > 1 {
        report.push(Check::new(
            "fibres_apart",
            closest.0 > 0.0,
            closest.0,
            vec![closest.1 as f64, closest.2 as f64],
        ));
    }
    if let Some(path) = &args.svg {
        let picture = svg::render(&samples);
        write(path, picture.as_bytes())?;
    }
    report.results = Some(json!({ "fibres": samples.len(), "rows": samples.len() * args.points as usize }));
    Ok(())
}

fn load_points(path: &Path) -> Result<Vec<Vec<f64>>, Stop> {
    let v: Value = serde_json::from_str(&read(path)?).map_err(|e| Stop::input(format!("malformed JSON: {e}")))?;
    let as_point = |p: &Value| -> Result<Vec<f64>, Stop> {
        p.as_array()
            .ok_or_else(|| Stop::input("each point must be an array of numbers"))?
            .iter()
            .map(|x| x.as_f64().ok_or_else(|| Stop::input("point coordinates must be numbers")))
            .collect()
    };
    match v.as_array() {
        Some(items) if items.iter().all(Value::is_number) => Ok(vec![as_point(&v)?]),
        Some(items) => items.iter().map(as_point).collect(),
        None => Err(Stop::input("expected a point or an array of points")),
    }
}

pub fn hopf(args: &HopfArgs, seed: u64, report: &mut Report) -> Result<(), Stop> {
    let points = match &args.points {
        Some(p) => load_points(p)?,
        None => {
            let mut rng = rng_from_seed(seed);
            (0..args.count).map(|_| unit_vector(&mut rng, 4).iter().copied().collect()).collect()
        }
    };
    let j = standard_hopf_structure(1);
    let mut images = Vec::with_capacity(points.len());
    let mut unit = (0.0f64, 0usize);
    let mut spread = (0.0f64, 0usize);
    for (i, x) in points.iter().enumerate() {
        let y = hopf_map(x)?;
        let dev = (y.iter().map(|v| v * v).sum::<f64>().sqrt() - 1.0).abs();
        if dev > unit.0 {
            unit = (dev, i);
        }
        let fibre = hopf_fibre_through(&j, &DVector::from_column_slice(x))?;
        for (_, p) in fibre.sample(args.fibre_samples as usize) {
            let z = hopf_map(p.as_slice())?;
            let d = (0..3).map(|k| (z[k] - y[k]).abs()).fold(0.0, f64::max);
            if d > spread.0 {
                spread = (d, i);
            }
        }
        images.push(y);
    }
    let witness = |i: usize| points.get(i).cloned().unwrap_or_default();
    report.push(Check::new("unit_image", unit.0 < 1e-12, unit.0, witness(unit.1)));
    report.push(Check::new("fibre_invariance", spread.0 < 1e-12, spread.0, witness(spread.1)));
    if let Some(out) = &args.out {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| Stop::input(e.to_string());
        w.write_record(["x1", "x2", "x3", "x4", "y1", "y2", "y3"]).map_err(err)?;
        for (x, y) in points.iter().zip(&images) {
            let row: Vec<String> = x.iter().chain(y.iter()).map(|v| v.to_string()).collect();
            w.write_record(&row).map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| Stop::input(e.to_string()))?;
        write(out, &bytes)?;
    }
    if args.points.is_some() {
        report.results = Some(json!({ "images": images }));
    } else {
        report.results = Some(json!({ "points": points.len() }));
    }
    Ok(())
}
