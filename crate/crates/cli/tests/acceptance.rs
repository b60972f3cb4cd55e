//! Acceptance gate: one line per criterion, exit status 1 if any fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::f64::consts::FRAC_PI_2;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use fibration_forge::angles::{
    principal_angles_complex, principal_angles_conjugate, principal_angles_real, ComplexSubspace,
    RealSubspace,
};
use fibration_forge::fibration::{
    build_fibration, default_schedule, extend_germ, hopf_fibre_through, hopf_map, slope_sup,
    standard_hopf_structure, verify_fibration, BumpProfile, ExtendOptions, FibrationBase, GermSpec,
    MarginGrid, VerifyOptions,
};
use fibration_forge::grassmann::OrientedTwoPlane;
use fibration_forge::numeric::{
    bezout_projectors, condition_number, eigen_split, min_abs_imag_eigenvalue, orthonormalize, to_complex,
    CMatrix, RealLinearMap,
};
use fibration_forge::sampling::{
    random_complex_basis, random_complex_structure, random_invertible, random_orthogonal,
    random_real_basis, random_unitary, rng_from_seed, unit_vector,
};
use fibration_forge::structures::{make_complex_structure, mckay_path, open_scissors, ComplexStructure, ScissorsFrame};
use fibration_forge::ForgeError;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use common::{greedy_complex, greedy_conjugate, greedy_real, span_gap, sphere_descent_margin, valid_map};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn square_plus_identity(j: &DMatrix<f64>) -> f64 {
    let d = j.nrows();
    (j * j + DMatrix::identity(d, d)).norm()
}

fn orthogonality(j: &DMatrix<f64>) -> f64 {
    let d = j.nrows();
    (j.transpose() * j - DMatrix::identity(d, d)).norm()
}

fn structure(m: DMatrix<f64>) -> ComplexStructure {
    ComplexStructure::new(RealLinearMap::new(m).unwrap(), 1e-9).unwrap()
}

fn hopf_formulas() -> Outcome {
    ensure!(hopf_map(&[1.0, 0.0, 0.0, 0.0]).unwrap() == [0.0, 0.0, 1.0], "north pole image");
    ensure!(hopf_map(&[0.0, 0.0, 1.0, 0.0]).unwrap() == [0.0, 0.0, -1.0], "south pole image");
    let mut rng = rng_from_seed(1);
    let mut unit: f64 = 0.0;
    for _ in 0..1000 {
        let x = unit_vector(&mut rng, 4);
        let y = hopf_map(x.as_slice()).unwrap();
        unit = unit.max((y.iter().map(|v| v * v).sum::<f64>().sqrt() - 1.0).abs());
    }
    ensure!(unit < 1e-12, "|y| − 1 reaches {unit:e}");
    let j = standard_hopf_structure(1);
    let mut spread: f64 = 0.0;
    for _ in 0..100 {
        let x = unit_vector(&mut rng, 4);
        let y = hopf_map(x.as_slice()).unwrap();
        for (_, p) in hopf_fibre_through(&j, &x).unwrap().sample(64) {
            let z = hopf_map(p.as_slice()).unwrap();
            spread = spread.max((0..3).map(|k| (z[k] - y[k]).abs()).fold(0.0, f64::max));
        }
    }
    ensure!(spread < 1e-12, "fibre spread {spread:e}");
    Ok(format!("unit {unit:.1e}, spread {spread:.1e}"))
}

fn prop2_suite() -> Outcome {
    let mut rng = rng_from_seed(2);
    let (mut sq, mut equi, mut span, mut path_min) = (0.0f64, 0.0f64, 0.0f64, f64::INFINITY);
    for i in 0..1000 {
        let dim = [4, 6, 8, 12][i % 4];
        let t = valid_map(&mut rng, dim);
        let j = make_complex_structure(&t, 1e-9).map_err(|e| format!("sample {i}: {e}"))?;
        sq = sq.max(square_plus_identity(j.matrix()));

        let g = random_invertible(&mut rng, dim, 100.0);
        let g_inv = g.clone().try_inverse().unwrap();
        let moved = make_complex_structure(&RealLinearMap::new(&g * t.matrix() * &g_inv).unwrap(), 1e-9)
            .map_err(|e| format!("sample {i} conjugated: {e}"))?;
        let rhs = &g * j.matrix() * &g_inv;
        let rel = (moved.matrix() - &rhs).norm() / rhs.norm().max(1.0) / condition_number(&g);
        equi = equi.max(rel);

        let split = eigen_split(&t, 1e-9).unwrap();
        let (pp, _) = bezout_projectors(&t, 1e-9).unwrap();
        let probe = CMatrix::from_fn(dim, dim / 2, |_, _| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
        let range = orthonormalize(&(&pp * probe), 1e-12).map_err(|e| format!("sample {i} Bezout range: {e}"))?;
        let b = split.basis_plus();
        span = span.max(span_gap(b, &range)).max(span_gap(&range, b));

        if i < 200 {
            for k in 0..=100 {
                let m = mckay_path(&t, k as f64 / 100.0).unwrap();
                path_min = path_min.min(min_abs_imag_eigenvalue(m.matrix()).unwrap());
            }
        }
    }
    ensure!(sq < 1e-7, "‖J² + I‖ reaches {sq:e}");
    ensure!(equi < 1e-6, "equivariance residual / cond(g) reaches {equi:e}");
    ensure!(span < 1e-6, "Schur vs Bezout span residual {span:e}");
    ensure!(path_min > 0.0, "path meets a real eigenvalue");
    Ok(format!("J²+I {sq:.1e}, equivariance {equi:.1e}, span {span:.1e}, path min|Im λ| {path_min:.1e}"))
}

fn block_diag(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let dim = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(dim, dim);
    let mut at = 0;
    for b in blocks {
        out.view_mut((at, at), b.shape()).copy_from(b);
        at += b.nrows();
    }
    out
}

fn b_structure(b: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[0.0, b, -1.0 / b, 0.0])
}

fn prop3_suite() -> Outcome {
    let mut rng = rng_from_seed(3);
    let (mut ortho, mut sq, mut equi) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..200 {
        let dim = [4, 6, 8][i % 3];
        let j = structure(random_complex_structure(&mut rng, dim, 10.0));
        for k in 0..=10 {
            let jt = open_scissors(&j, k as f64 / 10.0).map_err(|e| format!("structure {i}: {e}"))?;
            sq = sq.max(square_plus_identity(jt.matrix()));
        }
        let end = open_scissors(&j, 1.0).unwrap();
        ortho = ortho.max(orthogonality(end.matrix()));
        let q = random_orthogonal(&mut rng, dim);
        let turned = structure(&q * j.matrix() * q.transpose());
        for t in [0.0, 0.37, 1.0] {
            let lhs = open_scissors(&turned, t).unwrap();
            let rhs = &q * open_scissors(&j, t).unwrap().matrix() * q.transpose();
            equi = equi.max((lhs.matrix() - rhs).norm());
        }
    }
    ensure!(ortho < 1e-7, "endpoint orthogonality {ortho:e}");
    ensure!(sq < 1e-7, "J(t)² + I reaches {sq:e}");
    ensure!(equi < 1e-6, "O(2n) equivariance {equi:e}");

    let closed = open_scissors(&structure(b_structure(2.0)), 1.0).unwrap();
    let want = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
    let closed_err = (closed.matrix() - want).amax();
    ensure!(closed_err < 1e-8, "2×2 closed case off by {closed_err:e}");

    // b = 2 and b = −1/2 share an angle, so their coincidence vectors may be
    // rotated into each other
    let g = random_orthogonal(&mut rng, 6);
    let j = structure(&g * block_diag(&[b_structure(3.0), b_structure(2.0), b_structure(-0.5)]) * g.transpose());
    let v = principal_angles_conjugate(&ComplexSubspace::spanned_by(&j.plus_space()).unwrap()).unwrap().first;
    let reference = ScissorsFrame::from_coincidence_basis(&v).unwrap();
    let mut remix: f64 = 0.0;
    for _ in 0..8 {
        let mut r = DMatrix::<f64>::identity(3, 3);
        r.view_mut((1, 1), (2, 2)).copy_from(&random_orthogonal(&mut rng, 2));
        let mixed = ScissorsFrame::from_coincidence_basis(&(&v * to_complex(&r))).unwrap();
        for k in 0..=10 {
            let t = k as f64 / 10.0;
            remix = remix.max((mixed.at(t) - reference.at(t)).norm());
        }
    }
    ensure!(remix < 1e-7, "equal-angle remixing moves the output by {remix:e}");
    Ok(format!("orthogonality {ortho:.1e}, J²+I {sq:.1e}, equivariance {equi:.1e}, remix {remix:.1e}"))
}

fn angles_suite() -> Outcome {
    let mut rng = rng_from_seed(4);
    let (mut greedy, mut invariance, mut constrained) = (0.0f64, 0.0f64, 0.0f64);
    let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    for i in 0..100 {
        let dim = 3 + i % 3;
        let k = 1 + i % 2;
        let p = RealSubspace::new(random_real_basis(&mut rng, dim, k)).unwrap();
        let q = RealSubspace::new(random_real_basis(&mut rng, dim, k)).unwrap();
        let prof = principal_angles_real(&p, &q).unwrap();
        greedy = greedy.max(diff(&prof.angles, &greedy_real(p.basis(), q.basis())));
        let g = random_orthogonal(&mut rng, dim);
        let moved = principal_angles_real(&p.transformed(&g).unwrap(), &q.transformed(&g).unwrap()).unwrap();
        invariance = invariance.max(prof.max_angle_diff(&moved));
    }
    for i in 0..100 {
        let dim = 2 + i % 3;
        let k = 1 + i % 2;
        let p = ComplexSubspace::new(random_complex_basis(&mut rng, dim, k)).unwrap();
        let q = ComplexSubspace::new(random_complex_basis(&mut rng, dim, k)).unwrap();
        let prof = principal_angles_complex(&p, &q).unwrap();
        greedy = greedy.max(diff(&prof.angles, &greedy_complex(p.basis(), q.basis())));
        let u = random_unitary(&mut rng, dim);
        let moved = principal_angles_complex(&p.transformed(&u).unwrap(), &q.transformed(&u).unwrap()).unwrap();
        invariance = invariance.max(prof.max_angle_diff(&moved));
    }
    for i in 0..100 {
        let n = 1 + i % 3;
        let k = if n == 1 { 1 } else { 1 + i % 2 };
        let p = ComplexSubspace::new(random_complex_basis(&mut rng, 2 * n, k)).unwrap();
        let prof = principal_angles_conjugate(&p).map_err(|e| format!("conjugate pair {i}: {e}"))?;
        greedy = greedy.max(diff(&prof.angles, &greedy_conjugate(p.basis())));
        let g = to_complex(&random_orthogonal(&mut rng, 2 * n));
        let moved = principal_angles_conjugate(&p.transformed(&g).unwrap()).unwrap();
        invariance = invariance.max(prof.max_angle_diff(&moved));
        let ordinary = principal_angles_complex(&p, &p.conj()).unwrap();
        constrained = constrained.max(prof.max_angle_diff(&ordinary));
    }
    ensure!(greedy < 1e-4, "greedy oracle disagreement {greedy:e}");
    ensure!(invariance < 1e-8, "isometry invariance {invariance:e}");
    ensure!(constrained < 1e-8, "constrained vs ordinary angles {constrained:e}");

    let line = |b: f64| {
        let v = CMatrix::from_column_slice(2, 1, &[Complex64::new(1.0, 0.0), Complex64::new(0.0, b)]);
        principal_angles_conjugate(&ComplexSubspace::spanned_by(&v).unwrap()).unwrap().angles[0]
    };
    let cos2 = line(2.0).cos();
    ensure!((cos2 - 0.6).abs() < 1e-10, "b = 2 gives cos θ = {cos2}");
    let right = line(1.0);
    ensure!((right - FRAC_PI_2).abs() < 1e-12, "b = 1 gives θ = {right}");
    Ok(format!("greedy {greedy:.1e}, invariance {invariance:.1e}, constrained {constrained:.1e}"))
}

/// ε recomputed by descent on the sphere and ‖A − J‖ from the eigenvalues
/// of (A − J)ᵀ(A − J).
fn independent_certificate<R: Rng>(f: &FibrationBase, rng: &mut R) -> (f64, f64) {
    let (a, j) = (f.a().matrix(), f.j().matrix());
    let at = |t: f64| a * t + j * (1.0 - t);
    let mut eps = sphere_descent_margin(&at(f.margin().witness.t), rng, 8);
    for k in 0..=20 {
        eps = eps.min(sphere_descent_margin(&at(k as f64 / 20.0), rng, 3));
    }
    let d = a - j;
    let norm = nalgebra::SymmetricEigen::new(d.transpose() * &d).eigenvalues.max().max(0.0).sqrt();
    (eps, norm)
}

fn prop4_suite() -> Outcome {
    let mut rng = rng_from_seed(5);
    let mut worst_ratio: f64 = 0.0;
    let mut built = 0;
    for n in [1usize, 2] {
        for i in 0..20 {
            let a = valid_map(&mut rng, 2 * n);
            let p = OrientedTwoPlane::standard(n);
            let f = build_fibration(&a, &p, &BumpProfile::default()).map_err(|e| format!("n={n} #{i}: {e}"))?;
            let (eps, norm) = independent_certificate(&f, &mut rng);
            let lhs = slope_sup(f.bump()) * norm;
            ensure!(lhs < eps, "n={n} #{i}: S·‖A−J‖ = {lhs:e} ≥ ε = {eps:e}");
            worst_ratio = worst_ratio.max(lhs / eps);
            ensure!(f.recheck(&MarginGrid::default()).holds(), "n={n} #{i}: recheck fails");

            let report = verify_fibration(&f, &VerifyOptions { samples: 10_000, pairs: 500, seed: i as u64, ..VerifyOptions::default() });
            if !report.is_clean() {
                let bad: Vec<String> = report
                    .checks
                    .iter()
                    .filter(|c| !c.passed())
                    .map(|c| format!("{} ({} failures, worst {:e} at {:?})", c.name, c.failures, c.margin, c.witness))
                    .collect();
                return Err(format!("n={n} #{i}, A = {:?}, n_exp = {}: {}", a.rows(), f.bump().n_exp, bad.join("; ")));
            }
            ensure!(&f.eval_dn(&DVector::zeros(2 * n)) == a.matrix(), "n={n} #{i}: dN₀ ≠ A");
            for _ in 0..200 {
                let x = unit_vector(&mut rng, 2 * n) * (f.bump().outer_radius() * (1.0 + 9.0 * rng.gen::<f64>()));
                ensure!(f.eval_n(&x) == f.j().matrix() * &x, "n={n} #{i}: exterior differs from Jx");
            }
            built += 1;
        }
    }
    // S(f) by difference quotients of f on a dense grid
    let base = BumpProfile::default();
    let count = 400_000;
    let h = 1e-7;
    let oracle = (1..count)
        .map(|k| {
            let s = base.r0 + (base.r1 - base.r0) * k as f64 / count as f64;
            s * ((base.value(s + h) - base.value(s - h)) / (2.0 * h)).abs()
        })
        .fold(0.0, f64::max);
    let mut scaling: f64 = 0.0;
    for n_exp in 1..=6u64 {
        let s = slope_sup(&base.with_exponent(n_exp));
        scaling = scaling.max((s * n_exp as f64 / oracle - 1.0).abs());
    }
    ensure!(scaling < 1e-6, "S(f_n)·n deviates from S(f) by {scaling:e}");
    Ok(format!("{built} bases, worst S·‖A−J‖/ε {worst_ratio:.4}, S(f_n) scaling {scaling:.1e}"))
}

fn germ_suite() -> Outcome {
    let p = OrientedTwoPlane::standard(1);
    let j0 = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
    let opts = ExtendOptions::default();
    let linear = GermSpec::new(1, vec![j0.clone()], 1.0).unwrap();
    let ext = extend_germ(&linear, &p, &default_schedule(), &opts).map_err(|e| format!("linear germ: {e}"))?;
    ensure!(ext.report.is_clean() && ext.rho() == 1.0, "linear germ not accepted at ρ = 1");

    let c = 1e-2;
    let quad = DMatrix::from_row_slice(2, 4, &[c, 0.0, 0.0, c, 0.0, c, c, 0.0]);
    let germ = GermSpec::new(1, vec![j0, quad], 1.0).unwrap();
    let ext2 = extend_germ(&germ, &p, &default_schedule(), &opts).map_err(|e| format!("quadratic germ: {e}"))?;
    ensure!(ext2.report.is_clean(), "quadratic germ report not clean");

    let bad = GermSpec::new(1, vec![DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0])], 1.0).unwrap();
    match extend_germ(&bad, &p, &default_schedule(), &opts) {
        Err(ForgeError::GermInvalid { .. }) => {}
        other => return Err(format!("real-eigenvalue germ gave {:?}", other.map(|e| e.rho()))),
    }
    Ok(format!("linear ρ = {}, quadratic ρ = {}", ext.rho(), ext2.rho()))
}

const BIN: &str = env!("CARGO_BIN_EXE_fibration-forge");

fn tests_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests")
}

fn run_cli(args: &[String], dir: &Path) -> i32 {
    let out = Command::new(BIN)
        .args(args)
        .current_dir(dir)
        .env_remove("FIBRATION_FORGE_THREADS")
        .output()
        .expect("binary runs");
    out.status.code().unwrap_or(-1)
}

fn cli_contract() -> Outcome {
    let data = |f: &str| tests_dir().join("data").join(f).to_string_lossy().into_owned();
    let golden = |case: &str, f: &str| tests_dir().join("golden").join(case).join(f);
    let hopf_art = golden("build_hopf", "artifact.json").to_string_lossy().into_owned();
    let small = ["--samples", "2000", "--pairs", "200"];
    // (golden case, exit code, arguments, extra outputs)
    let cases: Vec<(&str, i32, Vec<String>, Vec<&str>)> = vec![
        ("retract_mckay", 0, vec!["retract".into(), data("mckay.json"), "--samples-out".into(), "{out}/path.json".into()], vec!["path.json"]),
        ("retract_identity", 3, vec!["retract".into(), data("identity.json")], vec![]),
        ("retract_malformed", 2, vec!["retract".into(), data("malformed.json")], vec![]),
        ("angles_conjugate_b2", 0, vec!["angles".into(), data("conj_b2.json"), "--setting".into(), "conjugate".into()], vec![]),
        ("angles_align_mismatch", 4, vec!["angles".into(), data("conj_b2.json"), "--setting".into(), "conjugate".into(), "--align".into(), data("conj_b1.json")], vec![]),
        ("angles_dimension_mismatch", 3, vec!["angles".into(), data("real_p.json"), data("real_r3.json"), "--setting".into(), "real".into()], vec![]),
        ("build_hopf", 0, [vec!["build-fibration".into(), data("hopf_A.json"), "--out".into(), "{out}/artifact.json".into()], small.map(String::from).to_vec()].concat(), vec!["artifact.json"]),
        ("build_real_eigen", 3, vec!["build-fibration".into(), data("real_eigen_A.json"), "--out".into(), "{out}/artifact.json".into()], vec![]),
        ("verify_hopf", 0, [vec!["verify".into(), hopf_art.clone()], small.map(String::from).to_vec()].concat(), vec![]),
        ("verify_corrupted", 4, [vec!["verify".into(), data("corrupted_seed7.json")], small.map(String::from).to_vec()].concat(), vec![]),
        ("extend_linear", 0, [vec!["extend-germ".into(), data("germ_linear.json"), "--out".into(), "{out}/extension.json".into()], small.map(String::from).to_vec()].concat(), vec!["extension.json"]),
        ("extend_real", 3, [vec!["extend-germ".into(), data("germ_real.json")], small.map(String::from).to_vec()].concat(), vec![]),
        ("sample_hopf", 0, vec!["sample-fibres".into(), hopf_art, "--count".into(), "3".into(), "--out".into(), "{out}/fibres.csv".into(), "--svg".into(), "{out}/fibres.svg".into()], vec!["fibres.csv", "fibres.svg"]),
        ("sample_svg_n2", 2, vec!["sample-fibres".into(), data("corrupted_seed7.json"), "--out".into(), "{out}/fibres.csv".into(), "--svg".into(), "{out}/fibres.svg".into()], vec![]),
        ("hopf_points", 0, vec!["hopf".into(), "--points".into(), data("hopf_points.json"), "--out".into(), "{out}/images.csv".into()], vec!["images.csv"]),
    ];
    let mut compared = 0;
    for (case, code, args, outputs) in &cases {
        let mut runs = Vec::new();
        for _ in 0..2 {
            let dir = tempfile::tempdir().unwrap();
            let out = dir.path().to_string_lossy().into_owned();
            let mut full: Vec<String> = args.iter().map(|a| a.replace("{out}", &out)).collect();
            full.extend(["--report".to_string(), format!("{out}/report.json")]);
            let got = run_cli(&full, dir.path());
            ensure!(got == *code, "{case}: exit {got}, expected {code}");
            runs.push(dir);
        }
        for file in std::iter::once(&"report.json").chain(outputs) {
            let a = fs::read(runs[0].path().join(file)).map_err(|e| format!("{case}: {file}: {e}"))?;
            let b = fs::read(runs[1].path().join(file)).unwrap();
            ensure!(a == b, "{case}: {file} differs between identical runs");
            let want = fs::read(golden(case, file)).map_err(|e| format!("{case}: golden {file}: {e}"))?;
            ensure!(a == want, "{case}: {file} differs from golden");
            compared += 1;
        }
    }
    let dir = tempfile::tempdir().unwrap();
    ensure!(run_cli(&["retract".into(), data("mckay.json"), "--bogus".into()], dir.path()) == 2, "unknown flag accepted");
    ensure!(run_cli(&["frobnicate".into()], dir.path()) == 2, "unknown verb accepted");
    Ok(format!("{} cases, {compared} files byte-identical to goldens", cases.len()))
}

fn main() {
    let criteria: [(&str, Duration, fn() -> Outcome); 7] = [
        ("1 Hopf formulas", Duration::from_secs(1), hopf_formulas),
        ("2 complex structure of a map", Duration::from_secs(60), prop2_suite),
        ("3 scissors retraction", Duration::from_secs(60), prop3_suite),
        ("4 principal angles", Duration::from_secs(30), angles_suite),
        ("5 fibration builder end to end", Duration::from_secs(300), prop4_suite),
        ("6 germ extension", Duration::from_secs(120), germ_suite),
        ("7 CLI determinism and exit codes", Duration::from_secs(600), cli_contract),
    ];
    let mut failed = 0;
    for (name, budget, check) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > budget => Err(format!("{detail}; over the {budget:?} budget")),
            o => o,
        };
        match outcome {
            Ok(detail) => println!("PASS  {name} ({:.2} s): {detail}", elapsed.as_secs_f64()),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name} ({:.2} s): {why}", elapsed.as_secs_f64());
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
