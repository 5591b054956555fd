//! Acceptance suite. Runs without the libtest harness so every criterion
//! prints exactly one PASS/FAIL line; the process exits non-zero if any fail.

use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use verdoorn::config::{ConfigFile, RunConfig};
use verdoorn::io::load_inputs;
use verdoorn::pipeline::sweep;
use verdoorn::render::{render_ml_table, render_ols_table, CoefCell, MlRow, OlsRow};
use verdoorn_core::diagnostics::{lm_tests, LmTests};
use verdoorn_core::ingest::{Period, Sector};
use verdoorn_core::lisa::local_moran;
use verdoorn_core::moran::{morans_i, permutation_test};
use verdoorn_core::ols::{intercept_design, ols};
use verdoorn_core::spatial_ml::{fit_error, fit_lag, ErrorLikelihood, LagLikelihood};
use verdoorn_core::specsearch::{decide_lm, Choice, DEFAULT_ALPHA};
use verdoorn_core::stats::{normal_two_sided, student_t_two_sided};
use verdoorn_core::weights::{Coordinate, SpatialWeights};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome, Option<Duration>);

fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixture")
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample::<f64, _>(StandardNormal)
}

fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("r{i}")).collect()
}

/// Row-standardized weights from 0/1 neighbour lists.
fn from_lists(lists: &[Vec<usize>]) -> SpatialWeights {
    let mut t = Vec::new();
    for (i, nb) in lists.iter().enumerate() {
        for &j in nb {
            t.push((i, j, 1.0 / nb.len() as f64));
        }
    }
    SpatialWeights::from_triplets(names(lists.len()), 0.0, &t).unwrap()
}

/// Symmetrized k-nearest-neighbour graph on uniform random points.
fn random_graph(rng: &mut ChaCha8Rng, n: usize) -> SpatialWeights {
    let k = rng.random_range(2..=4.min(n - 1));
    let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.random(), rng.random())).collect();
    let mut adj = vec![vec![false; n]; n];
    for i in 0..n {
        let mut order: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        let d = |j: usize| (pts[i].0 - pts[j].0).hypot(pts[i].1 - pts[j].1);
        order.sort_by(|&a, &b| d(a).total_cmp(&d(b)));
        for &j in &order[..k] {
            adj[i][j] = true;
            adj[j][i] = true;
        }
    }
    let lists: Vec<Vec<usize>> = adj.iter().map(|r| (0..n).filter(|&j| r[j]).collect()).collect();
    from_lists(&lists)
}

fn rook_lattice(side: usize) -> SpatialWeights {
    let lists: Vec<Vec<usize>> = (0..side * side)
        .map(|c| {
            let (r, k) = (c / side, c % side);
            let mut nb = Vec::new();
            if r > 0 {
                nb.push(c - side);
            }
            if r + 1 < side {
                nb.push(c + side);
            }
            if k > 0 {
                nb.push(c - 1);
            }
            if k + 1 < side {
                nb.push(c + 1);
            }
            nb
        })
        .collect();
    from_lists(&lists)
}

// dense linear algebra for the oracles

type Mat = Vec<Vec<f64>>;

fn dense(w: &SpatialWeights) -> Mat {
    let mut m = vec![vec![0.0; w.n()]; w.n()];
    for (i, j, v) in w.triplets() {
        m[i][j] = v;
    }
    m
}

fn matvec(m: &Mat, v: &[f64]) -> Vec<f64> {
    m.iter().map(|r| r.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// ln |det A| by LU with partial pivoting, with the determinant's sign.
fn lu_log_det(mut a: Mat) -> (f64, f64) {
    let n = a.len();
    let (mut log, mut sign) = (0.0, 1.0);
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        if p != c {
            a.swap(p, c);
            sign = -sign;
        }
        let piv = a[c][c];
        if piv < 0.0 {
            sign = -sign;
        }
        log += piv.abs().ln();
        for r in c + 1..n {
            let f = a[r][c] / piv;
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
        }
    }
    (log, sign)
}

fn inverse(mut a: Mat) -> Mat {
    let n = a.len();
    let mut inv: Mat = (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(p, c);
        inv.swap(p, c);
        let piv = a[c][c];
        for k in 0..n {
            a[c][k] /= piv;
            inv[c][k] /= piv;
        }
        for r in 0..n {
            if r != c {
                let f = a[r][c];
                for k in 0..n {
                    a[r][k] -= f * a[c][k];
                    inv[r][k] -= f * inv[c][k];
                }
            }
        }
    }
    inv
}

/// The four LM statistics computed straight from their definitions with
/// dense matrices: (lm_lag, lm_err, rlm_lag, rlm_err).
fn lm_oracle(y: &[f64], q: &[f64], w: &SpatialWeights) -> [f64; 4] {
    let n = y.len();
    let x: Mat = q.iter().map(|&v| vec![1.0, v]).collect();
    let xt: Mat = (0..2).map(|c| x.iter().map(|r| r[c]).collect()).collect();
    let xtx: Mat = xt.iter().map(|a| xt.iter().map(|b| dot(a, b)).collect()).collect();
    let xtx_inv = inverse(xtx);
    let project = |v: &[f64]| -> Vec<f64> {
        let b = matvec(&xtx_inv, &matvec(&xt, v));
        matvec(&x, &b)
    };
    let fitted = project(y);
    let e: Vec<f64> = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
    let s2 = dot(&e, &e) / n as f64;
    let wd = dense(w);
    let mut t = 0.0;
    for i in 0..n {
        for j in 0..n {
            t += wd[j][i] * wd[j][i] + wd[i][j] * wd[j][i];
        }
    }
    let wxb = matvec(&wd, &fitted);
    let pw = project(&wxb);
    let m_wxb: Vec<f64> = wxb.iter().zip(&pw).map(|(a, b)| a - b).collect();
    let d = dot(&wxb, &m_wxb) / s2 + t;
    let d_lambda = dot(&e, &matvec(&wd, &e)) / s2;
    let d_rho = dot(&e, &matvec(&wd, y)) / s2;
    [
        d_rho * d_rho / d,
        d_lambda * d_lambda / t,
        (d_rho - d_lambda).powi(2) / (d - t),
        (d_lambda - t / d * d_rho).powi(2) / (t * (1.0 - t / d)),
    ]
}

/// `(I − cW)⁻¹ r` by fixed-point iteration (|c| < 1, row sums 1).
fn spatial_solve(w: &SpatialWeights, c: f64, r: &[f64]) -> Vec<f64> {
    let mut y = r.to_vec();
    for _ in 0..300 {
        let wy = w.lag(&y);
        y = r.iter().zip(wy).map(|(a, b)| a + c * b).collect();
    }
    y
}

fn fixture_config(n_perm: usize) -> RunConfig {
    let dir = fixture_dir();
    RunConfig::from_file(ConfigFile {
        panel_path: Some(dir.join("panel.csv")),
        coords_path: Some(dir.join("coords.csv")),
        n_perm: Some(n_perm),
        ..ConfigFile::default()
    })
    .unwrap()
}

// criteria

fn published_decisions() -> Outcome {
    let p1 = Period { start: 1995, end: 1999 };
    let p2 = Period { start: 2000, end: 2005 };
    // (period, sector, LM_lag, robust LM_lag, LM_err, robust LM_err, narrated choice)
    let rows = [
        (p1, Sector::Agriculture, 0.416, 7.111, 8.774, 15.469, Choice::Error),
        (p1, Sector::Industry, 1.122, 2.317, 0.109, 1.304, Choice::Ols),
        (p1, Sector::Services, 4.749, 1.987, 3.607, 0.846, Choice::Lag),
        (p1, Sector::Total, 0.008, 0.087, 0.069, 0.149, Choice::Ols),
        (p2, Sector::Agriculture, 0.771, 0.030, 0.940, 0.198, Choice::Ols),
        (p2, Sector::Industry, 8.742, 4.366, 4.444, 0.068, Choice::Lag),
        (p2, Sector::Services, 5.976, 1.998, 4.102, 0.124, Choice::Lag),
        (p2, Sector::Total, 5.215, 1.146, 9.462, 5.393, Choice::Error),
    ];
    let mut got = Vec::new();
    for (period, sector, l, rl, e, re, want) in rows {
        let d = decide_lm(&LmTests::from_statistics(l, e, Some(rl), Some(re)), DEFAULT_ALPHA)
            .map_err(|e| e.to_string())?;
        if d.choice != want {
            return Err(format!("{sector} {period}: got {}, want {}", d.choice.label(), want.label()));
        }
        got.push(d.choice.label());
    }
    Ok(got.join(" "))
}

fn analytic_moran() -> Outcome {
    let ring = from_lists(&[vec![1, 3], vec![0, 2], vec![1, 3], vec![0, 2]]);
    let x = [1.0, -1.0, 1.0, -1.0];
    let i = morans_i(&x, &ring).map_err(|e| e.to_string())?.statistic;
    if (i + 1.0).abs() > 1e-12 {
        return Err(format!("ring I = {i}"));
    }
    let local = local_moran(&x, &ring).map_err(|e| e.to_string())?;
    if let Some(v) = local.i_local.iter().find(|v| (**v + 1.0).abs() > 1e-12) {
        return Err(format!("ring local I = {v}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(5..=40);
        let w = random_graph(&mut rng, n);
        let x: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
        let global = morans_i(&x, &w).map_err(|e| e.to_string())?.statistic;
        let sum: f64 = local_moran(&x, &w).map_err(|e| e.to_string())?.i_local.iter().sum();
        worst = worst.max((sum - n as f64 * global).abs());
    }
    if worst > 1e-8 {
        return Err(format!("max |sum I_i - n I| = {worst:.2e}"));
    }
    Ok(format!("ring exact; max |sum I_i - n I| = {worst:.1e} over 100 graphs"))
}

fn permutation_mean() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 28;
    let w = random_graph(&mut rng, n);
    let x: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
    let r = permutation_test(&x, &w, 9_999, 11).map_err(|e| e.to_string())?;
    let perm = r.perm.ok_or("no permutation inference")?;
    let se = perm.perm_sd / (perm.n_perm as f64).sqrt();
    let target = -1.0 / (n as f64 - 1.0);
    let k = (perm.perm_mean - target).abs() / se;
    let msg = format!("mean {:.6} vs {target:.6}, {k:.2} SE", perm.perm_mean);
    if k <= 3.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn lm_oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut worst, mut worst_identity): (f64, f64) = (0.0, 0.0);
    for _ in 0..200 {
        let n = rng.random_range(8..=40);
        let w = random_graph(&mut rng, n);
        let q: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
        let rho = rng.random_range(-0.5..0.8);
        let r: Vec<f64> = q.iter().map(|v| 0.3 + 0.6 * v + 0.5 * normal(&mut rng)).collect();
        let y = spatial_solve(&w, rho, &r);
        let t = lm_tests(&y, &intercept_design(&q), &w).map_err(|e| e.to_string())?;
        let (rl, re) = match (t.rlm_lag, t.rlm_err) {
            (Some(a), Some(b)) => (a.statistic, b.statistic),
            _ => return Err("robust statistics missing".into()),
        };
        let ours = [t.lm_lag.statistic, t.lm_err.statistic, rl, re];
        let oracle = lm_oracle(&y, &q, &w);
        for (a, b) in ours.iter().zip(&oracle) {
            worst = worst.max((a - b).abs());
        }
        worst_identity = worst_identity.max((ours[0] + ours[3] - ours[1] - ours[2]).abs());
    }
    let msg = format!("max |diff| {worst:.1e}, identity residual {worst_identity:.1e}");
    if worst <= 1e-10 && worst_identity <= 1e-8 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn log_determinant() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let n = rng.random_range(4..=30);
        let w = random_graph(&mut rng, n);
        let s = w.spectrum().map_err(|e| e.to_string())?;
        let (lo, hi) = s.bounds();
        let wd = dense(&w);
        for _ in 0..10 {
            let rho = lo + (hi - lo) * rng.random_range(0.01..0.99);
            let a: Mat = (0..n)
                .map(|i| (0..n).map(|j| f64::from(u8::from(i == j)) - rho * wd[i][j]).collect())
                .collect();
            let (log, sign) = lu_log_det(a);
            if sign < 0.0 {
                return Err(format!("negative determinant at rho = {rho}"));
            }
            worst = worst.max((s.log_det(rho) - log).abs());
        }
    }
    let msg = format!("max |diff| {worst:.1e} over 500 evaluations");
    if worst <= 1e-8 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn ml_recovery() -> Outcome {
    let w = rook_lattice(20);
    let n = w.n();
    let (mut rho, mut lambda, mut gamma_lag, mut gamma_err) = (0.0, 0.0, 0.0, 0.0);
    let mut nesting: f64 = 0.0;
    let seeds = 50;
    for seed in 0..seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(600 + seed);
        let q: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
        let x = intercept_design(&q);
        let ols_ll = |y: &[f64]| ols(y, &x).map(|f| f.loglik).map_err(|e| e.to_string());

        let r: Vec<f64> = q.iter().map(|v| 1.0 + 0.5 * v + 0.5 * normal(&mut rng)).collect();
        let y = spatial_solve(&w, 0.7, &r);
        let f = fit_lag(&y, &x, &w).map_err(|e| e.to_string())?;
        rho += f.spatial_coef.value;
        gamma_lag += f.gamma_hat();
        let l0 = LagLikelihood::new(&y, &x, &w).map_err(|e| e.to_string())?.loglik(0.0);
        nesting = nesting.max((l0 - ols_ll(&y)?).abs()).max((f.ols_loglik - ols_ll(&y)?).abs());

        let e: Vec<f64> = (0..n).map(|_| 0.5 * normal(&mut rng)).collect();
        let u = spatial_solve(&w, 0.6, &e);
        let y: Vec<f64> = q.iter().zip(&u).map(|(v, u)| 1.0 + 0.5 * v + u).collect();
        let f = fit_error(&y, &x, &w).map_err(|e| e.to_string())?;
        lambda += f.spatial_coef.value;
        gamma_err += f.gamma_hat();
        let l0 = ErrorLikelihood::new(&y, &x, &w)
            .and_then(|l| l.loglik(0.0))
            .map_err(|e| e.to_string())?;
        nesting = nesting.max((l0 - ols_ll(&y)?).abs()).max((f.ols_loglik - ols_ll(&y)?).abs());
    }
    let k = seeds as f64;
    let (rho, lambda, gamma_lag, gamma_err) = (rho / k, lambda / k, gamma_lag / k, gamma_err / k);
    let msg = format!(
        "mean rho {rho:.4}, lambda {lambda:.4}, gamma {gamma_lag:.4} (lag) {gamma_err:.4} (error); nesting {nesting:.1e}"
    );
    let inside = |v: f64, lo: f64, hi: f64| (lo..=hi).contains(&v);
    if inside(rho, 0.65, 0.75)
        && inside(lambda, 0.55, 0.65)
        && inside(gamma_lag, 0.45, 0.55)
        && inside(gamma_err, 0.45, 0.55)
        && nesting <= 1e-10
    {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn null_size() -> Outcome {
    let coords = verdoorn::fixture::coordinates();
    let ids: Vec<String> = coords.iter().map(|c| c.0.clone()).collect();
    let pts: Vec<Coordinate> = coords.iter().map(|c| c.1).collect();
    let w = SpatialWeights::build(&ids, &pts, 97.0).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let reps = 2_000;
    let (mut lag, mut err) = (0usize, 0usize);
    for _ in 0..reps {
        let q: Vec<f64> = (0..28).map(|_| normal(&mut rng)).collect();
        let y: Vec<f64> = q.iter().map(|v| 1.0 + 0.5 * v + normal(&mut rng)).collect();
        let t = lm_tests(&y, &intercept_design(&q), &w).map_err(|e| e.to_string())?;
        lag += usize::from(t.lm_lag.p_value < 0.05);
        err += usize::from(t.lm_err.p_value < 0.05);
    }
    let (a, b) = (lag as f64 / reps as f64, err as f64 / reps as f64);
    let msg = format!("rejection rates LM_lag {:.2}%, LM_err {:.2}%", 100.0 * a, 100.0 * b);
    if (0.03..=0.08).contains(&a) && (0.03..=0.08).contains(&b) {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn rendering() -> Outcome {
    let period = Period { start: 1995, end: 1999 };
    let coef = |value: f64, stat: f64, p: f64| CoefCell { value, stat, p };
    let ols_row = OlsRow {
        label: "Services".into(),
        constant: coef(0.017, 3.1, student_t_two_sided(3.1, 26.0)),
        coefficient: coef(0.854, 9.279, student_t_two_sided(9.279, 26.0)),
        jb: None,
        bp: None,
        kb: None,
        moran: None,
        lm_lag: None,
        rlm_lag: None,
        lm_err: None,
        rlm_err: None,
        r2: 0.759,
        n: 28,
    };
    let ml_row = MlRow {
        label: "Services (LAG)".into(),
        constant: coef(0.010, 1.2, normal_two_sided(1.2)),
        coefficient: coef(0.698, 4.665, normal_two_sided(4.665)),
        spatial: coef(0.545, 2.755, normal_two_sided(2.755)),
        bp: None,
        r2: 0.8,
        n: 28,
    };
    let ols_table = render_ols_table(period, std::slice::from_ref(&ols_row));
    let ml_table = render_ml_table(period, std::slice::from_ref(&ml_row));
    let cells = [
        (ols_row.cells()[1].clone(), "0.854* (9.279)", &ols_table),
        (ml_row.cells()[1].clone(), "0.698* (4.665)", &ml_table),
    ];
    for (cell, want, table) in &cells {
        if cell != want || !table.contains(want) {
            return Err(format!("rendered {cell:?}, want {want:?}"));
        }
    }
    Ok("\"0.854* (9.279)\" and \"0.698* (4.665)\"".into())
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let dir = fixture_dir();
    let run = |out: &Path| -> Result<Vec<u8>, String> {
        let status = Command::new(env!("CARGO_BIN_EXE_verdoorn"))
            .arg("pipeline")
            .arg("--panel")
            .arg(dir.join("panel.csv"))
            .arg("--coords")
            .arg(dir.join("coords.csv"))
            .arg("--out")
            .arg(out)
            .arg("--seed")
            .arg("17")
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(format!("pipeline exited with {}", status.status));
        }
        std::fs::read(out.join("report.json")).map_err(|e| e.to_string())
    };
    let a = run(&tmp.path().join("a"))?;
    let b = run(&tmp.path().join("b"))?;
    if a == b {
        Ok(format!("report.json identical ({} bytes)", a.len()))
    } else {
        Err("report.json differs between runs".into())
    }
}

fn sweep_flip() -> Outcome {
    let cfg = fixture_config(99);
    let panel = load_inputs(&cfg.panel_path, &cfg.coords_path).map_err(|e| e.to_string())?;
    let thresholds = [97.0, 200.0, 250.0, 300.0, 400.0, 600.0];
    let rows = sweep(&panel, &cfg, &thresholds).map_err(|e| e.to_string())?;
    let mut seen = Vec::new();
    for r in rows.iter().filter(|r| r.sector == Sector::Services) {
        let i = r.moran_i.ok_or("no Moran's I")?;
        let ok = if r.threshold <= 97.0 { i > 0.0 } else { i < 0.0 };
        if !ok {
            return Err(format!("services {} at {} km: I = {i:.4}", r.period, r.threshold));
        }
        if r.period.start == 1995 {
            seen.push(format!("{}:{i:+.3}", r.threshold));
        }
    }
    Ok(format!("services 1995-1999 {}", seen.join(" ")))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("specification-search replication", published_decisions, Some(Duration::from_secs(1))),
        ("analytic Moran cases", analytic_moran, Some(Duration::from_secs(1))),
        ("permutation mean", permutation_mean, Some(Duration::from_secs(10))),
        ("LM oracle equivalence", lm_oracle_equivalence, Some(Duration::from_secs(30))),
        ("log-determinant equivalence", log_determinant, Some(Duration::from_secs(10))),
        ("ML recovery", ml_recovery, Some(Duration::from_secs(300))),
        ("null size", null_size, Some(Duration::from_secs(120))),
        ("rendering fidelity", rendering, None),
        ("determinism", determinism, Some(Duration::from_secs(30))),
        ("threshold-sweep sign flip", sweep_flip, None),
    ];
    let mut failed = 0;
    for (k, (name, check, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let mut outcome = check();
        let elapsed = start.elapsed();
        if let (Ok(msg), Some(limit)) = (&outcome, limit) {
            if elapsed > *limit {
                outcome = Err(format!("{msg}; took {elapsed:.2?}, limit {limit:?}"));
            }
        }
        let (tag, msg) = match &outcome {
            Ok(m) => ("PASS", m),
            Err(m) => {
                failed += 1;
                ("FAIL", m)
            }
        };
        println!("criterion {:>2} {tag}: {name}: {msg} [{elapsed:.2?}]", k + 1);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
