use serde_json::{json, Map, Value};

use matfreedman::bounds::{
    bennett_tail_bound, freedman_tail_bound, invert_freedman_for_t, optimize_theta,
    rectangular_freedman_bound, BoundResult, CgfBoundFn, TailQuery,
};
use matfreedman::martingale::{
    builtin_kernel, parse_kernel_file, simulate_stream, FiniteKernel, StreamSeed, BUILTIN_KERNELS,
};
use matfreedman::symmat::lambda_max;
use matfreedman::verify::{
    bound_vs_empirical_sweep, certify_h_inequality, certify_lieb_suite, certify_mgf_suite,
    certify_supermartingale_suite, SuiteReport, SweepRow, CONFIDENCE, DEFAULT_MGF_THETAS,
    DEFAULT_SUPERMARTINGALE_THETAS, H_GRID_POINTS,
};

use crate::output::{Cell, Document, Table};
use crate::{
    BoundArgs, BoundKind, CertifyArgs, CgfChoice, Command, InvertArgs, KernelArgs, Outcome,
    SimulateArgs, Suite, SweepArgs,
};

const HORIZON_NOTE: &str = "finite horizon K: the estimated event is nondecreasing in K, so \
                            estimates lower-bound the probability over all k >= 0";

pub fn run(command: &Command, argv: &[String]) -> Result<Outcome, String> {
    let (name, seed) = match command {
        Command::Bound(_) => ("bound", None),
        Command::Invert(_) => ("invert", None),
        Command::Simulate(a) => ("simulate", a.seed),
        Command::VerifyTail(a) => ("verify-tail", a.seed),
        Command::Sweep(a) => ("sweep", a.seed),
        Command::Certify(a) => ("certify", a.seed),
    };
    let mut meta = Map::new();
    meta.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    meta.insert("seed".into(), seed.map_or(Value::Null, |s| json!(s)));
    meta.insert("command".into(), json!({ "name": name, "argv": argv }));

    let (table, ok) = match command {
        Command::Bound(a) => (bound(a)?, true),
        Command::Invert(a) => (invert(a)?, true),
        Command::Simulate(a) => (simulate(a, &mut meta)?, true),
        Command::VerifyTail(a) => {
            let seed = require_seed(a.seed)?;
            tail_rows(&a.kernel, &[a.t], a.sigma2, a.trials, seed, &mut meta)?
        }
        Command::Sweep(a) => sweep(a, &mut meta)?,
        Command::Certify(a) => certify(a, &mut meta)?,
    };
    Ok(Outcome {
        document: Document { meta, table },
        ok,
    })
}

fn require_seed(seed: Option<u64>) -> Result<u64, String> {
    seed.ok_or_else(|| "--seed is required for commands that use randomness".to_string())
}

fn require<T: Copy>(value: Option<T>, flag: &str, kind: &str) -> Result<T, String> {
    value.ok_or_else(|| format!("{flag} is required for --kind {kind}"))
}

fn bound(a: &BoundArgs) -> Result<Table, String> {
    let mut table = Table::new([
        "kind",
        "t",
        "sigma2",
        "R",
        "d",
        "d1",
        "d2",
        "value",
        "raw",
        "theta_star",
        "clipped",
    ]);
    let (kind, d, d1, d2, result): (
        &str,
        Option<usize>,
        Option<usize>,
        Option<usize>,
        BoundResult,
    ) = match a.kind {
        BoundKind::Freedman | BoundKind::Bennett => {
            let kind = if a.kind == BoundKind::Freedman {
                "freedman"
            } else {
                "bennett"
            };
            let d = require(a.d, "-d", kind)?;
            let q = TailQuery::new(a.t, a.sigma2, a.r, d).map_err(|e| e.to_string())?;
            let r = if a.kind == BoundKind::Freedman {
                freedman_tail_bound(&q)
            } else {
                bennett_tail_bound(&q)
            };
            (kind, Some(d), None, None, r)
        }
        BoundKind::Rectangular => {
            let d1 = require(a.d1, "--d1", "rectangular")?;
            let d2 = require(a.d2, "--d2", "rectangular")?;
            let r = rectangular_freedman_bound(a.t, a.sigma2, a.r, d1, d2)
                .map_err(|e| e.to_string())?;
            ("rectangular", None, Some(d1), Some(d2), r)
        }
        BoundKind::Master => {
            let d = require(a.d, "-d", "master")?;
            let g = match a.cgf {
                CgfChoice::Freedman => {
                    if !(a.r.is_finite() && a.r > 0.0) {
                        return Err(format!("invalid R = {}: must be finite and > 0", a.r));
                    }
                    CgfBoundFn::freedman_scaled(a.r)
                }
                CgfChoice::SubGaussian => CgfBoundFn::sub_gaussian(),
            };
            let r = optimize_theta(a.t, a.sigma2, &g, d).map_err(|e| e.to_string())?;
            ("master", Some(d), None, None, r)
        }
    };
    table.push(vec![
        kind.into(),
        a.t.into(),
        a.sigma2.into(),
        a.r.into(),
        d.map_or(Cell::Null, Cell::from),
        d1.map_or(Cell::Null, Cell::from),
        d2.map_or(Cell::Null, Cell::from),
        result.reported().into(),
        result.value.into(),
        result.theta_star.into(),
        result.clipped.into(),
    ]);
    Ok(table)
}

fn invert(a: &InvertArgs) -> Result<Table, String> {
    let t = invert_freedman_for_t(a.delta, a.sigma2, a.r, a.d).map_err(|e| e.to_string())?;
    let mut table = Table::new(["delta", "sigma2", "R", "d", "t"]);
    table.push(vec![
        a.delta.into(),
        a.sigma2.into(),
        a.r.into(),
        a.d.into(),
        t.into(),
    ]);
    Ok(table)
}

/// Resolves `--kernel` to a built-in or a kernel file, and the step count.
fn load_kernel(args: &KernelArgs) -> Result<(FiniteKernel, usize), String> {
    load_kernel_parts(&args.kernel, args.k)
}

fn load_kernel_parts(name: &str, k: Option<usize>) -> Result<(FiniteKernel, usize), String> {
    if BUILTIN_KERNELS.contains(&name) {
        let k = k.ok_or_else(|| format!("--K is required for the built-in kernel '{name}'"))?;
        let kernel = builtin_kernel(name, k).map_err(|e| e.to_string())?;
        return Ok((kernel, k));
    }
    let text = std::fs::read_to_string(name)
        .map_err(|e| format!("cannot read kernel file '{name}': {e}"))?;
    let kernel = parse_kernel_file(&text).map_err(|e| format!("{name}: {e}"))?;
    let k = k.unwrap_or(kernel.horizon());
    if k > kernel.horizon() {
        return Err(format!(
            "--K {k} exceeds the kernel file horizon {}",
            kernel.horizon()
        ));
    }
    Ok((kernel, k))
}

fn kernel_meta(meta: &mut Map<String, Value>, kernel: &FiniteKernel, steps: usize) {
    meta.insert(
        "kernel".into(),
        json!({
            "description": kernel.description(),
            "d": kernel.dim(),
            "K": steps,
            "R": Cell::from(kernel.difference_bound()).json(),
        }),
    );
}

fn simulate(a: &SimulateArgs, meta: &mut Map<String, Value>) -> Result<Table, String> {
    let seed = require_seed(a.seed)?;
    let (kernel, steps) = load_kernel(&a.kernel)?;
    let traj = simulate_stream(&kernel, steps, &a.theta, StreamSeed::new(seed, a.stream))
        .map_err(|e| e.to_string())?;
    kernel_meta(meta, &kernel, steps);
    meta.insert("stream".into(), json!(a.stream));
    meta.insert("cgf".into(), json!(traj.cgf_label));

    let mut columns: Vec<String> = ["k", "state", "lambda_max_y", "lambda_max_w"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    columns.extend(a.theta.iter().map(|th| format!("s_theta_{th}")));
    let mut table = Table::new(columns);
    for (k, rec) in traj.steps.iter().enumerate() {
        let mut row = vec![
            k.into(),
            kernel.state_label(rec.state).unwrap_or_default().into(),
            lambda_max(&rec.y).map_err(|e| e.to_string())?.into(),
            lambda_max(&rec.w).map_err(|e| e.to_string())?.into(),
        ];
        row.extend(rec.s.iter().map(|&s| Cell::from(s)));
        table.push(row);
    }
    Ok(table)
}

fn tail_rows(
    kernel_args: &KernelArgs,
    t_grid: &[f64],
    sigma2: f64,
    trials: u64,
    seed: u64,
    meta: &mut Map<String, Value>,
) -> Result<(Table, bool), String> {
    let (kernel, steps) = load_kernel(kernel_args)?;
    let rows = bound_vs_empirical_sweep(&kernel, steps, t_grid, sigma2, trials, seed)
        .map_err(|e| e.to_string())?;
    kernel_meta(meta, &kernel, steps);
    meta.insert("confidence".into(), Cell::from(CONFIDENCE).json());
    meta.insert("note".into(), json!(HORIZON_NOTE));

    let mut table = Table::new([
        "t", "sigma2", "K", "trials", "hits", "p_hat", "ci_low", "ci_high", "freedman", "bennett",
        "ok",
    ]);
    let mut ok = true;
    for SweepRow {
        estimate: e,
        freedman,
        bennett,
        ok: row_ok,
    } in rows
    {
        if !row_ok {
            log::warn!(
                "t = {}: lower confidence limit {} exceeds the bound {}",
                e.t,
                e.ci_low,
                freedman.min(bennett).min(1.0)
            );
        }
        ok &= row_ok;
        table.push(vec![
            e.t.into(),
            e.sigma2.into(),
            e.steps.into(),
            e.trials.into(),
            e.hits.into(),
            e.p_hat.into(),
            e.ci_low.into(),
            e.ci_high.into(),
            freedman.into(),
            bennett.into(),
            row_ok.into(),
        ]);
    }
    Ok((table, ok))
}

fn sweep(a: &SweepArgs, meta: &mut Map<String, Value>) -> Result<(Table, bool), String> {
    let seed = require_seed(a.seed)?;
    tail_rows(&a.kernel, &a.t_grid, a.sigma2, a.trials, seed, meta)
}

fn certify(a: &CertifyArgs, meta: &mut Map<String, Value>) -> Result<(Table, bool), String> {
    let suites: &[Suite] = match a.suite {
        Suite::All => &[
            Suite::Lieb,
            Suite::Mgf,
            Suite::Supermartingale,
            Suite::HInequality,
        ],
        ref one => std::slice::from_ref(one),
    };
    let seeded = || -> Result<u64, String> {
        if a.instances == 0 {
            // no randomness is drawn
            return Ok(a.seed.unwrap_or(0));
        }
        require_seed(a.seed)
    };

    let mut reports: Vec<SuiteReport> = Vec::new();
    for suite in suites {
        let report = match suite {
            Suite::Lieb => certify_lieb_suite(a.instances, seeded()?),
            Suite::Mgf => certify_mgf_suite(a.instances, seeded()?, &DEFAULT_MGF_THETAS),
            Suite::Supermartingale => {
                let kernels = match &a.kernel {
                    Some(name) => vec![load_kernel_parts(name, a.k)?.0],
                    None => vec![
                        builtin_kernel("walk1d", 10).map_err(|e| e.to_string())?,
                        builtin_kernel("rademacher2d", 6).map_err(|e| e.to_string())?,
                        builtin_kernel("statewalk", 8).map_err(|e| e.to_string())?,
                    ],
                };
                certify_supermartingale_suite(&kernels, &DEFAULT_SUPERMARTINGALE_THETAS)
            }
            Suite::HInequality => Ok(certify_h_inequality(H_GRID_POINTS)),
            Suite::All => unreachable!("expanded above"),
        }
        .map_err(|e| e.to_string())?;
        if report.reports.is_empty() {
            log::warn!("suite {} has no instances: vacuous pass", report.suite);
        }
        reports.push(report);
    }

    let mut table = Table::new([
        "suite",
        "instance",
        "description",
        "margin",
        "tolerance",
        "pass",
    ]);
    let mut summary = Vec::new();
    for report in &reports {
        for (i, r) in report.reports.iter().enumerate() {
            table.push(vec![
                report.suite.as_str().into(),
                i.into(),
                r.description.as_str().into(),
                r.margin.into(),
                r.tolerance.into(),
                r.pass.into(),
            ]);
        }
        eprintln!(
            "{}: {} instances, min margin {}, {}",
            report.suite,
            report.reports.len(),
            crate::output::format_float(report.min_margin()),
            if report.pass() { "pass" } else { "FAIL" }
        );
        summary.push(json!({
            "suite": report.suite,
            "instances": report.reports.len(),
            "min_margin": Cell::from(report.min_margin()).json(),
            "pass": report.pass(),
        }));
    }
    meta.insert("summary".into(), Value::Array(summary));
    Ok((table, reports.iter().all(SuiteReport::pass)))
}
