use clusterkr::{
    cv_select, default_grid, density, fit, make_bands, reference_h, rot, undersmooth, BandConfig,
    BandwidthMethod, BandwidthReport, ClusteredDataset, ColumnSchema, CovMethod, CvMode, Error,
    Estimator, InferenceBand, KernelName, KernelSpec, Result, WeightWindow,
};
use clusterkr_sim::{
    run_ase_table, run_coverage_table, run_cv_decomposition, AseConfig, BiasMode, CiVariant,
    CoverageConfig, DecompositionConfig, DgpConfig, FailurePolicy, Setup,
};
use serde::Serialize;
use serde_json::json;

use crate::args::{
    BandwidthArgs, Cli, Command, CovArg, DataArgs, DensityArgs, Experiment, FitArgs, Format,
    InferArgs, PointArgs, SimulateArgs, WindowArgs,
};
use crate::output::{emit_plot_data, fmt_num, svg_chart, Cell, Table};

pub fn dispatch(cli: &Cli) -> Result<String> {
    match &cli.command {
        Command::Density(a) => density_cmd(a, cli.format),
        Command::Fit(a) => fit_cmd(a, cli.format),
        Command::Bandwidth(a) => bandwidth_cmd(a, cli.format),
        Command::Infer(a) => infer_cmd(a, cli.format),
        Command::Simulate(a) => simulate_cmd(a, cli.format),
    }
}

fn render(t: &Table, format: Format) -> String {
    match format {
        Format::Csv => t.to_csv(),
        Format::Json => format!("{:#}\n", t.to_json()),
    }
}

fn usage(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

fn kernel(name: &str) -> Result<KernelSpec> {
    Ok(KernelSpec::new(name.parse::<KernelName>()?))
}

fn load(a: &DataArgs, y_col: &str) -> Result<ClusteredDataset> {
    let schema = ColumnSchema {
        cluster_col: a.cluster_col.clone(),
        y_col: y_col.to_string(),
        x_cols: a.x_cols.clone(),
        cluster_level_cols: a.cluster_level_cols.clone(),
    };
    ClusteredDataset::load_csv(&a.data, &schema)
        .map_err(|e| e.context(format!("reading {}", a.data.display())))
}

fn x_columns(a: &DataArgs) -> Vec<String> {
    a.x_cols.iter().chain(&a.cluster_level_cols).cloned().collect()
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| usage(format!("{what}: cannot read '{s}' as a number")))
}

fn coordinate_ranges(ds: &ClusteredDataset) -> (Vec<f64>, Vec<f64>) {
    let d = ds.d();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for r in ds.rows() {
        for q in 0..d {
            lo[q] = lo[q].min(r[q]);
            hi[q] = hi[q].max(r[q]);
        }
    }
    (lo, hi)
}

/// Evaluation points from `--grid`, `--at` or `--at-data`; a 50-point grid
/// over the data range when none is given and there is one regressor.
fn points(p: &PointArgs, ds: &ClusteredDataset) -> Result<Vec<Vec<f64>>> {
    let d = ds.d();
    if let Some(g) = &p.grid {
        if d != 1 {
            return Err(usage("--grid needs a single regressor; use --at or --at-data"));
        }
        let parts: Vec<&str> = g.split(':').collect();
        if parts.len() != 3 {
            return Err(usage(format!("--grid expects lo:hi:n, got '{g}'")));
        }
        let lo = parse_f64(parts[0], "--grid")?;
        let hi = parse_f64(parts[1], "--grid")?;
        let n: usize = parts[2]
            .trim()
            .parse()
            .map_err(|_| usage(format!("--grid: bad point count '{}'", parts[2])))?;
        return linspace(lo, hi, n).map(|v| v.into_iter().map(|x| vec![x]).collect());
    }
    if let Some(at) = &p.at {
        let pts = at
            .split(';')
            .filter(|s| !s.trim().is_empty())
            .map(|pt| {
                let v = pt
                    .split(',')
                    .map(|c| parse_f64(c, "--at"))
                    .collect::<Result<Vec<f64>>>()?;
                if v.len() != d {
                    return Err(Error::DimensionMismatch { expected: d, got: v.len() });
                }
                Ok(v)
            })
            .collect::<Result<Vec<_>>>()?;
        if pts.is_empty() {
            return Err(Error::Validation("--at lists no points".into()));
        }
        return Ok(pts);
    }
    if p.at_data || d != 1 {
        return Ok(ds.rows().map(|r| r.to_vec()).collect());
    }
    let (lo, hi) = coordinate_ranges(ds);
    linspace(lo[0], hi[0], 50).map(|v| v.into_iter().map(|x| vec![x]).collect())
}

fn linspace(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo.is_finite() && hi.is_finite()) || hi < lo {
        return Err(usage(format!("grid bounds must satisfy lo <= hi, got {lo} and {hi}")));
    }
    match n {
        0 => Err(Error::Validation("grid has no points".into())),
        1 => Ok(vec![lo]),
        _ => Ok((0..n)
            .map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
            .collect()),
    }
}

fn window(w: &WindowArgs, ds: &ClusteredDataset) -> Result<WeightWindow> {
    let (mut lo, mut hi) = coordinate_ranges(ds);
    if !w.weight_lo.is_empty() {
        lo = w.weight_lo.clone();
    }
    if !w.weight_hi.is_empty() {
        hi = w.weight_hi.clone();
    }
    WeightWindow::new(lo, hi)
}

fn span(w: &WindowArgs) -> (f64, f64) {
    (w.grid_span[0], w.grid_span[1])
}

/// Cross-validation on a grid centred at `center` (the CR-ROT bandwidth when
/// `None`).
fn cv(
    ds: &ClusteredDataset,
    k: &KernelSpec,
    est: Estimator,
    w: &WindowArgs,
    center: Option<f64>,
    mode: CvMode,
) -> Result<BandwidthReport> {
    let win = window(w, ds)?;
    let center = match center {
        Some(c) => c,
        None => {
            if ds.d() != 1 {
                return Err(usage(
                    "automatic bandwidths need a single regressor; pass a numeric bandwidth or --grid-center",
                ));
            }
            rot(ds, k, &win, true)?.h
        }
    };
    let grid = default_grid(center, w.grid_n, span(w))?;
    cv_select(ds, k, est, &win, mode, &grid)
}

fn report_warnings(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn density_cmd(a: &DensityArgs, format: Format) -> Result<String> {
    let ds = load(&a.data, "")?;
    let k = kernel(&a.data.kernel)?;
    let h = match a.h.as_str() {
        "reference" => reference_h(&ds)?,
        s => parse_f64(s, "--h")?,
    };
    eprintln!("h = {}", fmt_num(h));
    let mut cols = x_columns(&a.data);
    cols.push("fhat".into());
    let mut t = Table::new(cols);
    for x in points(&a.points, &ds)? {
        let f = density(&ds, &k, h, &x)?;
        let mut row: Vec<Cell> = x.iter().map(|&v| Cell::Num(v)).collect();
        row.push(Cell::Num(f.value));
        t.push(row);
    }
    Ok(render(&t, format))
}

fn fit_cmd(a: &FitArgs, format: Format) -> Result<String> {
    let ds = load(&a.data, &a.y_col)?;
    let k = kernel(&a.data.kernel)?;
    let est: Estimator = a.estimator.parse()?;
    let h = match a.h.as_str() {
        "auto" => {
            let r = cv(&ds, &k, est, &a.window, None, CvMode::LeaveOneClusterOut)?;
            report_warnings(&r.warnings);
            r.h
        }
        s => parse_f64(s, "--h")?,
    };
    eprintln!("h = {}", fmt_num(h));
    let mut cols = x_columns(&a.data);
    cols.extend(["mhat".into(), "n_effective".into()]);
    let mut t = Table::new(cols);
    let mut fallbacks = 0;
    for x in points(&a.points, &ds)? {
        let f = fit(&ds, &k, est, h, &x).map_err(|e| e.context(format!("fit at x = {x:?}")))?;
        fallbacks += usize::from(f.nw_fallback);
        let mut row: Vec<Cell> = x.iter().map(|&v| Cell::Num(v)).collect();
        row.push(Cell::Num(f.estimate));
        row.push(Cell::Int(f.n_effective as u64));
        t.push(row);
    }
    if fallbacks > 0 {
        eprintln!("warning: {fallbacks} point(s) used the local constant fit because the local linear system was singular");
    }
    Ok(render(&t, format))
}

fn bandwidth_cmd(a: &BandwidthArgs, format: Format) -> Result<String> {
    let ds = load(&a.data, &a.y_col)?;
    let k = kernel(&a.data.kernel)?;
    let est: Estimator = a.estimator.parse()?;
    let method: BandwidthMethod = a.method.parse()?;
    let report = match method {
        BandwidthMethod::Rot | BandwidthMethod::CrRot => {
            rot(&ds, &k, &window(&a.window, &ds)?, method == BandwidthMethod::CrRot)?
        }
        BandwidthMethod::CrCv => cv(&ds, &k, est, &a.window, a.grid_center, CvMode::LeaveOneClusterOut)?,
        BandwidthMethod::Cv => cv(&ds, &k, est, &a.window, a.grid_center, CvMode::LeaveOneOut)?,
        BandwidthMethod::Reference => BandwidthReport {
            method,
            h: reference_h(&ds)?,
            trace: Vec::new(),
            components: None,
            warnings: Vec::new(),
        },
        BandwidthMethod::Aimse => {
            return Err(usage("the aimse method needs supplied constants; use the library function"))
        }
    };
    let mut summary = format!("method = {} h = {}", report.method, fmt_num(report.h));
    if let Some((b, s2)) = report.components {
        summary.push_str(&format!(" B = {} sigma2 = {}", fmt_num(b), fmt_num(s2)));
    }
    eprintln!("{summary}");
    report_warnings(&report.warnings);
    if format == Format::Json {
        let trace: Vec<_> = report
            .trace
            .iter()
            .map(|(h, c)| json!({"h": h, "criterion": c.filter(|v| v.is_finite())}))
            .collect();
        let v = json!({
            "method": report.method.as_str(),
            "h": report.h,
            "components": report.components.map(|(b, s)| json!({"B": b, "sigma2": s})),
            "trace": trace,
            "warnings": report.warnings,
        });
        return Ok(format!("{v:#}\n"));
    }
    let mut t = Table::new(["h", "criterion", "selected"]);
    if report.trace.is_empty() {
        t.push(vec![Cell::Num(report.h), Cell::Text("NA".into()), Cell::Int(1)]);
    }
    for &(h, c) in &report.trace {
        t.push(vec![
            Cell::Num(h),
            c.map_or(Cell::Text("NA".into()), Cell::Num),
            Cell::Int(u64::from(h == report.h)),
        ]);
    }
    Ok(t.to_csv())
}

fn infer_cmd(a: &InferArgs, format: Format) -> Result<String> {
    let ds = load(&a.data, &a.y_col)?;
    let k = kernel(&a.data.kernel)?;
    let est: Estimator = a.estimator.parse()?;
    let mut h_m = match a.h_m.as_str() {
        "auto" => {
            let r = cv(&ds, &k, est, &a.window, None, CvMode::LeaveOneClusterOut)?;
            report_warnings(&r.warnings);
            r.h
        }
        s => parse_f64(s, "--h-m")?,
    };
    if a.undersmooth {
        h_m = undersmooth(h_m, ds.n())?;
    }
    let h_f = match a.h_f.as_str() {
        "reference" => reference_h(&ds)?,
        s => parse_f64(s, "--h-f")?,
    };
    let cfg = BandConfig {
        kernel: k,
        estimator: est,
        h_m,
        h_f,
        h_sigma2: a.h_sigma2.unwrap_or(h_f),
        alpha: a.alpha,
        cov_method: match a.cov_method {
            CovArg::Parametric => CovMethod::Parametric,
            CovArg::Nonparametric => CovMethod::Nonparametric { b: a.cov_b },
        },
    };
    let pts = points(&a.points, &ds)?;
    let bands = make_bands(&ds, &cfg, &pts)?;
    eprintln!(
        "h_m = {} h_f = {} h_sigma2 = {}",
        fmt_num(cfg.h_m),
        fmt_num(cfg.h_f),
        fmt_num(cfg.h_sigma2)
    );
    if let Some(b) = bands.first() {
        eprintln!("lambda = {}", fmt_num(b.lambda));
    }
    for b in &bands {
        report_warnings(&b.warnings);
    }
    if let Some(path) = &a.plot_data {
        std::fs::write(path, emit_plot_data(&bands)?)?;
    }
    if let Some(path) = &a.svg {
        std::fs::write(path, svg_chart(&bands)?)?;
    }
    Ok(render(&band_table(&bands, &x_columns(&a.data)), format))
}

fn band_table(bands: &[InferenceBand], xcols: &[String]) -> Table {
    let mut cols = xcols.to_vec();
    cols.extend(
        [
            "mhat", "se_iid", "se_cr", "se_lambda", "ci_iid_lo", "ci_iid_hi", "ci_cr_lo",
            "ci_cr_hi", "ci_lambda_lo", "ci_lambda_hi", "warnings",
        ]
        .map(String::from),
    );
    let mut t = Table::new(cols);
    for b in bands {
        let mut row: Vec<Cell> = b.x.iter().map(|&v| Cell::Num(v)).collect();
        row.extend(
            [
                b.estimate,
                b.se_iid,
                b.se_cr,
                b.se_lambda,
                b.ci_iid.lo,
                b.ci_iid.hi,
                b.ci_cr.lo,
                b.ci_cr.hi,
                b.ci_lambda.lo,
                b.ci_lambda.hi,
            ]
            .map(Cell::Num),
        );
        row.push(Cell::Text(b.warnings.join("; ")));
        t.push(row);
    }
    t
}

#[derive(Serialize)]
struct SimCell<T: Serialize> {
    rho_x: f64,
    rho_e: f64,
    result: T,
}

fn simulate_cmd(a: &SimulateArgs, format: Format) -> Result<String> {
    let setup: Setup = a.setup.parse()?;
    let k = kernel(&a.kernel)?;
    let est: Estimator = a.estimator.parse()?;
    let policy = if a.skip_failures {
        FailurePolicy::Skip
    } else {
        FailurePolicy::Abort
    };
    let cells: Vec<(f64, f64)> = a
        .rho_x
        .iter()
        .flat_map(|&rx| a.rho_e.iter().map(move |&re| (rx, re)))
        .collect();
    let dgp = |rho_x: f64, rho_e: f64| DgpConfig {
        setup,
        clusters: a.clusters,
        ng_base: a.ng,
        ng_last: a.ng_last.unwrap_or(a.ng),
        rho_x,
        rho_e,
        seed: a.seed,
    };
    let mut json_cells = Vec::new();
    let table = match a.experiment {
        Experiment::Ase => {
            let methods = a
                .methods
                .iter()
                .map(|m| m.parse::<BandwidthMethod>())
                .collect::<Result<Vec<_>>>()?;
            let mut cols = vec!["rho_x".to_string(), "rho_e".to_string()];
            for m in &methods {
                for s in ["ase", "ase_se", "h", "h_se"] {
                    cols.push(format!("{m}_{s}"));
                }
            }
            cols.extend(["reps".into(), "failures".into()]);
            let mut t = Table::new(cols);
            for &(rx, re) in &cells {
                let cfg = AseConfig {
                    methods: methods.clone(),
                    estimator: est,
                    kernel: k,
                    cv_grid_n: a.grid_n,
                    policy,
                    ..AseConfig::new(dgp(rx, re), a.reps)
                };
                let recs = run_ase_table(&cfg)?;
                let mut row = vec![Cell::Num(rx), Cell::Num(re)];
                for r in &recs {
                    row.extend([r.mean_ase, r.se_ase, r.mean_h, r.se_h].map(Cell::Num));
                }
                row.push(Cell::Int(recs[0].reps as u64));
                row.push(Cell::Int(recs[0].failures as u64));
                t.push(row);
                json_cells.push(serde_json::to_value(SimCell { rho_x: rx, rho_e: re, result: recs }).expect("plain data"));
            }
            t
        }
        Experiment::Coverage => {
            let variants = a
                .variants
                .iter()
                .map(|v| v.parse::<CiVariant>())
                .collect::<Result<Vec<_>>>()?;
            let bias_mode: BiasMode = a.bias_mode.parse()?;
            let mut cols = vec!["rho_x".to_string(), "rho_e".to_string(), "x_eval".to_string()];
            for v in &variants {
                for s in ["coverage", "coverage_se", "length", "length_se"] {
                    cols.push(format!("{v}_{s}"));
                }
            }
            cols.extend(["mean_h_m".into(), "reps".into(), "failures".into()]);
            let mut t = Table::new(cols);
            for &(rx, re) in &cells {
                let cfg = CoverageConfig {
                    variants: variants.clone(),
                    estimator: est,
                    kernel: k,
                    alpha: a.alpha,
                    bias_mode,
                    cov_method: match a.cov_method {
                        CovArg::Parametric => CovMethod::Parametric,
                        CovArg::Nonparametric => CovMethod::Nonparametric { b: None },
                    },
                    cv_grid_n: a.grid_n,
                    policy,
                    ..CoverageConfig::new(dgp(rx, re), a.x_eval, a.reps)
                };
                let recs = run_coverage_table(&cfg)?;
                let mut row = vec![Cell::Num(rx), Cell::Num(re), Cell::Num(a.x_eval)];
                for r in &recs {
                    row.extend([r.coverage, r.se_coverage, r.mean_length, r.se_length].map(Cell::Num));
                }
                row.push(Cell::Num(recs[0].mean_h_m));
                row.push(Cell::Int(recs[0].reps as u64));
                row.push(Cell::Int(recs[0].failures as u64));
                t.push(row);
                json_cells.push(serde_json::to_value(SimCell { rho_x: rx, rho_e: re, result: recs }).expect("plain data"));
            }
            t
        }
        Experiment::CvDecomposition => {
            let mut t = Table::new([
                "rho_x", "rho_e", "h", "mean_cv", "se_cv", "sigma2_w", "imse", "se_imse",
                "difference", "se_difference", "reps", "failures",
            ]);
            for &(rx, re) in &cells {
                let cfg = DecompositionConfig {
                    estimator: est,
                    kernel: k,
                    policy,
                    ..DecompositionConfig::new(dgp(rx, re), a.h, a.reps)
                };
                let r = run_cv_decomposition(&cfg)?;
                let mut row = vec![Cell::Num(rx), Cell::Num(re)];
                row.extend(
                    [r.h, r.mean_cv, r.se_cv, r.sigma2_w, r.imse, r.se_imse, r.difference, r.se_difference]
                        .map(Cell::Num),
                );
                row.push(Cell::Int(r.reps as u64));
                row.push(Cell::Int(r.failures as u64));
                t.push(row);
                json_cells.push(serde_json::to_value(SimCell { rho_x: rx, rho_e: re, result: r }).expect("plain data"));
            }
            t
        }
    };
    Ok(match format {
        Format::Csv => table.to_csv(),
        Format::Json => format!("{:#}\n", serde_json::Value::Array(json_cells)),
    })
}
