use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use vitcube_core::attention::{
    attention_macs, mha_reference, separable_attention, AttentionKind, MhaWeights, SeparableAttentionWeights,
    TokenMatrix,
};
use vitcube_core::cost_model::{layer_costs, resolve_arch_with, ArchFactors, Factor};
use vitcube_core::downsizer::{fit_rule, recommend_with, EfficiencyRule, Recommendation, C_DOMAIN};
use vitcube_core::gp::{argmax_posterior, fit_with_report, linspace, predict_grid, FitReport, GpDataset, GpModel};
use vitcube_core::linalg::Matrix;
use vitcube_core::pareto::{apply_constraints, nondominated_sort, select_top, ModelRecord, SelectConfig};

use crate::cli::{
    AttnBenchArgs, Command, FitGpArgs, FitRuleArgs, GridArgs, Invocation, MacsArgs, ParetoArgs, RecommendArgs,
};
use crate::config::{Base, RunConfig};
use crate::error::{CliError, CoreContext};
use crate::export::{csv_bytes, fmt_f64, matrix_csv};
use crate::manifest::RunDir;
use crate::observations::{read_observations, write_observations, AccuracyUnit, Observations};

struct Ctx<'a> {
    config: &'a RunConfig,
    run: RunDir,
}

impl Ctx<'_> {
    fn observations(&mut self, path: &Path) -> Result<Observations, CliError> {
        let data = self.run.read_input(path)?;
        read_observations(&data[..]).map_err(|e| match e {
            CliError::Data(m) => CliError::file(path, m),
            other => other,
        })
    }

    fn base(&mut self) -> Result<Base, CliError> {
        let base = Base::load(self.config.base_table.as_deref())?;
        if let Some(p) = &base.source {
            let data = std::fs::read(p).map_err(|e| CliError::file(p, e))?;
            self.run.note_input(p, &data);
        }
        Ok(base)
    }

    fn m0(&mut self, flag: Option<f64>) -> Result<f64, CliError> {
        match flag {
            Some(m0) if m0 > 0.0 && m0.is_finite() => Ok(m0),
            Some(m0) => Err(CliError::Usage(format!("--m0 must be positive, got {m0}"))),
            None => Ok(self.base()?.baseline_macs(self.config.snap)? as f64),
        }
    }
}

pub fn dispatch(inv: Invocation) -> Result<(), CliError> {
    let Invocation { cli, config, config_path, out, arguments } = inv;
    let mut ctx = Ctx { config: &config, run: RunDir::create(&out)? };
    if let Some(p) = &config_path {
        let data = std::fs::read(p).map_err(|e| CliError::file(p, e))?;
        ctx.run.note_input(p, &data);
    }
    match &cli.command {
        Command::Macs(a) => macs(&mut ctx, a)?,
        Command::FitGp(a) => fit_gp(&mut ctx, a)?,
        Command::Grid(a) => grid(&mut ctx, a)?,
        Command::Pareto(a) => pareto(&mut ctx, a)?,
        Command::FitRule(a) => fit_rule_cmd(&mut ctx, a)?,
        Command::Recommend(a) => recommend(&mut ctx, a)?,
        Command::AttnBench(a) => attn_bench(&mut ctx, a)?,
    }
    let manifest = ctx.run.finish(cli.command.name(), &arguments, &config)?;
    println!("wrote {}", manifest.display());
    Ok(())
}

fn factor_arg(name: &str) -> Result<Factor, CliError> {
    Factor::from_name(name)
        .ok_or_else(|| CliError::Usage(format!("unknown factor {name:?} (expected r, d_i, d_m or w)")))
}

fn range_arg(flag: &str, given: &Option<Vec<f64>>, observed: (f64, f64)) -> Result<(f64, f64), CliError> {
    let (lo, hi) = match given {
        Some(v) => (v[0], v[1]),
        None => observed,
    };
    if !(lo < hi && lo.is_finite() && hi.is_finite()) {
        let source = if given.is_some() { "--" } else { "observed " };
        return Err(CliError::Usage(format!("{source}{flag} must be an increasing finite pair, got {lo},{hi}")));
    }
    Ok((lo, hi))
}

fn min_max(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

fn unit_name(unit: AccuracyUnit) -> &'static str {
    match unit {
        AccuracyUnit::Fraction => "fraction",
        AccuracyUnit::Percent => "percent",
    }
}

#[derive(Serialize)]
struct ModelArtifact<'a> {
    inputs: Vec<&'static str>,
    target: &'static str,
    source_unit: &'static str,
    model: &'a GpModel,
    fit: &'a FitReport,
}

fn macs(ctx: &mut Ctx, a: &MacsArgs) -> Result<(), CliError> {
    let base = ctx.base()?;
    let factors = ArchFactors::new(a.r, a.d_i, a.d_m, a.w).context("cost model")?;
    let arch = resolve_arch_with(&factors, &base.config, ctx.config.snap).context("cost model")?;
    let costs = layer_costs(&arch, &base.config).context("cost model")?;
    let total: u64 = costs.iter().map(|c| c.macs).sum();
    let params: u64 = costs.iter().map(|c| c.params).sum();

    let mut rows: Vec<Vec<String>> =
        costs.iter().map(|c| vec![c.label.clone(), c.macs.to_string(), c.params.to_string()]).collect();
    rows.push(vec!["total".into(), total.to_string(), params.to_string()]);
    ctx.run.write("macs.csv", &csv_bytes(&["layer", "macs", "params"], rows)?)?;

    #[derive(Serialize)]
    struct Report<'a> {
        factors: ArchFactors,
        total_macs: u64,
        total_params: u64,
        arch: &'a vitcube_core::cost_model::ConcreteArch,
    }
    ctx.run.write_json("arch.json", &Report { factors, total_macs: total, total_params: params, arch: &arch })?;

    let width = costs.iter().map(|c| c.label.len()).max().unwrap_or(5).max(5);
    for c in &costs {
        println!("{:<width$}  {:>14}  {:>10}", c.label, c.macs, c.params);
    }
    println!("{:<width$}  {:>14}  {:>10}", "total", total, params);
    Ok(())
}

fn fit_gp(ctx: &mut Ctx, a: &FitGpArgs) -> Result<(), CliError> {
    let factor = factor_arg(&a.factor)?;
    if a.points < 2 {
        return Err(CliError::Usage("--points must be at least 2".into()));
    }
    let obs = ctx.observations(&a.input)?;
    let xs: Vec<f64> = obs.records.iter().map(|r| r.factors.get(factor)).collect();
    let ys: Vec<f64> = obs.records.iter().map(|r| r.accuracy).collect();
    let data = GpDataset::from_1d(&xs, &ys).context("gp")?;
    let (model, report) = fit_with_report(&data, &ctx.config.fit_config(a.smoothness)).context("gp")?;
    let (lo, hi) = range_arg("range", &a.range, min_max(xs.iter().copied()))?;

    let mut rows = Vec::with_capacity(a.points);
    let mut peak: Option<(f64, vitcube_core::gp::Prediction)> = None;
    for x in linspace(lo, hi, a.points) {
        let p = model.predict(&[x]).context("gp")?;
        let (l, u) = p.ci95();
        rows.push(vec![fmt_f64(x), fmt_f64(p.mean), fmt_f64(p.variance), fmt_f64(p.std_dev()), fmt_f64(l), fmt_f64(u)]);
        if peak.as_ref().is_none_or(|(_, b)| p.mean > b.mean) {
            peak = Some((x, p));
        }
    }
    ctx.run.write("posterior.csv", &csv_bytes(&["x", "mean", "variance", "std_dev", "lower95", "upper95"], rows)?)?;
    let points = data.inputs().zip(data.targets()).map(|(x, y)| vec![fmt_f64(x[0]), fmt_f64(*y)]).collect();
    ctx.run.write("points.csv", &csv_bytes(&["x", "top1"], points)?)?;
    ctx.run.write_json(
        "model.json",
        &ModelArtifact {
            inputs: vec![factor.name()],
            target: "top1",
            source_unit: unit_name(obs.unit),
            model: &model,
            fit: &report,
        },
    )?;

    let (px, pp) = peak.expect("at least two grid points");
    let (pl, pu) = pp.ci95();
    #[derive(Serialize)]
    struct Summary {
        factor: &'static str,
        observations: usize,
        lengthscale: f64,
        signal_variance: f64,
        noise_variance: f64,
        log_marginal_likelihood: f64,
        peak_x: f64,
        peak_mean: f64,
        peak_lower95: f64,
        peak_upper95: f64,
    }
    let k = model.kernel();
    ctx.run.write_json(
        "summary.json",
        &Summary {
            factor: factor.name(),
            observations: data.len(),
            lengthscale: k.lengthscales[0],
            signal_variance: k.signal_variance,
            noise_variance: model.noise_variance(),
            log_marginal_likelihood: report.log_marginal_likelihood,
            peak_x: px,
            peak_mean: pp.mean,
            peak_lower95: pl,
            peak_upper95: pu,
        },
    )?;
    println!(
        "{}: {} points, lengthscale {:.4}, posterior peak at {} = {:.4} (mean {:.4}, 95% CI [{:.4}, {:.4}])",
        factor,
        data.len(),
        k.lengthscales[0],
        factor,
        px,
        pp.mean,
        pl,
        pu
    );
    Ok(())
}

fn grid(ctx: &mut Ctx, a: &GridArgs) -> Result<(), CliError> {
    let (fx, fy) = (factor_arg(&a.x)?, factor_arg(&a.y)?);
    if fx == fy {
        return Err(CliError::Usage(format!("--x and --y must differ, both are {fx}")));
    }
    if a.nx < 2 || a.ny < 2 {
        return Err(CliError::Usage("--nx and --ny must be at least 2".into()));
    }
    let obs = ctx.observations(&a.input)?;
    let rows: Vec<[f64; 2]> = obs.records.iter().map(|r| [r.factors.get(fx), r.factors.get(fy)]).collect();
    let ys: Vec<f64> = obs.records.iter().map(|r| r.accuracy).collect();
    let data = GpDataset::new(&rows, &ys).context("gp")?;
    let (model, report) = fit_with_report(&data, &ctx.config.fit_config(a.smoothness)).context("gp")?;
    let (x_lo, x_hi) = range_arg("x-range", &a.x_range, min_max(rows.iter().map(|p| p[0])))?;
    let (y_lo, y_hi) = range_arg("y-range", &a.y_range, min_max(rows.iter().map(|p| p[1])))?;
    let surface = predict_grid(&model, &linspace(x_lo, x_hi, a.nx), &linspace(y_lo, y_hi, a.ny)).context("gp")?;
    let best = argmax_posterior(&surface).context("gp")?;

    let mut long = Vec::with_capacity(a.nx * a.ny);
    for j in 0..surface.ny() {
        for i in 0..surface.nx() {
            long.push(vec![
                fmt_f64(surface.x[i]),
                fmt_f64(surface.y[j]),
                fmt_f64(surface.mean_at(i, j)),
                fmt_f64(surface.variance_at(i, j)),
            ]);
        }
    }
    ctx.run.write("surface.csv", &csv_bytes(&["x", "y", "mean", "variance"], long)?)?;
    ctx.run.write("mean.csv", &matrix_csv(&surface.x, &surface.y, |i, j| surface.mean_at(i, j))?)?;
    ctx.run.write("variance.csv", &matrix_csv(&surface.x, &surface.y, |i, j| surface.variance_at(i, j))?)?;
    ctx.run.write_json(
        "model.json",
        &ModelArtifact {
            inputs: vec![fx.name(), fy.name()],
            target: "top1",
            source_unit: unit_name(obs.unit),
            model: &model,
            fit: &report,
        },
    )?;

    #[derive(Serialize)]
    struct Argmax {
        x_factor: &'static str,
        y_factor: &'static str,
        x: f64,
        y: f64,
        mean: f64,
        variance: f64,
        lengthscales: Vec<f64>,
        observations: usize,
    }
    let lengthscales = model.kernel().lengthscales.clone();
    ctx.run.write_json(
        "argmax.json",
        &Argmax {
            x_factor: fx.name(),
            y_factor: fy.name(),
            x: best.x,
            y: best.y,
            mean: best.mean,
            variance: best.variance,
            lengthscales: lengthscales.clone(),
            observations: data.len(),
        },
    )?;
    println!(
        "{}x{} grid over {fx} x {fy}: argmax at {fx} = {:.4}, {fy} = {:.4} (mean {:.4}); lengthscales {:.4}, {:.4}",
        a.nx, a.ny, best.x, best.y, best.mean, lengthscales[0], lengthscales[1]
    );
    Ok(())
}

fn select_config(config: &RunConfig, fraction: Option<f64>, base: Option<crate::cli::FractionBaseArg>) -> SelectConfig {
    let mut s = config.select;
    if let Some(f) = fraction {
        s.fraction = f;
    }
    if let Some(b) = base {
        s.fraction_base = b.into();
    }
    s
}

fn pareto(ctx: &mut Ctx, a: &ParetoArgs) -> Result<(), CliError> {
    let select = select_config(ctx.config, a.fraction, a.fraction_base);
    if !(select.fraction > 0.0 && select.fraction <= 1.0) {
        return Err(CliError::Usage(format!("--fraction must be in (0, 1], got {}", select.fraction)));
    }
    let obs = ctx.observations(&a.input)?;
    let m0 = ctx.m0(a.m0)?;
    let selection = select_top(&obs.records, m0, &select).context("pareto")?;
    let constrained = apply_constraints(&obs.records, m0);
    let fronts = nondominated_sort(&constrained).context("pareto")?;

    let rows = constrained
        .iter()
        .zip(&fronts.rank)
        .map(|(r, rank)| {
            let chosen = selection.records.iter().any(|s| s.id == r.id);
            vec![r.id.clone(), r.macs.to_string(), r.accuracy.to_string(), rank.to_string(), chosen.to_string()]
        })
        .collect();
    ctx.run.write("fronts.csv", &csv_bytes(&["id", "macs", "top1", "rank", "selected"], rows)?)?;
    let mut selected = Vec::new();
    write_observations(&selection.records, &mut selected)?;
    ctx.run.write("selected.csv", &selected)?;

    #[derive(Serialize)]
    struct Summary<'a> {
        m0: f64,
        select: SelectConfig,
        input_count: usize,
        constrained_count: usize,
        excluded_count: usize,
        front_sizes: &'a [usize],
        quota: usize,
        selected_count: usize,
        selected_ids: Vec<&'a str>,
    }
    ctx.run.write_json(
        "summary.json",
        &Summary {
            m0,
            select,
            input_count: selection.input_count,
            constrained_count: selection.constrained_count,
            excluded_count: selection.input_count - selection.constrained_count,
            front_sizes: &selection.front_sizes,
            quota: selection.quota,
            selected_count: selection.records.len(),
            selected_ids: selection.records.iter().map(|r| r.id.as_str()).collect(),
        },
    )?;
    println!(
        "{} records, {} within constraints, {} fronts; selected {} of quota {}",
        selection.input_count,
        selection.constrained_count,
        selection.front_sizes.len(),
        selection.records.len(),
        selection.quota
    );
    Ok(())
}

fn fit_rule_cmd(ctx: &mut Ctx, a: &FitRuleArgs) -> Result<(), CliError> {
    if a.curve_points < 2 {
        return Err(CliError::Usage("--curve-points must be at least 2".into()));
    }
    let obs = ctx.observations(&a.input)?;
    let m0 = ctx.m0(a.m0)?;
    let rule = fit_rule(&obs.records, m0, &ctx.config.fit_config(a.smoothness)).context("downsizer")?;
    ctx.run.write_json("rule.json", &rule)?;

    let points = obs
        .records
        .iter()
        .map(|r: &ModelRecord| {
            let f = r.factors;
            vec![
                r.id.clone(),
                fmt_f64(r.macs / m0),
                r.macs.to_string(),
                f.r.to_string(),
                f.d_i.to_string(),
                f.d_m.to_string(),
                f.w.to_string(),
            ]
        })
        .collect();
    ctx.run.write("factor_points.csv", &csv_bytes(&["id", "c", "macs", "r", "d_i", "d_m", "w"], points)?)?;

    let mut header = vec!["c".to_string(), "macs".to_string()];
    for f in Factor::ALL {
        for s in ["mean", "lower95", "upper95"] {
            header.push(format!("{}_{s}", f.name()));
        }
    }
    let mut rows = Vec::with_capacity(a.curve_points);
    for c in linspace(C_DOMAIN.0, C_DOMAIN.1, a.curve_points) {
        let mut row = vec![fmt_f64(c), fmt_f64(c * m0)];
        for f in Factor::ALL {
            let p = rule.models.get(f).predict(&[c]).context("downsizer")?;
            let (l, u) = p.ci95();
            row.extend([fmt_f64(p.mean), fmt_f64(l), fmt_f64(u)]);
        }
        rows.push(row);
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    ctx.run.write("factor_curves.csv", &csv_bytes(&header, rows)?)?;

    let (lo, hi) = rule.provenance.c_range;
    println!("fitted rule on {} records, c in [{lo:.4}, {hi:.4}], m0 = {m0}", obs.records.len());
    for f in Factor::ALL {
        let k = rule.models.get(f).kernel();
        println!("  {:<3} lengthscale {:.4}  signal variance {:.3e}", f.name(), k.lengthscales[0], k.signal_variance);
    }
    Ok(())
}

fn recommend(ctx: &mut Ctx, a: &RecommendArgs) -> Result<(), CliError> {
    let data = ctx.run.read_input(&a.rule)?;
    let rule: EfficiencyRule =
        serde_json::from_slice(&data).map_err(|e| CliError::file(&a.rule, format!("not a rule file: {e}")))?;
    let base = ctx.base()?;
    let rec = recommend_with(&rule, a.target_macs, &base.config, ctx.config.snap).context("downsizer")?;
    ctx.run.write_json("recommendation.json", &rec)?;
    let report = render_recommendation(&rec);
    ctx.run.write("recommendation.txt", report.as_bytes())?;
    print!("{report}");
    Ok(())
}

pub fn render_recommendation(rec: &Recommendation) -> String {
    use std::fmt::Write;
    let mut s = String::new();
    let _ = writeln!(s, "target MACs    {:.0}", rec.target_macs);
    let _ = writeln!(s, "reduction c    {:.4}", rec.c);
    let _ = writeln!(s);
    let _ = writeln!(s, "factor  predicted  95% interval        recommended");
    for f in Factor::ALL {
        let p = rec.predicted.get(f);
        let mark = if rec.adjusted.contains(&f) { " (adjusted)" } else { "" };
        let _ = writeln!(
            s,
            "{:<6}  {:>9.4}  [{:>7.4}, {:>7.4}]  {:>11.4}{mark}",
            f.name(),
            p.mean,
            p.lower,
            p.upper,
            rec.factors.get(f)
        );
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "input resolution  {}", rec.arch.input_resolution);
    let _ = writeln!(s, "achieved MACs     {} ({:+.3}% of target)", rec.achieved_macs, 100.0 * rec.relative_error);
    let _ = writeln!(s, "parameters        {}", rec.params);
    if rec.warnings.is_empty() {
        let _ = writeln!(s, "warnings          none");
    } else {
        for w in &rec.warnings {
            let _ = writeln!(s, "warning           {}", serde_json::to_string(w).unwrap_or_default());
        }
    }
    s
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| scale * rng.gen_range(-1.0..1.0))
}

fn time_min(reps: usize, mut f: impl FnMut() -> Result<(), CliError>) -> Result<f64, CliError> {
    let mut best = f64::INFINITY;
    for _ in 0..reps {
        let t = Instant::now();
        f()?;
        best = best.min(t.elapsed().as_secs_f64());
    }
    Ok(best)
}

fn attn_bench(ctx: &mut Ctx, a: &AttnBenchArgs) -> Result<(), CliError> {
    if a.tokens.iter().chain(&a.dims).any(|&v| v == 0) {
        return Err(CliError::Usage("--tokens and --dims must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.config.seed);
    let mut rows = Vec::new();
    for &d in &a.dims {
        let du = d as usize;
        let scale = 1.0 / (d as f64).sqrt();
        let sep = SeparableAttentionWeights {
            input: random_matrix(&mut rng, du, 1, scale),
            key: random_matrix(&mut rng, du, du, scale),
            value: random_matrix(&mut rng, du, du, scale),
            output: random_matrix(&mut rng, du, du, scale),
        };
        let mha = MhaWeights {
            query: random_matrix(&mut rng, du, du, scale),
            key: random_matrix(&mut rng, du, du, scale),
            value: random_matrix(&mut rng, du, du, scale),
            output: random_matrix(&mut rng, du, du, scale),
        };
        for kind in [AttentionKind::Separable, AttentionKind::Mha] {
            let mut prev: Option<(u64, f64)> = None;
            for &l in &a.tokens {
                let timed = a.reps > 0 && (kind == AttentionKind::Separable || l <= a.mha_max_tokens);
                let seconds = if timed {
                    let x = TokenMatrix::new(random_matrix(&mut rng, l as usize, du, 1.0)).context("attention")?;
                    Some(match kind {
                        AttentionKind::Separable => {
                            time_min(a.reps, || separable_attention(&x, &sep).context("attention").map(drop))?
                        }
                        AttentionKind::Mha => {
                            time_min(a.reps, || mha_reference(&x, &mha, a.heads).context("attention").map(drop))?
                        }
                    })
                } else {
                    None
                };
                let ratio = match (prev, seconds) {
                    (Some((pl, pt)), Some(t)) if l == 2 * pl => Some(t / pt),
                    _ => None,
                };
                prev = seconds.map(|t| (l, t));
                rows.push(vec![
                    kind.as_str().to_string(),
                    l.to_string(),
                    d.to_string(),
                    attention_macs(l, d, kind).to_string(),
                    seconds.map(|t| format!("{t:.6e}")).unwrap_or_default(),
                    ratio.map(|r| format!("{r:.4}")).unwrap_or_default(),
                ]);
            }
        }
    }
    let csv = csv_bytes(&["kind", "tokens", "dim", "macs", "seconds", "ratio_to_half"], rows)?;
    ctx.run.write("attn_bench.csv", &csv)?;
    print!("{}", String::from_utf8_lossy(&csv));
    Ok(())
}
