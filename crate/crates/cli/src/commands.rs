use serde_json::Value;
use shuffle_lab::bounds::{asymptotic_bounds, default_eps, eigenfunction_t, extended_t, BoundInputs, BoundResult};
use shuffle_lab::chain::{kernel_power, position_kernel, rudvalis_nstep_closed_form, subdominant_eigenvalue};
use shuffle_lab::spectral::{
    block_length, drift_defect, drift_kernel, gamma_exact, second_moment_bound, MomentSampling, TrackedStatistic,
};
use shuffle_lab::tv::{mc_mixing_proxy, mc_tv_curve, mixing_time_exact, tv_curve_exact, TVCurve};
use shuffle_lab::{DeckState, Error, ModelKind, Result, ShuffleModel};

use crate::args::{BoundsArgs, ExactTvArgs, McTvArgs, MixScalingArgs, ModelArgs, ModelName, RudvalisArgs};
use crate::output::{opt_real, real, Output, Table};

/// Factor applied to the sampled second moment when it replaces R.
pub const EMPIRICAL_R_SAFETY: f64 = 1.5;

const MOMENT_INNER: usize = 64;

pub fn build_model(name: ModelName, p: f64) -> Result<ShuffleModel> {
    match name {
        ModelName::Overhand => ShuffleModel::overhand(p),
        ModelName::CircularOverhand => ShuffleModel::circular_overhand(p),
        ModelName::Rudvalis => Ok(ShuffleModel::rudvalis()),
    }
}

fn require_n(n: usize, min: usize) -> Result<()> {
    if n < min {
        return Err(Error::InvalidParameter(format!("--n must be at least {min}, got {n}")));
    }
    if n > u16::MAX as usize {
        return Err(Error::InvalidParameter(format!("--n must be at most {}, got {n}", u16::MAX)));
    }
    Ok(())
}

pub fn parse_eps(text: &str, n: usize) -> Result<f64> {
    if text == "auto" {
        return Ok(default_eps(n));
    }
    let eps: f64 = text
        .parse()
        .map_err(|_| Error::InvalidParameter(format!("--eps must be \"auto\" or a number, got {text:?}")))?;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!("--eps must lie in (0, 1), got {eps}")));
    }
    Ok(eps)
}

fn curve_table(curve: &TVCurve, with_ci: bool) -> Table {
    let mut columns = vec!["t".to_string(), "tv".to_string()];
    if with_ci {
        columns.extend(["ci_low".to_string(), "ci_high".to_string()]);
    }
    let rows = curve
        .rows
        .iter()
        .map(|r| {
            let mut row = vec![Value::from(r.t), real(r.tv)];
            if with_ci {
                row.extend([opt_real(r.ci_low), opt_real(r.ci_high)]);
            }
            row
        })
        .collect();
    Table { name: "curve".into(), columns, rows }
}

fn bound_fields(out: &mut Output, prefix: &str, b: &BoundResult, scale: f64) {
    out.real(prefix, b.t_real * scale);
    out.field(&format!("{prefix}_steps"), (b.t_real * scale).floor() as i64);
    out.field(&format!("{prefix}_vacuous"), b.vacuous);
}

pub fn bounds(args: &BoundsArgs) -> Result<Output> {
    let n = args.model.n;
    require_n(n, 3)?;
    let model = build_model(args.model.model, args.model.p)?;
    let eps = parse_eps(&args.eps, n)?;
    let stat = TrackedStatistic::half_deck(n)?;
    let gamma = gamma_exact(&model, n)?;
    let defect = drift_defect(&stat, &model)?;
    let sampling = MomentSampling { states: args.trials, inner: MOMENT_INNER, seed: args.seed };
    let moments = second_moment_bound(&stat, &model, sampling)?;
    let phi_max = stat.phi_max_start().1;
    let r = if args.empirical_r { EMPIRICAL_R_SAFETY * moments.r_empirical } else { moments.r_analytic };

    let exact_bound = eigenfunction_t(&BoundInputs::new(phi_max, r, gamma, 0.0, eps)?)?;
    let defect_bound = extended_t(&BoundInputs::new(phi_max, r, gamma, defect.rho_hat, eps)?)?;
    let asym = asymptotic_bounds(n, model.p());
    let block = block_length(&model, n) as f64;

    let mut out = Output::default();
    out.field("model", model.name()).field("n", n).field("m", stat.m());
    out.field("p", model.p().map_or(Value::Null, real));
    out.real("eps", eps).field("block_length", block as u64);
    out.real("gamma", gamma).real("phi_max", phi_max).real("v_series", moments.v_series);
    out.real("r_analytic", moments.r_analytic).real("r_empirical", moments.r_empirical);
    out.field("r_source", if args.empirical_r { "empirical" } else { "analytic" }).real("r_used", r);
    out.real("rho_hat", defect.rho_hat);
    // Exact eigenfunction only on the circular deck.
    out.field("eigenfunction_exact", model.kind() == ModelKind::CircularOverhand);
    bound_fields(&mut out, "T_lemma21", &exact_bound, block);
    bound_fields(&mut out, "T_lemma32", &defect_bound, block);
    match model.kind() {
        ModelKind::Rudvalis => {
            out.real("T_asymptotic", asym.rudvalis);
        }
        _ => {
            out.field("T_asymptotic", opt_real(asym.circular_overhand));
            out.field("T_asymptotic_derived", opt_real(asym.derived_overhand));
        }
    }
    out.real("threshold_c", defect_bound.threshold);
    Ok(out)
}

pub fn exact_tv(args: &ExactTvArgs) -> Result<Output> {
    let n = args.model.n;
    require_n(n, 2)?;
    let model = build_model(args.model.model, args.model.p)?;
    let curve = tv_curve_exact(&model, &DeckState::sorted(n), args.t_max, args.cap)?;
    let mut out = Output::default();
    out.field("model", model.name()).field("n", n).field("start", "sorted");
    out.table = Some(curve_table(&curve, false));
    Ok(out)
}

pub fn mc_tv(args: &McTvArgs) -> Result<Output> {
    let n = args.model.n;
    require_n(n, 3)?;
    if args.every == 0 {
        return Err(Error::InvalidParameter("--every must be positive".into()));
    }
    let model = build_model(args.model.model, args.model.p)?;
    let stat = TrackedStatistic::half_deck(n)?;
    let times: Vec<u64> = (0..=args.t_max).step_by(args.every as usize).collect();
    let curve = mc_tv_curve(&model, &stat, &times, args.trials, args.seed)?;
    let mut out = Output::default();
    out.field("model", model.name()).field("n", n).field("m", stat.m()).field("trials", args.trials);
    out.field("start", "phi-max").field("ci_z", 2.576);
    out.table = Some(curve_table(&curve, true));
    Ok(out)
}

pub fn eigen_check(args: &ModelArgs) -> Result<Output> {
    let n = args.n;
    require_n(n, 3)?;
    let model = build_model(args.model, args.p)?;
    let gamma = gamma_exact(&model, n)?;
    let kernel = drift_kernel(&model, n)?;
    let theta = 2.0 * std::f64::consts::PI / n as f64;
    let cosines: Vec<f64> = (1..=n).map(|k| (theta * k as f64).cos()).collect();
    let drift = kernel.apply_to_function(&cosines);
    let power = subdominant_eigenvalue(&kernel);

    let mut out = Output::default();
    out.field("model", model.name()).field("n", n);
    out.field("kernel", if model.kind() == ModelKind::Rudvalis { "n-step" } else { "one-step" });
    out.real("gamma", gamma).real("lambda", 1.0 - gamma);
    out.field("power_iteration_eigenvalue", power.as_ref().map_or(Value::Null, |e| real(e.value)));
    let rows = (0..n)
        .map(|i| {
            let expected = (1.0 - gamma) * cosines[i];
            vec![Value::from(i + 1), real(drift[i]), real(expected), real(drift[i] - expected)]
        })
        .collect();
    out.table = Some(Table {
        name: "residuals".into(),
        columns: ["k", "drift", "lambda_cos", "residual"].map(String::from).to_vec(),
        rows,
    });
    Ok(out)
}

pub fn defect(args: &ModelArgs) -> Result<Output> {
    let n = args.n;
    require_n(n, 3)?;
    let model = build_model(args.model, args.p)?;
    let stat = TrackedStatistic::half_deck(n)?;
    let report = drift_defect(&stat, &model)?;
    let mut out = Output::default();
    out.field("model", model.name()).field("n", n).field("m", stat.m());
    out.real("gamma", report.gamma).real("rho_hat", report.rho_hat);
    let rows = report.defect.iter().enumerate().map(|(i, &d)| vec![Value::from(i + 1), real(d)]).collect();
    out.table = Some(Table { name: "defect".into(), columns: vec!["k".into(), "delta".into()], rows });
    Ok(out)
}

pub fn rudvalis_verify(args: &RudvalisArgs) -> Result<Output> {
    let n = args.n;
    require_n(n, 3)?;
    let power = kernel_power(&position_kernel(&ShuffleModel::rudvalis(), n)?, n as u64);
    let mut worst = 0.0f64;
    for k in 1..=n {
        let row = rudvalis_nstep_closed_form(n, k)?;
        for (a, b) in row.iter().zip(power.row(k)) {
            worst = worst.max((a - b).abs());
        }
    }
    let mut out = Output::default();
    out.field("n", n).real("max_abs_diff", worst).field("within_1e-12", worst <= 1e-12);
    Ok(out)
}

pub fn default_scaling_t_max(n: usize) -> u64 {
    let nf = n as f64;
    (10.0 * nf * nf * nf.ln()).ceil() as u64 + 100
}

pub fn mix_scaling(args: &MixScalingArgs) -> Result<Output> {
    if !(args.delta > 0.0 && args.delta < 1.0) {
        return Err(Error::InvalidParameter(format!("--delta must lie in (0, 1), got {}", args.delta)));
    }
    let model = build_model(args.model, args.p)?;
    let mut rows = Vec::new();
    let mut previous: Option<u64> = None;
    for (i, &n) in args.ns.iter().enumerate() {
        let t_max = args.t_max.unwrap_or_else(|| default_scaling_t_max(n));
        let (estimator, tau, ci) = if n <= args.cap {
            require_n(n, 2)?;
            ("exact", mixing_time_exact(&model, n, args.delta, t_max as usize, args.cap)?, Value::Null)
        } else {
            require_n(n, 3)?;
            let stat = TrackedStatistic::half_deck(n)?;
            let seed = shuffle_lab::SplitMix64::derive_seed(args.seed, i as u64);
            let e = mc_mixing_proxy(&model, &stat, args.delta, t_max as usize, args.trials, seed)?;
            ("mc-proxy", e.t, real(e.ci_half))
        };
        let ratio = previous.filter(|&p| p > 0).map_or(Value::Null, |p| real(tau as f64 / p as f64));
        rows.push(vec![Value::from(n), Value::from(estimator), Value::from(tau), ci, ratio]);
        previous = Some(tau);
    }
    let mut out = Output::default();
    out.field("model", model.name()).real("delta", args.delta);
    out.table = Some(Table {
        name: "scaling".into(),
        columns: ["n", "estimator", "tau", "ci_half_at_tau", "ratio_to_previous"].map(String::from).to_vec(),
        rows,
    });
    Ok(out)
}
