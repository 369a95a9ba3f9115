//! Command implementations: each takes resolved parameters and returns the
//! complete output text, so outputs are testable and byte-reproducible.
//!
//! Every CSV is self-describing: '#' comment lines echo the resolved
//! configuration and state the units, followed by a header row.

use std::fmt::Write as _;

use dmtlab_core::{
    audit_power, dmt_no_csi, empirical_multiplexing, estimate_diversity, long_term_bound_with,
    miso_long_term_bound, miso_short_term_printed, run_batch, short_term_bound,
    unbounded_delay_bound, AlphaConvention, AntennaConfig, CalibrationConfig, Deadline, DmtCurve,
    PowerMode, ProtocolPlan, SnrPoint,
};

use crate::config::{CliError, CliResult, CurveParams, Figure3Params, SweepParams};

fn power_mode_name(mode: PowerMode) -> &'static str {
    match mode {
        PowerMode::ShortTerm => "short_term",
        PowerMode::LongTermPrinted => "long_term_printed",
        PowerMode::LongTermExponent => "long_term_exponent",
    }
}

fn deadline_name(deadline: Deadline) -> String {
    match deadline {
        Deadline::Bounded(d) => d.to_string(),
        Deadline::Unbounded => "unbounded".to_string(),
    }
}

fn join_u32(values: &[u32]) -> String {
    values
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// Analytic curve table: the no-CSI curve, the unbounded-delay bound, and
/// the bounded-delay bounds per requested deadline, with the N=1
/// specializations where they apply. Negative raw values are clamped to
/// zero for display.
pub fn curve_csv(params: &CurveParams) -> CliResult<String> {
    let config = AntennaConfig::new(params.m, params.n)?;
    let curve: DmtCurve = dmt_no_csi(&config);
    let alpha = if params.variants.printed_alpha {
        AlphaConvention::Printed
    } else {
        AlphaConvention::VertexConsistent
    };
    let n1 = params.n == 1;

    let mut out = String::new();
    out.push_str("# dmtlab curve\n");
    let _ = writeln!(out, "# m={} n={} l={}", params.m, params.n, params.l);
    let _ = writeln!(out, "# deadlines={}", join_u32(&params.deadlines));
    let _ = writeln!(out, "# variants={}", params.variants.describe());
    out.push_str("# units: r and d are dimensionless SNR exponents (natural-log convention)\n");

    // The long-term bound needs the equivalent delay, undefined for M=1 with M != N.
    let long_term_available = dmtlab_core::equivalent_delay(&config, 1).is_ok();
    if !long_term_available {
        out.push_str(
            "# note: long-term columns empty (equivalent delay undefined for m=1 with m != n)\n",
        );
    }
    let miso_long_term_available = n1 && params.m >= 2;
    if n1 && !miso_long_term_available {
        out.push_str("# note: miso long-term columns empty (requires m >= 2)\n");
    }

    let mut header = String::from("r,d_no_csi,d_unbounded");
    for d in &params.deadlines {
        let _ = write!(header, ",d_short_term_D{d}");
    }
    for d in &params.deadlines {
        let _ = write!(header, ",d_long_term_D{d}");
    }
    for d in &params.deadlines {
        let _ = write!(header, ",d_miso_long_term_D{d}");
    }
    for d in &params.deadlines {
        let _ = write!(header, ",d_miso_short_term_printed_D{d}");
    }
    out.push_str(&header);
    out.push('\n');

    let mut clamped = false;
    let mut rows = String::new();
    for &r in &params.r_grid {
        let mut cells: Vec<String> = Vec::new();
        cells.push(r.to_string());
        cells.push(curve.eval(r)?.to_string());
        cells.push(unbounded_delay_bound(&config, params.l, r).to_string());
        let mut push_clamped = |cells: &mut Vec<String>, value: f64| {
            if value < 0.0 {
                clamped = true;
            }
            cells.push(value.max(0.0).to_string());
        };
        for &d in &params.deadlines {
            let v = short_term_bound(&config, params.l, d, r)?;
            push_clamped(&mut cells, v);
        }
        for &d in &params.deadlines {
            if long_term_available {
                let v = long_term_bound_with(&config, params.l, d, r, alpha)?;
                push_clamped(&mut cells, v);
            } else {
                cells.push(String::new());
            }
        }
        for &d in &params.deadlines {
            if miso_long_term_available {
                let v = miso_long_term_bound(params.m, params.l, d, r)?;
                push_clamped(&mut cells, v);
            } else {
                cells.push(String::new());
            }
        }
        for &d in &params.deadlines {
            if n1 {
                let v = miso_short_term_printed(params.m, params.l, d, r);
                push_clamped(&mut cells, v);
            } else {
                cells.push(String::new());
            }
        }
        rows.push_str(&cells.join(","));
        rows.push('\n');
    }
    if clamped {
        out.push_str("# note: negative raw bound values clamped to 0 for display\n");
    }
    out.push_str(&rows);
    Ok(out)
}

/// Delay-ratio table for N=1: the fraction of the unbounded-delay
/// diversity achieved at each deadline, with and without power control.
/// The ratios do not depend on the multiplexing gain; that identity is
/// checked before emitting.
pub fn figure3_csv(params: &Figure3Params) -> CliResult<String> {
    let config = AntennaConfig::new(params.m, params.n)?;
    let short_term_ratio = |d: u32, r: f64| -> CliResult<f64> {
        let numerator = if params.variants.printed_exmp2 {
            miso_short_term_printed(params.m, params.l, d, r)
        } else {
            short_term_bound(&config, params.l, d, r)?
        };
        Ok(numerator / unbounded_delay_bound(&config, params.l, r))
    };
    let long_term_ratio = |d: u32, r: f64| -> CliResult<f64> {
        Ok(miso_long_term_bound(params.m, params.l, d, r)?
            / unbounded_delay_bound(&config, params.l, r))
    };

    // Rate independence of both ratios, checked at r = 0 and r = 0.9.
    for d in [1, params.d_max] {
        let st = (short_term_ratio(d, 0.0)?, short_term_ratio(d, 0.9)?);
        let lt = (long_term_ratio(d, 0.0)?, long_term_ratio(d, 0.9)?);
        if (st.0 - st.1).abs() > 1e-12 || (lt.0 - lt.1).abs() > 1e-12 {
            return Err(CliError::Numeric(format!(
                "delay ratios drift with the multiplexing gain at D={d}: {st:?} {lt:?}"
            )));
        }
    }

    let mut out = String::new();
    out.push_str("# dmtlab figure3\n");
    let _ = writeln!(out, "# m={} n={} l={}", params.m, params.n, params.l);
    let _ = writeln!(out, "# variants={}", params.variants.describe());
    out.push_str(
        "# units: ratios of diversity exponents (dimensionless), valid for any r in [0, 1)\n",
    );
    out.push_str("D,ratio_short_term,ratio_long_term\n");
    for d in 1..=params.d_max {
        let _ = writeln!(
            out,
            "{d},{},{}",
            short_term_ratio(d, 0.0)?,
            long_term_ratio(d, 0.0)?
        );
    }
    Ok(out)
}

struct SweepRun {
    summaries: Vec<dmtlab_core::SimSummary>,
    plans: Vec<ProtocolPlan>,
}

fn run_sweep(params: &SweepParams) -> CliResult<SweepRun> {
    let config = AntennaConfig::new(params.m, params.n)?;
    let calibration = CalibrationConfig {
        trials: params.calibration_trials,
        seed: params.seed ^ 0x5EED_CA1B,
    };
    let mut summaries = Vec::with_capacity(params.snr_db.len());
    let mut plans = Vec::with_capacity(params.snr_db.len());
    for &db in &params.snr_db {
        let snr = SnrPoint::from_db(db)?;
        let plan = ProtocolPlan::build_with(
            &config,
            &params.scheme,
            snr,
            params.variants.threshold_mode(),
            calibration,
        )?;
        let summary = run_batch(
            &config,
            &params.scheme,
            &plan,
            snr,
            params.trials,
            params.seed,
        )?;
        summaries.push(summary);
        plans.push(plan);
    }
    Ok(SweepRun { summaries, plans })
}

fn sweep_preamble(out: &mut String, command: &str, params: &SweepParams) {
    let _ = writeln!(out, "# dmtlab {command}");
    let _ = writeln!(
        out,
        "# m={} n={} l={}",
        params.m, params.n, params.scheme.blocklength
    );
    let _ = writeln!(
        out,
        "# deadline={} r={} power_mode={}",
        deadline_name(params.scheme.deadline),
        params.scheme.multiplexing,
        power_mode_name(params.scheme.power_mode)
    );
    let _ = writeln!(
        out,
        "# trials={} seed={} stage_cap={}",
        params.trials, params.seed, params.scheme.stage_cap
    );
    let _ = writeln!(out, "# variants={}", params.variants.describe());
}

/// SNR sweep: one Monte Carlo summary row per SNR point plus a trailing
/// diversity-slope block.
pub fn sweep_csv(params: &SweepParams) -> CliResult<String> {
    let run = run_sweep(params)?;
    let mut out = String::new();
    sweep_preamble(&mut out, "sweep", params);
    out.push_str(
        "# units: snr_db in dB, rho linear; delays in channel uses; bounds dimensionless\n",
    );
    out.push_str(
        "snr_db,rho,mean_error_bound,mean_delay,avg_power_linear,empirical_multiplexing\n",
    );
    for (db, summary) in params.snr_db.iter().zip(&run.summaries) {
        let emp = empirical_multiplexing(
            summary,
            params.scheme.multiplexing,
            params.scheme.blocklength,
        );
        let _ = writeln!(
            out,
            "{db},{},{},{},{},{emp}",
            summary.snr.rho(),
            summary.mean_error_bound,
            summary.mean_delay,
            summary.avg_power_linear
        );
    }
    let estimate = estimate_diversity(&run.summaries)?;
    let _ = writeln!(
        out,
        "# slope={} stderr={} intercept={}",
        estimate.slope, estimate.stderr, estimate.intercept
    );
    let _ = writeln!(
        out,
        "# slope_points_used={}/{} excluded_log_rho={}",
        estimate.snr_points.len(),
        params.snr_db.len(),
        if estimate.excluded.is_empty() {
            "none".to_string()
        } else {
            estimate
                .excluded
                .iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        }
    );
    Ok(out)
}

/// Long-term power audit: realized average power and per-stage budget
/// contributions against the budget multiplier, per SNR point.
pub fn audit_text(params: &SweepParams) -> CliResult<String> {
    if params.scheme.power_mode == PowerMode::ShortTerm {
        return Err(CliError::Config(
            "the audit targets long-term power modes; short-term transmissions always use power \
             rho, so there is no budget to audit (set power_mode to long_term_printed or \
             long_term_exponent)"
                .into(),
        ));
    }
    let run = run_sweep(params)?;
    let mut out = String::new();
    sweep_preamble(&mut out, "audit", params);
    let _ = writeln!(out, "# budget_multiplier={}", params.budget_multiplier);
    out.push_str("# units: snr_db in dB; powers linear, normalized by rho\n");
    let mut all_pass = true;
    for ((db, summary), plan) in params.snr_db.iter().zip(&run.summaries).zip(&run.plans) {
        let report = audit_power(
            std::slice::from_ref(summary),
            plan,
            params.budget_multiplier,
        );
        let entry = &report.entries[0];
        let _ = writeln!(
            out,
            "snr_db={db} avg_power_linear={} avg_ok={}",
            entry.avg_power_linear,
            if entry.avg_power_linear <= params.budget_multiplier {
                "yes"
            } else {
                "no"
            }
        );
        for stage in &entry.stage_contributions {
            let _ = writeln!(
                out,
                "  stage={} g={} contribution={} ok={}",
                stage.stage,
                stage.power_exponent,
                stage.contribution,
                if stage.pass { "yes" } else { "no" }
            );
        }
        let _ = writeln!(out, "  point={}", if entry.pass { "PASS" } else { "FAIL" });
        all_pass &= entry.pass;
    }
    let _ = writeln!(out, "overall: {}", if all_pass { "PASS" } else { "FAIL" });
    Ok(out)
}
