//! CSV output for recognition curves, sweeps and visual/log-polar comparisons.

use std::io::Write;

use super::{evaluate, split, train_pipeline, Dataset, Metrics, Mode, PipelineConfig, SweepResult};
use crate::error::Result;

/// Published ORL error rate of the visual pipeline, percent.
pub const PUBLISHED_ORL_ERROR_RATE_VISUAL: f64 = 10.5;
/// Published ORL error rate of the log-polar pipeline, percent.
pub const PUBLISHED_ORL_ERROR_RATE_LOGPOLAR: f64 = 2.5;

/// `n_test,recognition_rate,false_rejection_rate`, one row per curve point.
pub fn write_curve_csv(metrics: &Metrics, mut out: impl Write) -> Result<()> {
    writeln!(out, "n_test,recognition_rate,false_rejection_rate")?;
    for p in &metrics.curve {
        writeln!(
            out,
            "{},{:.4},{:.4}",
            p.n_test, p.recognition_rate, p.false_rejection_rate
        )?;
    }
    Ok(())
}

/// Long format `hidden1,epoch,total_error`; failed widths get a single
/// `hidden1,,error message` row.
pub fn write_sweep_csv(results: &[SweepResult], mut out: impl Write) -> Result<()> {
    writeln!(out, "hidden1,epoch,total_error")?;
    for r in results {
        match &r.trace {
            Ok(trace) => {
                for (epoch, e) in trace.iter().enumerate() {
                    writeln!(out, "{},{epoch},{e}", r.hidden1)?;
                }
            }
            Err(e) => writeln!(
                out,
                "{},,\"{}\"",
                r.hidden1,
                e.to_string().replace('"', "'")
            )?,
        }
    }
    Ok(())
}

/// One trained-and-evaluated model in a mode comparison.
#[derive(Debug, Clone)]
pub struct ComparisonRow {
    pub mode: Mode,
    pub seed: u64,
    pub metrics: Metrics,
    pub epochs: usize,
    pub final_error: f64,
}

impl ComparisonRow {
    pub fn published_error_rate(&self) -> f64 {
        match self.mode {
            Mode::Visual => PUBLISHED_ORL_ERROR_RATE_VISUAL,
            Mode::LogPolar => PUBLISHED_ORL_ERROR_RATE_LOGPOLAR,
        }
    }
}

/// Splits `ds` with `cfg.split`, then trains and evaluates both modes for
/// every seed in `seeds` (the seed drives network initialization).
pub fn compare_modes(
    ds: &Dataset,
    cfg: &PipelineConfig,
    seeds: &[u64],
) -> Result<Vec<ComparisonRow>> {
    let (train, test) = split(ds, &cfg.split)?;
    let mut rows = Vec::new();
    for &seed in seeds {
        for mode in [Mode::Visual, Mode::LogPolar] {
            let mut c = *cfg;
            c.mode = mode;
            c.hyper.seed = seed;
            let bundle = train_pipeline(&train, &c)?;
            let metrics = evaluate(&bundle, &test, c.threshold)?;
            log::info!(
                "{mode} seed {seed}: recognition {:.2}% after {} epochs (E = {:.4})",
                metrics.recognition_rate,
                bundle.meta.epochs,
                bundle.meta.final_error
            );
            rows.push(ComparisonRow {
                mode,
                seed,
                metrics,
                epochs: bundle.meta.epochs,
                final_error: bundle.meta.final_error,
            });
        }
    }
    Ok(rows)
}

/// Measured and published rates side by side, one row per model.
pub fn write_comparison_csv(rows: &[ComparisonRow], mut out: impl Write) -> Result<()> {
    writeln!(
        out,
        "mode,seed,n_test,recognition_rate,error_rate,false_rejection_rate,published_error_rate,epochs,final_error"
    )?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{:.4},{:.4},{:.4},{},{},{}",
            r.mode,
            r.seed,
            r.metrics.total,
            r.metrics.recognition_rate,
            r.metrics.error_rate(),
            r.metrics.false_rejection_rate,
            r.published_error_rate(),
            r.epochs,
            r.final_error
        )?;
    }
    Ok(())
}
