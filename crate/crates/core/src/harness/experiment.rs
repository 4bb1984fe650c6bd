//! Replicated simulation runs.
//!
//! Replication `r` at grid value `m` draws from
//! `replication_rng(derive_seed(seed, m), r)`, so results do not depend on the
//! number of worker threads.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, MethodSpec, Setting};
use super::summary::{quartiles, SummaryRow};
use crate::envelope::{interpolate_bounds, Method};
use crate::error::{FdpError, Result};
use crate::models::{derive_seed, gen_gaussian_topk, gen_online_mixture, gen_vct, replication_rng, true_fdp};
use crate::online::{OnlineEnvelopes, OnlineState};
use crate::preordered::{lf_fdp_bound_at, lf_select, preordered_envelope};
use crate::topk::{bh_fdp_bound_at, bh_select_sorted, path_sizes, topk_adaptive_envelope_sorted, topk_bounds, PValueBatch};

/// Result of one method at one α in one replication.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellOutcome {
    /// Bound at the reference procedure's rejection set.
    pub bound: f64,
    /// Whether the envelope held along the whole path.
    pub covered: bool,
    pub rejections: usize,
}

/// Methods evaluated at a given m (interpolated ones drop out above the cap).
pub fn active_methods(cfg: &ExperimentConfig, m: usize) -> Vec<MethodSpec> {
    cfg.methods.iter().copied().filter(|s| !s.interpolated || m <= cfg.interpolation_max_m).collect()
}

/// Runs one replication; the outcome is indexed `[alpha][method]`.
pub fn run_replication(
    cfg: &ExperimentConfig,
    m: usize,
    methods: &[MethodSpec],
    rep: u64,
) -> Result<Vec<Vec<CellOutcome>>> {
    let mut rng = replication_rng(derive_seed(cfg.seed, m as u64), rep);
    match cfg.setting {
        Setting::Topk => {
            let batch = gen_gaussian_topk(&cfg.model.gaussian_at(m)?, &mut rng)?;
            topk_replication(cfg, &batch, methods)
        }
        Setting::Preordered => {
            let vct = match &cfg.model {
                super::config::ModelConfig::Vct(v) => v,
                _ => return Err(FdpError::Config("expected a vct model".into())),
            };
            let data = gen_vct(vct, m, &mut rng)?;
            preordered_replication(cfg, &data, methods)
        }
        Setting::Online => {
            let (p, labels) = gen_online_mixture(&cfg.model.mixture_at(m)?, &mut rng)?;
            online_replication(cfg, &p, &labels, methods)
        }
    }
}

fn covers(fdp: &[f64], bounds: &[f64]) -> bool {
    fdp.iter().zip(bounds).all(|(f, b)| f <= b)
}

fn topk_replication(cfg: &ExperimentConfig, batch: &PValueBatch, methods: &[MethodSpec]) -> Result<Vec<Vec<CellOutcome>>> {
    let sorted = batch.sorted();
    let sizes = path_sizes(&sorted.sorted);
    let fdp = true_fdp(&sorted.perm, &sizes, batch.labels())?;
    let m = batch.m() as f64;
    let k_hats: Vec<usize> =
        cfg.alpha_grid.iter().map(|&a| bh_select_sorted(&sorted.sorted, a)).collect::<Result<_>>()?;
    let mut out = vec![Vec::with_capacity(methods.len()); cfg.alpha_grid.len()];
    for spec in methods {
        let mut bounds = if spec.adaptive {
            topk_adaptive_envelope_sorted(spec.method, &sorted.sorted, cfg.delta)?.bounds
        } else {
            topk_bounds(spec.method, &sorted.sorted, cfg.delta, m)?
        };
        if spec.interpolated {
            bounds = interpolate_bounds(&bounds, &sizes)?;
        }
        let covered = covers(&fdp, &bounds);
        for ((row, &alpha), &k_hat) in out.iter_mut().zip(&cfg.alpha_grid).zip(&k_hats) {
            let bound = if spec.interpolated {
                if k_hat == 0 { 0.0 } else { bounds[k_hat - 1] }
            } else {
                bh_fdp_bound_at(spec.method, &sorted.sorted, alpha, cfg.delta, spec.adaptive, k_hat)?
            };
            row.push(CellOutcome { bound, covered, rejections: k_hat });
        }
    }
    Ok(out)
}

fn preordered_replication(
    cfg: &ExperimentConfig,
    data: &crate::preordered::PreorderedData,
    methods: &[MethodSpec],
) -> Result<Vec<Vec<CellOutcome>>> {
    let (a, _) = data.counts();
    let order: Vec<usize> = (0..data.m()).filter(|&i| data.pvalues()[i] <= data.s()).collect();
    let fdp = true_fdp(&order, &a, data.labels())?;
    let sels = cfg.alpha_grid.iter().map(|&al| lf_select(data, al)).collect::<Result<Vec<_>>>()?;
    let mut out = vec![Vec::with_capacity(methods.len()); cfg.alpha_grid.len()];
    for spec in methods {
        let mut bounds = preordered_envelope(spec.method, data, cfg.delta)?.bounds;
        if spec.interpolated {
            bounds = interpolate_bounds(&bounds, &a)?;
        }
        let covered = covers(&fdp, &bounds);
        for ((row, &alpha), sel) in out.iter_mut().zip(&cfg.alpha_grid).zip(&sels) {
            let bound = if spec.interpolated {
                if sel.k_hat == 0 { 0.0 } else { bounds[sel.k_hat - 1] }
            } else {
                lf_fdp_bound_at(spec.method, data.b(), data.nu(), *sel, alpha, cfg.delta)?
            };
            row.push(CellOutcome { bound, covered, rejections: sel.r_hat });
        }
    }
    Ok(out)
}

fn online_replication(
    cfg: &ExperimentConfig,
    pvalues: &[f64],
    labels: &[bool],
    methods: &[MethodSpec],
) -> Result<Vec<Vec<CellOutcome>>> {
    let n = pvalues.len();
    let mut env = OnlineEnvelopes::new(cfg.delta)?;
    let bases: Vec<Method> = {
        let mut b: Vec<Method> = methods.iter().map(|s| s.method).collect();
        b.sort();
        b.dedup();
        b
    };
    let mut out = Vec::with_capacity(cfg.alpha_grid.len());
    for &alpha in &cfg.alpha_grid {
        let mut state = OnlineState::new(alpha, cfg.lord.w0_fraction * alpha, cfg.lord.spending())?;
        let mut fdp = Vec::with_capacity(n);
        let mut rs = Vec::with_capacity(n);
        let mut hist = vec![Vec::with_capacity(n); bases.len()];
        let mut false_rej = 0usize;
        for (&p, &alt) in pvalues.iter().zip(labels) {
            let (rej, _) = state.step(p);
            false_rej += usize::from(rej && !alt);
            fdp.push(false_rej as f64 / state.r.max(1) as f64);
            rs.push(state.r);
            for (h, &meth) in hist.iter_mut().zip(&bases) {
                h.push(env.at_state(meth, &state)?);
            }
        }
        let mut row = Vec::with_capacity(methods.len());
        for spec in methods {
            let base = &hist[bases.iter().position(|&b| b == spec.method).unwrap_or(0)];
            let interp;
            let bounds: &[f64] = if spec.interpolated {
                interp = interpolate_bounds(base, &rs)?;
                &interp
            } else {
                base
            };
            row.push(CellOutcome {
                bound: bounds.last().copied().unwrap_or(1.0),
                covered: covers(&fdp, bounds),
                rejections: state.r,
            });
        }
        out.push(row);
    }
    Ok(out)
}

/// Collects outcomes of every replication at `m`, in replication order.
pub fn run_cell_outcomes(cfg: &ExperimentConfig, m: usize, methods: &[MethodSpec]) -> Result<Vec<Vec<Vec<CellOutcome>>>> {
    (0..cfg.replications as u64).into_par_iter().map(|rep| run_replication(cfg, m, methods, rep)).collect()
}

/// Runs the whole grid and returns one summary row per (m, α, method).
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<SummaryRow>> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for &m in &cfg.m_grid {
        let methods = active_methods(cfg, m);
        let start = Instant::now();
        let reps = run_cell_outcomes(cfg, m, &methods)?;
        let elapsed = start.elapsed().as_secs_f64();
        for (ai, &alpha) in cfg.alpha_grid.iter().enumerate() {
            for (mi, spec) in methods.iter().enumerate() {
                let cells: Vec<CellOutcome> = reps.iter().map(|r| r[ai][mi]).collect();
                rows.push(summarize(m, alpha, *spec, &cells, cfg.timing.then_some(elapsed)));
            }
        }
    }
    Ok(rows)
}

fn summarize(m: usize, alpha: f64, spec: MethodSpec, cells: &[CellOutcome], wall_time: Option<f64>) -> SummaryRow {
    let n = cells.len() as f64;
    let bounds: Vec<f64> = cells.iter().map(|c| c.bound).collect();
    let (q25, median, q75) = quartiles(&bounds);
    SummaryRow {
        m,
        alpha,
        method: spec.to_string(),
        q25,
        median,
        q75,
        coverage_rate: cells.iter().filter(|c| c.covered).count() as f64 / n,
        mean_rejections: cells.iter().map(|c| c.rejections as f64).sum::<f64>() / n,
        wall_time,
    }
}

/// BH selection and bound for one observed batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealDataRow {
    pub alpha: f64,
    pub method: String,
    pub k_hat: usize,
    pub bound: f64,
}

/// Applies BH at each α and reports every method's bound at its rejection set.
pub fn real_data_report(
    batch: &PValueBatch,
    alphas: &[f64],
    methods: &[MethodSpec],
    delta: f64,
) -> Result<Vec<RealDataRow>> {
    let sorted = batch.sorted();
    let sizes = path_sizes(&sorted.sorted);
    let mut rows = Vec::new();
    for &alpha in alphas {
        let k_hat = bh_select_sorted(&sorted.sorted, alpha)?;
        for spec in methods {
            if !Method::TOPK.contains(&spec.method) {
                return Err(FdpError::Config(format!("{spec} is not a top-k method")));
            }
            let bound = if spec.interpolated {
                let raw = if spec.adaptive {
                    topk_adaptive_envelope_sorted(spec.method, &sorted.sorted, delta)?.bounds
                } else {
                    topk_bounds(spec.method, &sorted.sorted, delta, batch.m() as f64)?
                };
                if k_hat == 0 { 0.0 } else { interpolate_bounds(&raw, &sizes)?[k_hat - 1] }
            } else {
                bh_fdp_bound_at(spec.method, &sorted.sorted, alpha, delta, spec.adaptive, k_hat)?
            };
            rows.push(RealDataRow { alpha, method: spec.to_string(), k_hat, bound });
        }
    }
    Ok(rows)
}
