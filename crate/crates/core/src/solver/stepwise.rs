use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::matrix::{dot, ConstraintSet, Factorization};
use crate::rng::{stream, Stream};
use crate::sampling::ObservationSet;

use super::loss::CellTable;
use super::project::{linf_rescale_in_place, project_row};
use super::{check_start, relative_change, SolveResult, SolverConfig};

/// Stepwise gradient: one gradient step on `(U_i . V_j - y)^2` per distinct observed cell.
///
/// Cells drawn more than once are visited once per epoch with their values averaged.
/// After each step the touched entry is pulled back to `|U_i . V_j| <= alpha` by
/// scaling both rows, and each touched row is projected to squared norm `<= R`.
/// Only the visited entry is controlled by the per-step rescale, so each epoch ends
/// with a global entrywise rescale. Epoch order is a seeded shuffle.
pub fn fit_stepwise(obs: &ObservationSet, constraints: &ConstraintSet, cfg: &SolverConfig) -> Result<SolveResult> {
    fit_stepwise_from(obs, constraints, cfg, None)
}

/// [`fit_stepwise`] from an explicit starting factorization.
pub fn fit_stepwise_from(
    obs: &ObservationSet,
    constraints: &ConstraintSet,
    cfg: &SolverConfig,
    start: Option<&Factorization>,
) -> Result<SolveResult> {
    let mut f = check_start(start, obs, constraints, cfg)?;
    let table = CellTable::new(obs);
    let tau = cfg.step_size(table.n(), table.max_line_count(), constraints.radius());
    let (alpha, radius) = (constraints.alpha(), constraints.radius());
    let targets: Vec<f64> = table
        .sums
        .iter()
        .zip(&table.counts)
        .map(|(s, &c)| s / c as f64)
        .collect();

    let mut loss = table.loss(&f);
    if !loss.is_finite() {
        return Err(Error::Divergence {
            iteration: 0,
            objective: loss,
        });
    }
    let mut trace = vec![loss];
    let mut order: Vec<usize> = (0..table.cells.len()).collect();
    let mut rng = stream(cfg.seed, Stream::SolverOrder);
    let mut audit = cfg.audit.then_some(0.0_f64);
    let k = f.width();
    let mut ui = vec![0.0; k];
    let mut vj = vec![0.0; k];
    let mut epochs_run = 0;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for &c in &order {
            let (i, j) = table.cells[c];
            let (u, v) = f.parts_mut();
            ui.copy_from_slice(u.row(i));
            vj.copy_from_slice(v.row(j));
            let resid = 2.0 * (dot(&ui, &vj) - targets[c]);
            for t in 0..k {
                let (a, b) = (ui[t], vj[t]);
                ui[t] = a - tau * resid * b;
                vj[t] = b - tau * resid * a;
            }
            let p = dot(&ui, &vj).abs();
            if !p.is_finite() {
                return Err(Error::Divergence {
                    iteration: epoch,
                    objective: f64::NAN,
                });
            }
            if p > alpha {
                let s = (alpha / p).sqrt();
                ui.iter_mut().for_each(|x| *x *= s);
                vj.iter_mut().for_each(|x| *x *= s);
            }
            project_row(&mut ui, radius);
            project_row(&mut vj, radius);
            u.row_mut(i).copy_from_slice(&ui);
            v.row_mut(j).copy_from_slice(&vj);
            if let Some(m) = audit.as_mut() {
                *m = m.max(dot(&ui, &ui)).max(dot(&vj, &vj));
            }
        }
        let pre = linf_rescale_in_place(&mut f, alpha);

        let cur = table.loss(&f);
        if !cur.is_finite() || !pre.is_finite() {
            return Err(Error::Divergence {
                iteration: epoch,
                objective: cur,
            });
        }
        trace.push(cur);
        epochs_run = epoch;
        let change = relative_change(loss, cur);
        loss = cur;
        if change < cfg.tol {
            break;
        }
    }

    Ok(SolveResult::new(f, trace, epochs_run, constraints, audit))
}
