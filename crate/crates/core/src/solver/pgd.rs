use crate::error::{Error, Result};
use crate::matrix::{ConstraintSet, DenseMatrix, Factorization};
use crate::sampling::ObservationSet;

use super::loss::CellTable;
use super::{check_start, enforce_constraints, relative_change, SolveResult, SolverConfig};

/// Projected gradient descent on the factor pair.
///
/// Each iteration takes the joint step `(U - tau G V, V - tau G^T U)` with `G` the
/// gradient of the averaged loss at `U V^T`, rescales both factors if the product
/// leaves the entrywise bound, then projects the rows of both factors. With
/// backtracking enabled a step that would raise the objective is retried at half
/// the step size; the step recovers by doubling (up to the base value) after a
/// step accepted on the first try.
pub fn fit_pgd(obs: &ObservationSet, constraints: &ConstraintSet, cfg: &SolverConfig) -> Result<SolveResult> {
    fit_pgd_from(obs, constraints, cfg, None)
}

/// [`fit_pgd`] from an explicit starting factorization instead of the seeded one.
pub fn fit_pgd_from(
    obs: &ObservationSet,
    constraints: &ConstraintSet,
    cfg: &SolverConfig,
    start: Option<&Factorization>,
) -> Result<SolveResult> {
    let mut f = check_start(start, obs, constraints, cfg)?;
    let table = CellTable::new(obs);
    let base_tau = cfg.step_size(table.n(), table.max_line_count(), constraints.radius());
    let backtrack = cfg.max_halvings > 0;

    let mut loss = table.loss(&f);
    if !loss.is_finite() {
        return Err(Error::Divergence {
            iteration: 0,
            objective: loss,
        });
    }
    let mut trace = vec![loss];
    let mut tau = base_tau;
    let mut iterations = 0;

    for it in 1..=cfg.max_iters {
        let (_, cell_grad) = table.loss_and_cell_grad(&f);
        let (grad_u, grad_v) = factor_gradients(&f, &table, &cell_grad);

        let mut accepted = None;
        let mut any_finite = false;
        for attempt in 0..=cfg.max_halvings {
            let cand = step(&f, &grad_u, &grad_v, tau, constraints);
            let cand_loss = cand.as_ref().map_or(f64::INFINITY, |c| table.loss(c));
            if cand_loss.is_finite() {
                any_finite = true;
                if !backtrack || cand_loss <= loss {
                    accepted = Some((cand, cand_loss, attempt));
                    break;
                }
            } else if !backtrack {
                return Err(Error::Divergence {
                    iteration: it,
                    objective: cand_loss,
                });
            }
            tau *= 0.5;
        }

        let Some((cand, cand_loss, attempt)) = accepted else {
            if !any_finite {
                return Err(Error::Divergence {
                    iteration: it,
                    objective: f64::NAN,
                });
            }
            // No descent at any trial step: the current iterate is stationary to
            // working precision.
            break;
        };

        iterations = it;
        f = cand.expect("accepted candidates are finite");
        trace.push(cand_loss);
        let change = relative_change(loss, cand_loss);
        loss = cand_loss;
        if attempt == 0 {
            tau = (2.0 * tau).min(base_tau);
        }
        if change < cfg.tol {
            break;
        }
    }

    Ok(SolveResult::new(f, trace, iterations, constraints, None))
}

/// `(G V, G^T U)` for the sparse cell gradient `G`.
fn factor_gradients(f: &Factorization, table: &CellTable, cell_grad: &[f64]) -> (DenseMatrix, DenseMatrix) {
    let (d1, d2) = table.shape();
    let k = f.width();
    let mut gu = DenseMatrix::zeros(d1, k);
    let mut gv = DenseMatrix::zeros(d2, k);
    for (&(i, j), &g) in table.cells.iter().zip(cell_grad) {
        if g == 0.0 {
            continue;
        }
        let (ui, vj) = (f.u().row(i), f.v().row(j));
        for (acc, x) in gu.row_mut(i).iter_mut().zip(vj) {
            *acc += g * x;
        }
        for (acc, x) in gv.row_mut(j).iter_mut().zip(ui) {
            *acc += g * x;
        }
    }
    (gu, gv)
}

fn step(
    f: &Factorization,
    grad_u: &DenseMatrix,
    grad_v: &DenseMatrix,
    tau: f64,
    constraints: &ConstraintSet,
) -> Option<Factorization> {
    let axpy = |a: &DenseMatrix, g: &DenseMatrix| {
        DenseMatrix::from_fn(a.rows(), a.cols(), |i, j| a.get(i, j) - tau * g.get(i, j))
    };
    let mut cand = Factorization::new(axpy(f.u(), grad_u), axpy(f.v(), grad_v)).expect("same width");
    if !cand.is_finite() || !enforce_constraints(&mut cand, constraints).is_finite() {
        return None;
    }
    Some(cand)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::Algorithm;

    #[test]
    fn scalar_least_squares() {
        let obs = ObservationSet::new(1, 1, vec![(0, 0)], vec![0.5]).unwrap();
        let c = ConstraintSet::new(1.0, 1.0).unwrap();
        let res = fit_pgd(&obs, &c, &SolverConfig::default()).unwrap();
        assert!((res.completed.get(0, 0) - 0.5).abs() < 1e-6);
        assert!(res.feasible.rows && res.feasible.linf);
    }

    #[test]
    fn huge_fixed_step_without_backtracking_diverges() {
        let obs = ObservationSet::new(2, 2, vec![(0, 0), (1, 1)], vec![1.0, -1.0]).unwrap();
        let c = ConstraintSet::new(1.0, 1.0).unwrap();
        let cfg = SolverConfig {
            tau: Some(1e308),
            max_halvings: 0,
            algorithm: Algorithm::Pgd,
            ..Default::default()
        };
        match fit_pgd(&obs, &c, &cfg) {
            Err(Error::Divergence { iteration, .. }) => assert!(iteration >= 1),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn backtracking_survives_a_huge_step() {
        let obs = ObservationSet::new(2, 2, vec![(0, 0), (1, 1)], vec![1.0, -1.0]).unwrap();
        let c = ConstraintSet::new(1.0, 1.0).unwrap();
        let cfg = SolverConfig {
            tau: Some(1e3),
            ..Default::default()
        };
        let res = fit_pgd(&obs, &c, &cfg).unwrap();
        assert!(res.final_objective() <= res.objective_trace[0]);
    }

    #[test]
    fn explicit_start_is_used() {
        let obs = ObservationSet::new(1, 1, vec![(0, 0)], vec![0.5]).unwrap();
        let c = ConstraintSet::new(1.0, 1.0).unwrap();
        let start = Factorization::new(
            DenseMatrix::from_rows(&[&[0.5]]),
            DenseMatrix::from_rows(&[&[1.0]]),
        )
        .unwrap();
        let res = fit_pgd_from(&obs, &c, &SolverConfig::default(), Some(&start)).unwrap();
        assert_eq!(res.objective_trace[0], 0.0);
    }
}
