use super::gd::{accumulate_gradient, block_mean_loss};
use crate::data::{Partition, TrainView};
use crate::error::{check_dim, MomError, Result};
use crate::losses::LossKind;
use crate::model::LinearModel;
use crate::mom::median_index;
use crate::rng::RngSeed;

fn check_inputs(
    view: TrainView<'_>,
    model: &LinearModel,
    partition: Option<&Partition>,
) -> Result<()> {
    check_dim(view.dim(), model.weights.len())?;
    model.check_finite()?;
    if let Some(p) = partition {
        check_dim(p.n(), view.len())?;
    }
    Ok(())
}

fn block_losses(
    view: TrainView<'_>,
    model: &LinearModel,
    partition: &Partition,
    loss: LossKind,
) -> Vec<f64> {
    partition
        .blocks()
        .iter()
        .map(|b| block_mean_loss(view, model, loss, b))
        .collect()
}

/// `P_N l_f`, summed in index order.
pub fn empirical_risk(view: TrainView<'_>, model: &LinearModel, loss: LossKind) -> Result<f64> {
    check_inputs(view, model, None)?;
    let sum: f64 = (0..view.len())
        .map(|i| loss.value_unchecked(model.score_unchecked(view.features(i)), view.label(i)))
        .sum();
    Ok(sum / view.len() as f64)
}

/// `MOM_K(l_f)`: the median of the block mean losses.
pub fn mom_objective(
    view: TrainView<'_>,
    model: &LinearModel,
    partition: &Partition,
    loss: LossKind,
) -> Result<f64> {
    check_inputs(view, model, Some(partition))?;
    let means = block_losses(view, model, partition, loss);
    Ok(means[median_index(&means)])
}

/// Monte-Carlo estimate of `E_sigma[MOM_K(l_f) | data]` over `n_mc`
/// partitions drawn from `seed.derive(0..n_mc)`.
pub fn expected_mom_objective(
    view: TrainView<'_>,
    model: &LinearModel,
    k: usize,
    loss: LossKind,
    n_mc: usize,
    seed: RngSeed,
) -> Result<f64> {
    if n_mc == 0 {
        return Err(MomError::argument("n_mc must be at least 1"));
    }
    check_inputs(view, model, None)?;
    let mut total = 0.0;
    for j in 0..n_mc {
        let p = Partition::random(view.len(), k, &mut seed.derive(j as u64).rng())?;
        let means = block_losses(view, model, &p, loss);
        total += means[median_index(&means)];
    }
    Ok(total / n_mc as f64)
}

/// Outcome of [`median_block_gradient_check`].
#[derive(Clone, Debug, PartialEq)]
pub enum GradientCheck {
    Conclusive {
        /// `max_j |a_j - n_j| / max(|a|_inf, |n|_inf)`.
        max_relative_deviation: f64,
        analytic: Vec<f64>,
        numeric: Vec<f64>,
    },
    /// The median block is too close to its neighbours in the order of block
    /// means for a step of `h` to stay inside one cell.
    Inconclusive { gap: f64, required: f64 },
}

impl GradientCheck {
    pub fn deviation(&self) -> Option<f64> {
        match self {
            GradientCheck::Conclusive {
                max_relative_deviation,
                ..
            } => Some(*max_relative_deviation),
            GradientCheck::Inconclusive { .. } => None,
        }
    }
}

/// Compares the median-block gradient `(1/m) sum_{i in B_med} grad l_i`
/// against central differences of [`mom_objective`] on the same partition.
///
/// The comparison is only meaningful when the median stays attached to the
/// same block across `[theta - h, theta + h]`. Block means move by at most
/// `h * G` per coordinate, with `G = max_i |(x_i, 1)|_2` since the surrogate
/// losses are 1-Lipschitz in the score, so the check requires a gap of
/// `10 h G` between the median and the adjacent order statistics and reports
/// [`GradientCheck::Inconclusive`] otherwise.
pub fn median_block_gradient_check(
    view: TrainView<'_>,
    model: &LinearModel,
    partition: &Partition,
    loss: LossKind,
    h: f64,
) -> Result<GradientCheck> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(MomError::argument(format!(
            "finite-difference step must be positive, got {h}"
        )));
    }
    if !loss.is_differentiable() {
        return Err(MomError::Unsupported(format!(
            "the {loss} loss has no gradient"
        )));
    }
    check_inputs(view, model, Some(partition))?;

    let means = block_losses(view, model, partition, loss);
    let k_med = median_index(&means);
    let mut sorted = means.clone();
    sorted.sort_by(f64::total_cmp);
    let rank = (sorted.len() - 1) / 2;
    let below = rank
        .checked_sub(1)
        .map_or(f64::INFINITY, |r| sorted[rank] - sorted[r]);
    let above = sorted
        .get(rank + 1)
        .map_or(f64::INFINITY, |v| v - sorted[rank]);
    let gap = below.min(above);
    let bound = (0..view.len())
        .map(|i| (1.0 + view.features(i).iter().map(|v| v * v).sum::<f64>()).sqrt())
        .fold(0.0, f64::max);
    let required = 10.0 * h * bound;
    if gap.is_nan() || gap <= required {
        return Ok(GradientCheck::Inconclusive { gap, required });
    }

    let members = partition.block(k_med);
    let mut analytic = vec![0.0; view.dim() + 1];
    accumulate_gradient(view, model, loss, members.iter().copied(), &mut analytic);
    let m = members.len() as f64;
    analytic.iter_mut().for_each(|g| *g /= m);

    let theta = model.params();
    let objective_at = |params: &[f64]| -> Result<f64> {
        mom_objective(view, &LinearModel::from_params(params)?, partition, loss)
    };
    let mut numeric = Vec::with_capacity(theta.len());
    for j in 0..theta.len() {
        let mut plus = theta.clone();
        let mut minus = theta.clone();
        plus[j] += h;
        minus[j] -= h;
        numeric.push((objective_at(&plus)? - objective_at(&minus)?) / (2.0 * h));
    }

    let scale = analytic
        .iter()
        .chain(&numeric)
        .fold(f64::MIN_POSITIVE, |acc, v| acc.max(v.abs()));
    let max_relative_deviation = analytic
        .iter()
        .zip(&numeric)
        .map(|(a, n)| (a - n).abs() / scale)
        .fold(0.0, f64::max);
    Ok(GradientCheck::Conclusive {
        max_relative_deviation,
        analytic,
        numeric,
    })
}
