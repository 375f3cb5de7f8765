use super::{GradientForm, MomGdConfig, Repartition, SelectionRecord, StepSchedule, TrainTrace};
use crate::data::{Partition, TrainView};
use crate::error::{check_dim, MomError, Result};
use crate::losses::LossKind;
use crate::model::LinearModel;
use crate::mom::median_index;

/// Adds `sum_i l'(f(x_i), y_i) * (x_i, 1)` over `indices` into `grad`.
#[inline]
pub(super) fn accumulate_gradient(
    view: TrainView<'_>,
    model: &LinearModel,
    loss: LossKind,
    indices: impl Iterator<Item = usize>,
    grad: &mut [f64],
) {
    let p = view.dim();
    for i in indices {
        let x = view.features(i);
        let g = loss.grad_score_unchecked(model.score_unchecked(x), view.label(i));
        for j in 0..p {
            grad[j] += g * x[j];
        }
        grad[p] += g;
    }
}

#[inline]
pub(super) fn block_mean_loss(
    view: TrainView<'_>,
    model: &LinearModel,
    loss: LossKind,
    block: &[usize],
) -> f64 {
    let sum: f64 = block
        .iter()
        .map(|&i| loss.value_unchecked(model.score_unchecked(view.features(i)), view.label(i)))
        .sum();
    sum / block.len() as f64
}

fn apply_step(model: &mut LinearModel, grad: &[f64], eta: f64, t: usize) -> Result<()> {
    let p = model.weights.len();
    for (u, g) in model.weights.iter_mut().zip(grad) {
        *u -= eta * g;
    }
    model.intercept -= eta * grad[p];
    model
        .check_finite()
        .map_err(|_| MomError::numeric(format!("parameters overflowed at step {t}: {model:?}")))
}

fn check_gradient(grad: &[f64], t: usize, what: &str) -> Result<()> {
    if grad.iter().all(|g| g.is_finite()) {
        Ok(())
    } else {
        Err(MomError::numeric(format!(
            "non-finite gradient at step {t} ({what}): {grad:?}"
        )))
    }
}

/// MOM gradient descent for a linear score `<u, x> + b`.
///
/// At step `t` the partition is drawn from `cfg.seed.derive(t)` (or from
/// `cfg.seed.derive(0)` once, with [`Repartition::Fixed`]), the median block
/// of the losses at `u_t` is located, and
/// `u_{t+1} = u_t - eta_t * sum_{i in B_med} grad l(u_t; x_i, y_i)`.
pub fn mom_gd_train(
    view: TrainView<'_>,
    init: &LinearModel,
    cfg: &MomGdConfig,
) -> Result<(LinearModel, TrainTrace)> {
    let n = view.len();
    cfg.validate(n)?;
    check_dim(view.dim(), init.weights.len())?;
    init.check_finite()?;

    let mut model = init.clone();
    let mut grad = vec![0.0; view.dim() + 1];
    let mut block_losses = vec![0.0; cfg.k];
    let mut selections = cfg
        .record_selections
        .then(|| Vec::with_capacity(cfg.iterations));
    let mut iterates = cfg.record_iterates.then(|| {
        let mut v = Vec::with_capacity(cfg.iterations + 1);
        v.push(model.params());
        v
    });

    let fixed = match cfg.repartition {
        Repartition::Fixed => {
            let seed = cfg.seed.derive(0);
            Some((seed, Partition::random(n, cfg.k, &mut seed.rng())?))
        }
        Repartition::EveryStep => None,
    };
    let mut last_partition = None;

    for t in 0..cfg.iterations {
        let (seed, partition) = match &fixed {
            Some((seed, p)) => (*seed, std::borrow::Cow::Borrowed(p)),
            None => {
                let seed = cfg.seed.derive(t as u64);
                (
                    seed,
                    std::borrow::Cow::Owned(Partition::random(n, cfg.k, &mut seed.rng())?),
                )
            }
        };

        for (slot, block) in block_losses.iter_mut().zip(partition.blocks()) {
            *slot = block_mean_loss(view, &model, cfg.loss, block);
        }
        let k_med = median_index(&block_losses);
        let members = partition.block(k_med);

        grad.fill(0.0);
        accumulate_gradient(view, &model, cfg.loss, members.iter().copied(), &mut grad);
        if cfg.gradient == GradientForm::Mean {
            let m = members.len() as f64;
            grad.iter_mut().for_each(|g| *g /= m);
        }
        check_gradient(&grad, t, &format!("median block {k_med}"))?;
        apply_step(&mut model, &grad, cfg.schedule.step(t), t)?;

        if let Some(sel) = selections.as_mut() {
            sel.push(SelectionRecord {
                t,
                partition_seed: seed.value(),
                k_med,
                members: members.to_vec(),
                objective: block_losses[k_med],
            });
        }
        if let Some(it) = iterates.as_mut() {
            it.push(model.params());
        }
        if fixed.is_none() {
            last_partition = Some(partition.into_owned());
        }
    }

    let final_partition = fixed
        .map(|(_, p)| p)
        .or(last_partition)
        .expect("at least one iteration");
    for (slot, block) in block_losses.iter_mut().zip(final_partition.blocks()) {
        *slot = block_mean_loss(view, &model, cfg.loss, block);
    }
    let final_objective = block_losses[median_index(&block_losses)];

    Ok((
        model,
        TrainTrace {
            iterates,
            selections,
            final_objective,
            kernel_evals: None,
        },
    ))
}

/// Full-batch gradient descent on `(1/N) sum_i l(f(x_i), y_i)`.
pub fn erm_gd_train(
    view: TrainView<'_>,
    init: &LinearModel,
    iterations: usize,
    schedule: StepSchedule,
    loss: LossKind,
) -> Result<LinearModel> {
    erm_run(view, init, iterations, schedule, loss, |_| {})
}

/// As [`erm_gd_train`], returning every iterate `u_0, .., u_T`.
pub fn erm_gd_path(
    view: TrainView<'_>,
    init: &LinearModel,
    iterations: usize,
    schedule: StepSchedule,
    loss: LossKind,
) -> Result<Vec<LinearModel>> {
    let mut path = vec![init.clone()];
    erm_run(view, init, iterations, schedule, loss, |m| {
        path.push(m.clone())
    })?;
    Ok(path)
}

fn erm_run(
    view: TrainView<'_>,
    init: &LinearModel,
    iterations: usize,
    schedule: StepSchedule,
    loss: LossKind,
    mut observe: impl FnMut(&LinearModel),
) -> Result<LinearModel> {
    if iterations == 0 {
        return Err(MomError::argument("iteration count T must be at least 1"));
    }
    if !loss.is_differentiable() {
        return Err(MomError::Unsupported(format!(
            "cannot train with the {loss} loss"
        )));
    }
    schedule.validate()?;
    check_dim(view.dim(), init.weights.len())?;
    init.check_finite()?;

    let n = view.len() as f64;
    let mut model = init.clone();
    let mut grad = vec![0.0; view.dim() + 1];
    for t in 0..iterations {
        grad.fill(0.0);
        accumulate_gradient(view, &model, loss, 0..view.len(), &mut grad);
        grad.iter_mut().for_each(|g| *g /= n);
        check_gradient(&grad, t, "full batch")?;
        apply_step(&mut model, &grad, schedule.step(t), t)?;
        observe(&model);
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_gaussians, generate_toy, Dataset, Label};
    use crate::optim::empirical_risk;
    use crate::rng::RngSeed;

    fn two_points() -> Dataset {
        Dataset::new(1, vec![-1.0, 1.0], vec![Label::Negative, Label::Positive]).unwrap()
    }

    #[test]
    fn jittered_start_breaks_the_initial_tie() {
        use crate::optim::{jittered_start, START_SD};
        let a = jittered_start(2, RngSeed(4));
        assert_eq!(a, jittered_start(2, RngSeed(4)));
        assert_ne!(a, jittered_start(2, RngSeed(5)));
        assert!(a
            .params()
            .iter()
            .all(|v| v.abs() < 10.0 * START_SD && *v != 0.0));

        // From zero every block ties and block 0 wins; from the jittered
        // start the first median block is a genuine median.
        let ds = generate_toy(120, 6, RngSeed(6)).unwrap();
        let cfg = MomGdConfig {
            record_selections: true,
            ..MomGdConfig::new(21, 1, LossKind::Logistic, RngSeed(7))
        };
        let (_, zero) = mom_gd_train(ds.view(), &LinearModel::zeros(2), &cfg).unwrap();
        assert_eq!(zero.selections.unwrap()[0].k_med, 0);
        let (_, jit) = mom_gd_train(ds.view(), &a, &cfg).unwrap();
        let first = &jit.selections.unwrap()[0];
        let flags = ds.outlier_flags().unwrap();
        assert!(first.members.iter().all(|&i| !flags[i]));
    }

    #[test]
    fn erm_loss_decreases_on_separable_pair() {
        let ds = two_points();
        let path = erm_gd_path(
            ds.view(),
            &LinearModel::zeros(1),
            50,
            StepSchedule::Constant { eta: 0.1 },
            LossKind::Logistic,
        )
        .unwrap();
        let risks: Vec<f64> = path
            .iter()
            .map(|m| empirical_risk(ds.view(), m, LossKind::Logistic).unwrap())
            .collect();
        assert!(risks.windows(2).all(|w| w[1] < w[0]), "{risks:?}");
    }

    #[test]
    fn erm_zero_gradient_is_fixed_point() {
        let ds = two_points();
        let start = LinearModel::new(vec![5.0], 0.0);
        let end = erm_gd_train(
            ds.view(),
            &start,
            10,
            StepSchedule::Constant { eta: 1.0 },
            LossKind::Hinge,
        )
        .unwrap();
        assert_eq!(end, start);
    }

    #[test]
    fn mom_zero_gradient_is_fixed_point() {
        // Every margin exceeds 1, so the hinge gradient vanishes on any block.
        let ds = Dataset::new(
            1,
            vec![-2.0, -3.0, 2.0, 3.0, -4.0, 5.0],
            vec![
                Label::Negative,
                Label::Negative,
                Label::Positive,
                Label::Positive,
                Label::Negative,
                Label::Positive,
            ],
        )
        .unwrap();
        let start = LinearModel::new(vec![10.0], 0.0);
        let cfg = MomGdConfig::new(3, 1, LossKind::Hinge, RngSeed(3));
        assert_eq!(mom_gd_train(ds.view(), &start, &cfg).unwrap().0, start);
    }

    #[test]
    fn single_block_step_is_full_batch_step() {
        let ds = generate_toy(50, 3, RngSeed(4)).unwrap();
        let init = LinearModel::new(vec![0.2, -0.1], 0.05);
        let mut cfg = MomGdConfig::new(1, 1, LossKind::Logistic, RngSeed(5));
        cfg.schedule = StepSchedule::InverseT { eta0: 0.01 };
        let (mom, _) = mom_gd_train(ds.view(), &init, &cfg).unwrap();

        // Direct oracle: explicit full-batch sum written out by hand.
        let mut oracle = init.params();
        let mut g = [0.0; 3];
        for i in 0..ds.len() {
            let x = ds.features(i);
            let y = ds.label(i).sign();
            let s = init.weights[0] * x[0] + init.weights[1] * x[1] + init.intercept;
            let d = -y / (1.0 + (y * s).exp());
            g[0] += d * x[0];
            g[1] += d * x[1];
            g[2] += d;
        }
        for j in 0..3 {
            oracle[j] -= 0.01 * g[j];
        }
        for (a, b) in mom.params().iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-3), "{a} vs {b}");
        }
    }

    #[test]
    fn argument_errors() {
        let ds = generate_gaussians(10, RngSeed(1)).unwrap();
        let init = LinearModel::zeros(2);
        let too_many = MomGdConfig::new(11, 5, LossKind::Logistic, RngSeed(0));
        assert!(matches!(
            mom_gd_train(ds.view(), &init, &too_many),
            Err(MomError::Argument(_))
        ));
        let zero_one = MomGdConfig::new(2, 5, LossKind::ZeroOne, RngSeed(0));
        assert!(matches!(
            mom_gd_train(ds.view(), &init, &zero_one),
            Err(MomError::Unsupported(_))
        ));
        let ok = MomGdConfig::new(2, 5, LossKind::Logistic, RngSeed(0));
        assert!(mom_gd_train(ds.view(), &LinearModel::zeros(3), &ok).is_err());
        assert!(erm_gd_train(
            ds.view(),
            &init,
            0,
            StepSchedule::default(),
            LossKind::Logistic
        )
        .is_err());
    }

    #[test]
    fn numeric_blow_up_is_reported() {
        let ds = Dataset::new(
            1,
            vec![1e300, -1e300],
            vec![Label::Negative, Label::Positive],
        )
        .unwrap();
        let cfg = MomGdConfig {
            schedule: StepSchedule::Constant { eta: 1e300 },
            ..MomGdConfig::new(1, 3, LossKind::Hinge, RngSeed(0))
        };
        let err = mom_gd_train(ds.view(), &LinearModel::zeros(1), &cfg).unwrap_err();
        assert!(matches!(err, MomError::Numeric(_)), "{err}");
    }

    #[test]
    fn traces_are_recorded_and_deterministic() {
        let ds = generate_toy(100, 5, RngSeed(2)).unwrap();
        let cfg = MomGdConfig {
            record_selections: true,
            record_iterates: true,
            ..MomGdConfig::new(7, 25, LossKind::Logistic, RngSeed(8))
        };
        let (m1, t1) = mom_gd_train(ds.view(), &LinearModel::zeros(2), &cfg).unwrap();
        let (m2, t2) = mom_gd_train(ds.view(), &LinearModel::zeros(2), &cfg).unwrap();
        assert_eq!(m1, m2);
        assert_eq!(t1, t2);
        let sel = t1.selections.unwrap();
        assert_eq!(sel.len(), 25);
        assert!(sel.iter().all(|r| r.members.len() == 15));
        assert_eq!(t1.iterates.unwrap().len(), 26);
    }

    #[test]
    fn fixed_partition_reuses_blocks() {
        let ds = generate_toy(60, 3, RngSeed(2)).unwrap();
        let cfg = MomGdConfig {
            record_selections: true,
            repartition: Repartition::Fixed,
            ..MomGdConfig::new(7, 30, LossKind::Logistic, RngSeed(8))
        };
        let (_, trace) = mom_gd_train(ds.view(), &LinearModel::zeros(2), &cfg).unwrap();
        let sel = trace.selections.unwrap();
        let seed = sel[0].partition_seed;
        assert!(sel.iter().all(|r| r.partition_seed == seed));
        let p = Partition::random(ds.len(), 7, &mut crate::rng::RngSeed(seed).rng()).unwrap();
        assert!(sel.iter().all(|r| r.members == p.block(r.k_med)));
    }
}
