use nalgebra::{DMatrix, DVector};

use super::{FastKlrConfig, SelectionRecord, TrainTrace};
use crate::data::{Label, Partition, TrainView};
use crate::error::{check_dim, MomError, Result};
use crate::losses::{sigmoid, LossKind};
use crate::model::{BlockKernels, CountingKernel, KernelModel};
use crate::mom::median_index;

const WEIGHT_FLOOR: f64 = 1e-10;
const JITTER_TRIES: usize = 6;

fn mean_log_loss(scores: &DVector<f64>, labels: &[Label]) -> f64 {
    let sum: f64 = scores
        .iter()
        .zip(labels)
        .map(|(&s, &y)| LossKind::Logistic.value_unchecked(s, y))
        .sum();
    sum / labels.len() as f64
}

/// Solves `A a = rhs` for symmetric positive semi-definite `A` by Cholesky,
/// adding a growing diagonal jitter when the factorization fails.
fn spd_solve(a: DMatrix<f64>, rhs: &DVector<f64>, t: usize) -> Result<DVector<f64>> {
    if let Some(ch) = a.clone().cholesky() {
        return Ok(ch.solve(rhs));
    }
    let scale = a
        .diagonal()
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1.0);
    let mut jitter = 1e-12 * scale;
    for _ in 0..JITTER_TRIES {
        let mut damped = a.clone();
        for i in 0..damped.nrows() {
            damped[(i, i)] += jitter;
        }
        if let Some(ch) = damped.cholesky() {
            return Ok(ch.solve(rhs));
        }
        jitter *= 100.0;
    }
    Err(MomError::numeric(format!(
        "IRLS normal matrix is not positive definite at step {t}, even with jitter {jitter:e}"
    )))
}

/// One IRLS target on a block of `m` points: returns `a` solving
/// `(G W G + 2 m beta G) a = G W (z - offset)` where `s` are the current
/// scores of the block, `offset` the part of `s` not produced by the block's
/// own coefficients, `W = diag(pi (1 - pi))` and `z = s + (y' - pi) / W`.
/// Without offset this is the Newton step on
/// `(1/m) sum_i l(s_i, y_i) + beta a^T G a`.
fn irls_target(
    gram: &DMatrix<f64>,
    scores: &DVector<f64>,
    offset: Option<&DVector<f64>>,
    labels: &[Label],
    beta: f64,
    t: usize,
) -> Result<DVector<f64>> {
    let m = labels.len();
    let mut w = DVector::zeros(m);
    let mut z = DVector::zeros(m);
    for i in 0..m {
        let pi = sigmoid(scores[i]);
        let wi = (pi * (1.0 - pi)).max(WEIGHT_FLOOR);
        w[i] = wi;
        z[i] = scores[i] + (labels[i].indicator() - pi) / wi;
    }
    if let Some(off) = offset {
        z -= off;
    }
    // G W, with W diagonal: scale the columns of G.
    let mut gw = gram.clone();
    for (j, mut col) in gw.column_iter_mut().enumerate() {
        col *= w[j];
    }
    let mut a = &gw * gram;
    a += gram * (2.0 * m as f64 * beta);
    let rhs = &gw * z;
    let sol = spd_solve(a, &rhs, t)?;
    if sol.iter().all(|v| v.is_finite()) {
        Ok(sol)
    } else {
        Err(MomError::numeric(format!(
            "non-finite IRLS solution at step {t}"
        )))
    }
}

/// Fast KLR MOM with a partition drawn from `cfg.seed.derive(0)`.
pub fn fast_klr_mom_train(
    view: TrainView<'_>,
    cfg: &FastKlrConfig,
) -> Result<(KernelModel, TrainTrace)> {
    cfg.validate(view.len())?;
    let partition = Partition::random(view.len(), cfg.k, &mut cfg.seed.derive(0).rng())?;
    fast_klr_mom_train_with_partition(view, cfg, partition)
}

/// Fast KLR MOM on a given partition.
///
/// The `K` block Gram matrices are built once and every score is computed
/// from its own block, so no kernel entry across two blocks is ever
/// evaluated. At step `t` the block with the median mean log-loss takes the
/// damped IRLS step `alpha^med <- (1 - eta_t) alpha^med + eta_t a` and every
/// other block shrinks to `(1 - eta_t) alpha^k`.
pub fn fast_klr_mom_train_with_partition(
    view: TrainView<'_>,
    cfg: &FastKlrConfig,
    partition: Partition,
) -> Result<(KernelModel, TrainTrace)> {
    cfg.validate(view.len())?;
    check_dim(view.len(), partition.n())?;
    if partition.k() != cfg.k {
        return Err(MomError::argument(format!(
            "partition has {} blocks but the config asks for {}",
            partition.k(),
            cfg.k
        )));
    }
    let counter = CountingKernel::new(cfg.kernel, view, &partition)?;
    let kernels = BlockKernels::build_with(&counter, &partition);
    let labels: Vec<Vec<Label>> = partition
        .blocks()
        .iter()
        .map(|b| b.iter().map(|&i| view.label(i)).collect())
        .collect();
    let m = partition.block_size();
    let mut alpha: Vec<DVector<f64>> = vec![DVector::zeros(m); cfg.k];
    let mut selections = cfg.record_selections.then(Vec::new);

    let evaluate = |alpha: &[DVector<f64>]| {
        let scores: Vec<DVector<f64>> = alpha
            .iter()
            .enumerate()
            .map(|(k, a)| kernels.matrix(k) * a)
            .collect();
        let fit: Vec<f64> = scores
            .iter()
            .zip(&labels)
            .map(|(s, y)| mean_log_loss(s, y))
            .collect();
        let penalty: f64 = alpha.iter().zip(&scores).map(|(a, s)| a.dot(s)).sum();
        (scores, fit, cfg.beta * penalty)
    };

    for t in 0..cfg.iterations {
        let (scores, fit, penalty) = evaluate(&alpha);
        let k_med = median_index(&fit);
        let eta = cfg.schedule.step(t);
        if let Some(sel) = selections.as_mut() {
            sel.push(SelectionRecord {
                t,
                partition_seed: cfg.seed.derive(0).value(),
                k_med,
                members: partition.block(k_med).to_vec(),
                objective: fit[k_med] + penalty,
            });
        }
        if eta == 0.0 {
            continue;
        }
        let target = irls_target(
            kernels.matrix(k_med),
            &scores[k_med],
            None,
            &labels[k_med],
            cfg.beta,
            t,
        )?;
        for (k, a) in alpha.iter_mut().enumerate() {
            *a *= 1.0 - eta;
            if k == k_med {
                a.axpy(eta, &target, 1.0);
            }
        }
    }

    let (_, fit, penalty) = evaluate(&alpha);
    let final_objective = fit[median_index(&fit)] + penalty;
    let mut full = vec![0.0; view.len()];
    for (k, a) in alpha.iter().enumerate() {
        for (&i, &v) in partition.block(k).iter().zip(a.iter()) {
            full[i] = v;
        }
    }
    let trace = TrainTrace {
        selections,
        final_objective,
        kernel_evals: Some(counter.stats()),
        ..Default::default()
    };
    Ok((KernelModel::new(full, cfg.kernel, partition, view)?, trace))
}

/// KLR MOM on the full `N x N` Gram matrix.
///
/// Scores use every coefficient, `s = G alpha`, and the partition is redrawn
/// from `cfg.seed.derive(t)` at every step. The median block `B` takes the
/// damped IRLS step on `alpha_B` with the rest of the expansion held as an
/// offset; every other coefficient shrinks by `1 - eta_t`. This is the
/// reference the block variant is timed against.
pub fn klr_mom_full_train(
    view: TrainView<'_>,
    cfg: &FastKlrConfig,
) -> Result<(KernelModel, TrainTrace)> {
    cfg.validate(view.len())?;
    let n = view.len();
    let reference = Partition::random(n, cfg.k, &mut cfg.seed.derive(0).rng())?;
    let counter = CountingKernel::new(cfg.kernel, view, &reference)?;
    let mut gram = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = counter.eval_pair(i, j);
            gram[(i, j)] = v;
            gram[(j, i)] = v;
        }
    }
    let labels: Vec<Label> = (0..n).map(|i| view.label(i)).collect();
    let mut alpha = DVector::zeros(n);
    let mut selections = cfg.record_selections.then(Vec::new);

    let block_fits = |scores: &DVector<f64>, partition: &Partition| -> Vec<f64> {
        partition
            .blocks()
            .iter()
            .map(|b| {
                let sum: f64 = b
                    .iter()
                    .map(|&i| LossKind::Logistic.value_unchecked(scores[i], labels[i]))
                    .sum();
                sum / b.len() as f64
            })
            .collect()
    };

    for t in 0..cfg.iterations {
        let seed = cfg.seed.derive(t as u64);
        let partition = if t == 0 {
            reference.clone()
        } else {
            Partition::random(n, cfg.k, &mut seed.rng())?
        };
        let scores = &gram * &alpha;
        let fit = block_fits(&scores, &partition);
        let k_med = median_index(&fit);
        let members = partition.block(k_med);
        let eta = cfg.schedule.step(t);
        if let Some(sel) = selections.as_mut() {
            sel.push(SelectionRecord {
                t,
                partition_seed: seed.value(),
                k_med,
                members: members.to_vec(),
                objective: fit[k_med] + cfg.beta * alpha.dot(&scores),
            });
        }
        if eta == 0.0 {
            continue;
        }
        let sub = gram
            .select_rows(members.iter())
            .select_columns(members.iter());
        let a_b = DVector::from_iterator(members.len(), members.iter().map(|&i| alpha[i]));
        let s_b = DVector::from_iterator(members.len(), members.iter().map(|&i| scores[i]));
        let offset = &s_b - &sub * &a_b;
        let y_b: Vec<Label> = members.iter().map(|&i| labels[i]).collect();
        let target = irls_target(&sub, &s_b, Some(&offset), &y_b, cfg.beta, t)?;
        alpha *= 1.0 - eta;
        for (c, &i) in members.iter().enumerate() {
            alpha[i] += eta * target[c];
        }
    }

    let scores = &gram * &alpha;
    let last = Partition::random(n, cfg.k, &mut cfg.seed.derive(cfg.iterations as u64).rng())?;
    let fit = block_fits(&scores, &last);
    let trace = TrainTrace {
        selections,
        final_objective: fit[median_index(&fit)] + cfg.beta * alpha.dot(&scores),
        kernel_evals: Some(counter.stats()),
        ..Default::default()
    };
    let whole = Partition::contiguous(n, 1)?;
    Ok((
        KernelModel::new(alpha.as_slice().to_vec(), cfg.kernel, whole, view)?,
        trace,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_toy, Dataset, ToyParams};
    use crate::model::{Classifier, KernelSpec};
    use crate::optim::StepSchedule;
    use crate::rng::RngSeed;

    fn fixture12() -> Dataset {
        let x = vec![
            0.2, 1.1, -0.7, 0.4, 1.5, -0.3, 0.9, 0.8, -1.2, -0.6, 0.1, -1.4, 1.3, 0.6, -0.2, 0.3,
            0.7, -0.9, -1.1, 1.0, 0.4, 0.05, -0.5, -0.8,
        ];
        let y = [1, -1, 1, 1, -1, -1, 1, 1, -1, 1, -1, -1]
            .iter()
            .map(|&v| Label::try_from(v as f64).unwrap())
            .collect();
        Dataset::new(2, x, y).unwrap()
    }

    fn config(k: usize, iterations: usize, kernel: KernelSpec, eta: f64) -> FastKlrConfig {
        FastKlrConfig {
            k,
            iterations,
            schedule: StepSchedule::Constant { eta },
            beta: 1e-2,
            kernel,
            seed: RngSeed(4),
            record_selections: true,
        }
    }

    #[test]
    fn frozen_update_keeps_zero_start() {
        let ds = fixture12();
        let (model, trace) = fast_klr_mom_train(
            ds.view(),
            &config(3, 10, KernelSpec::rbf(0.5).unwrap(), 0.0),
        )
        .unwrap();
        assert!(model.alpha().iter().all(|&a| a == 0.0));
        assert_eq!(trace.selections.unwrap().len(), 10);
    }

    #[test]
    fn single_block_log_loss_is_monotone() {
        let ds = fixture12();
        let cfg = config(1, 1, KernelSpec::rbf(0.5).unwrap(), 1.0);
        let mut prev = f64::INFINITY;
        for iters in 1..=20 {
            let cfg = FastKlrConfig {
                iterations: iters,
                ..cfg.clone()
            };
            let (_, trace) = fast_klr_mom_train(ds.view(), &cfg).unwrap();
            let obj = trace.final_objective;
            assert!(obj <= prev + 1e-12, "step {iters}: {obj} > {prev}");
            prev = obj;
        }
    }

    #[test]
    fn separable_linear_kernel() {
        let params = ToyParams {
            positive_mean: [-3.0, -3.0],
            negative_mean: [3.0, 3.0],
            inlier_variance: 0.5,
            ..ToyParams::default()
        };
        let train = crate::data::generate_toy_with(&params, 400, 0, RngSeed(1)).unwrap();
        let test = crate::data::generate_toy_with(&params, 500, 0, RngSeed(2)).unwrap();
        let cfg = FastKlrConfig {
            k: 5,
            iterations: 30,
            kernel: KernelSpec::Linear,
            ..FastKlrConfig::default()
        };
        let (model, trace) = fast_klr_mom_train(train.view(), &cfg).unwrap();
        let correct = (0..test.len())
            .filter(|&i| model.predict(test.features(i)).unwrap() == test.label(i))
            .count();
        assert!(correct as f64 / test.len() as f64 >= 0.95);
        assert_eq!(trace.kernel_evals.unwrap().cross_block, 0);
    }

    #[test]
    fn no_cross_block_evaluations() {
        let ds = generate_toy(97, 6, RngSeed(3)).unwrap();
        let cfg = config(7, 15, KernelSpec::rbf(0.2).unwrap(), 0.5);
        let (model, trace) = fast_klr_mom_train(ds.view(), &cfg).unwrap();
        let stats = trace.kernel_evals.unwrap();
        assert_eq!(stats.cross_block, 0);
        // Upper triangles of 7 blocks of 14.
        assert_eq!(stats.total, 7 * 14 * 15 / 2);
        for i in model.partition().dropped() {
            assert_eq!(model.alpha()[i], 0.0);
        }
    }

    #[test]
    fn deterministic() {
        let ds = generate_toy(60, 3, RngSeed(8)).unwrap();
        let cfg = config(3, 12, KernelSpec::rbf(0.3).unwrap(), 0.7);
        let a = fast_klr_mom_train(ds.view(), &cfg).unwrap();
        let b = fast_klr_mom_train(ds.view(), &cfg).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
        let c = klr_mom_full_train(ds.view(), &cfg).unwrap();
        let d = klr_mom_full_train(ds.view(), &cfg).unwrap();
        assert_eq!(c.0, d.0);
        assert_eq!(c.1, d.1);
    }

    #[test]
    fn full_variant_learns_toy() {
        let train = generate_toy(200, 0, RngSeed(9)).unwrap();
        let test = generate_toy(300, 0, RngSeed(10)).unwrap();
        let cfg = FastKlrConfig {
            k: 5,
            iterations: 40,
            kernel: KernelSpec::rbf(0.5).unwrap(),
            ..FastKlrConfig::default()
        };
        let (model, trace) = klr_mom_full_train(train.view(), &cfg).unwrap();
        assert!(trace.kernel_evals.unwrap().cross_block > 0);
        let correct = (0..test.len())
            .filter(|&i| model.predict(test.features(i)).unwrap() == test.label(i))
            .count();
        assert!(correct as f64 / test.len() as f64 >= 0.8);
    }

    #[test]
    fn mismatched_partition_is_rejected() {
        let ds = fixture12();
        let p = Partition::contiguous(12, 4).unwrap();
        assert!(fast_klr_mom_train_with_partition(
            ds.view(),
            &config(3, 2, KernelSpec::Linear, 0.5),
            p
        )
        .is_err());
    }
}
