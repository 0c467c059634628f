use std::time::Instant;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{exponential_decay, RunConfig};
use super::data::{registration_pairs, RegistrationPair, TaskData};
use super::evaluate::{head_accuracy, head_mre, reconstruction_error};
use super::report::{EpochLog, RunReport, Timing};
use crate::autodiff::{Adam, Graph, ParamGrads};
use crate::cloud::{PointCloud, RigidTransform};
use crate::error::{Error, Result};
use crate::features::extract_features;
use crate::heads::{TaskHead, TaskKind};
use crate::losses::{subset_loss_node, task_loss_node, LossWeights, TaskTarget};
use crate::metrics::{mean_rotation_error, ReconMetric};
use crate::sampling::{anneal_softmax, predict_raw_rows, sparsify, truncate_columns, Annealing, LearnedSampler};

/// A head trained on full clouds, with its reference metrics in the report.
#[derive(Debug, Clone)]
pub struct Pretrained {
    pub head: TaskHead,
    pub report: RunReport,
}

/// A trained sampler, the head it was trained against and the loss curve.
#[derive(Debug, Clone)]
pub struct Trained {
    pub sampler: LearnedSampler,
    pub head: TaskHead,
    pub report: RunReport,
}

/// One training example as seen by the loss.
enum Item<'a> {
    Single(&'a PointCloud, TaskTarget),
    Pair(&'a RegistrationPair),
}

fn items<'a>(kind: TaskKind, clouds: &'a [PointCloud], pairs: &'a [RegistrationPair]) -> Result<Vec<Item<'a>>> {
    match kind {
        TaskKind::Classification => clouds
            .iter()
            .map(|c| {
                let label = c.label.ok_or_else(|| Error::config("classification data needs labels"))?;
                Ok(Item::Single(c, TaskTarget::Label(label)))
            })
            .collect(),
        TaskKind::ReconstructionMlp | TaskKind::ReconstructionMfold => Ok(clouds
            .iter()
            .map(|c| Item::Single(c, TaskTarget::Cloud(c.points().clone())))
            .collect()),
        TaskKind::Registration => Ok(pairs.iter().map(Item::Pair).collect()),
    }
}

fn check_finite(value: f64, what: &str, epoch: usize, iteration: usize) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::Divergence(format!(
            "{what} became {value} at epoch {epoch}, iteration {iteration}"
        )))
    }
}

fn batches(len: usize, batch: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..len).collect();
    order.shuffle(rng);
    order.chunks(batch).map(|c| c.to_vec()).collect()
}

fn pairs_for_epoch(config: &RunConfig, clouds: &[PointCloud], epoch: usize) -> Vec<RegistrationPair> {
    if config.task == TaskKind::Registration {
        registration_pairs(clouds, &config.pairs, config.seed.wrapping_add(1000 + epoch as u64))
    } else {
        Vec::new()
    }
}

/// Held-out registration pairs, fixed by the run seed.
pub fn test_pairs(config: &RunConfig, data: &TaskData) -> Vec<RegistrationPair> {
    if config.task == TaskKind::Registration {
        registration_pairs(&data.test, &config.pairs, config.seed.wrapping_add(77))
    } else {
        Vec::new()
    }
}

fn calibration_samples(kind: TaskKind, clouds: &[PointCloud], pairs: &[RegistrationPair]) -> Vec<Array2<f64>> {
    if kind == TaskKind::Registration {
        pairs
            .iter()
            .flat_map(|p| [p.source.points().clone(), p.template.points().clone()])
            .collect()
    } else {
        clouds.iter().map(|c| c.points().clone()).collect()
    }
}

/// Trains a task head on full-resolution clouds.
pub fn pretrain_head(config: &RunConfig, data: &TaskData) -> Result<Pretrained> {
    config.validate()?;
    if data.train.is_empty() {
        return Err(Error::config("no training clouds"));
    }
    if config.task == TaskKind::Classification && data.num_classes() > config.head.num_classes {
        return Err(Error::config(format!(
            "dataset has {} classes but the head predicts {}",
            data.num_classes(),
            config.head.num_classes
        )));
    }
    let started = Instant::now();
    let mut head = TaskHead::new(config.head.clone(), config.seed)?;
    let weights = config.loss_weights();
    let calib_pairs = pairs_for_epoch(config, &data.train, 0);
    head.calibrate(&calibration_samples(config.task, &data.train, &calib_pairs));
    let mut adam = Adam::new(head.store());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9e37_79b9);
    let mut report = RunReport::new(config.task.name(), config.seed);
    let mut iteration = 0;
    let epochs = config.pretrain_epochs;
    for epoch in 0..epochs {
        let lr = exponential_decay(config.pretrain_lr, config.pretrain_lr * 0.05, epoch, epochs);
        let pairs = pairs_for_epoch(config, &data.train, epoch);
        let items = items(config.task, &data.train, &pairs)?;
        let mut epoch_loss = 0.0;
        for batch in batches(items.len(), config.batch_size, &mut rng) {
            let mut grads = ParamGrads::zeros_like(head.store());
            let mut batch_loss = 0.0;
            for &i in &batch {
                let mut g = Graph::new();
                let p = head.store().bind(&mut g, true);
                let loss = match &items[i] {
                    Item::Single(cloud, target) => {
                        let x = g.constant(cloud.points().clone());
                        task_loss_node(&mut g, &head, &p, x, None, target, &weights)?
                    }
                    Item::Pair(pair) => {
                        let x = g.constant(pair.source.points().clone());
                        let t = g.constant(pair.template.points().clone());
                        let target = TaskTarget::Registration {
                            template: Array2::zeros((0, 3)),
                            transform: pair.transform,
                        };
                        task_loss_node(&mut g, &head, &p, x, Some(t), &target, &weights)?
                    }
                };
                batch_loss += g.scalar(loss);
                let gr = g.backward(loss);
                grads.add_from(&p, &gr);
            }
            check_finite(batch_loss, "pretraining loss", epoch, iteration)?;
            grads.scale(1.0 / batch.len() as f64);
            if !grads.is_finite() {
                return Err(Error::Divergence(format!("non-finite gradient at epoch {epoch}")));
            }
            adam.step(head.store_mut(), &grads, lr);
            epoch_loss += batch_loss;
            iteration += 1;
        }
        let mean = epoch_loss / items.len() as f64;
        log::debug!("pretrain epoch {epoch}: loss {mean:.5}");
        report.epochs.push(EpochLog {
            epoch,
            loss: mean,
            task_loss: mean,
            subset_loss: 0.0,
            tau: 0.0,
            lr,
            sparsity: 0.0,
        });
    }
    report.timings.push(Timing {
        stage: "pretrain".into(),
        m: config.n,
        seconds: started.elapsed().as_secs_f64(),
    });
    record_reference(config, &head, data, &mut report)?;
    Ok(Pretrained { head, report })
}

/// Full-cloud reference metrics of a head, used as denominators and baselines.
pub fn record_reference(config: &RunConfig, head: &TaskHead, data: &TaskData, report: &mut RunReport) -> Result<()> {
    let r = &mut report.reference;
    match config.task {
        TaskKind::Classification => {
            r.insert("head_train_accuracy".into(), head_accuracy(head, &data.train)?);
            if !data.test.is_empty() {
                r.insert("head_test_accuracy".into(), head_accuracy(head, &data.test)?);
            }
        }
        TaskKind::ReconstructionMlp | TaskKind::ReconstructionMfold => {
            let clouds = if data.test.is_empty() { &data.train } else { &data.test };
            let [cd, emd] = reconstruction_error(head, clouds)?;
            r.insert("head_cd".into(), cd);
            r.insert("head_emd".into(), emd);
            let mut centroid_cd = 0.0;
            for c in clouds {
                let centroid = c.centroid();
                let single = Array2::from_shape_vec((1, 3), centroid.to_vec()).unwrap();
                centroid_cd += ReconMetric::Chamfer.evaluate(c.view(), single.view())?;
            }
            r.insert("centroid_cd".into(), centroid_cd / clouds.len() as f64);
        }
        TaskKind::Registration => {
            let pairs = test_pairs(config, data);
            if !pairs.is_empty() {
                r.insert("head_mre".into(), head_mre(head, &pairs)?);
                let identity = vec![RigidTransform::identity(); pairs.len()];
                let gt: Vec<_> = pairs.iter().map(|p| p.transform).collect();
                r.insert("identity_mre".into(), mean_rotation_error(&identity, &gt)?);
                let same: Vec<RegistrationPair> = data
                    .test
                    .iter()
                    .map(|c| RegistrationPair {
                        source: c.clone(),
                        template: c.clone(),
                        transform: RigidTransform::identity(),
                    })
                    .collect();
                r.insert("head_identity_pair_mre".into(), head_mre(head, &same)?);
            }
        }
    }
    Ok(())
}

/// Mean nonzero fraction of the sparsified matrix on `probe` at temperature `tau`.
fn probe_sparsity(sampler: &LearnedSampler, probe: &[PointCloud], m: usize, tau: f64, r: f64) -> Result<f64> {
    let mut total = 0.0;
    for c in probe {
        let f = extract_features(c, &sampler.encoder)?;
        let raw = predict_raw_rows(&f, &sampler.sampler)?;
        let mut s = anneal_softmax(&raw, tau)?;
        if m < s.shape().1 {
            s = truncate_columns(&s, m)?;
        }
        total += sparsify(&s, r)?.nonzero_fraction();
    }
    Ok(total / probe.len().max(1) as f64)
}

/// Trains a sampler against `head`. The head is updated only with
/// `joint_training`; otherwise its checksum is verified unchanged.
pub fn train_sampler(config: &RunConfig, mut head: TaskHead, data: &TaskData) -> Result<Trained> {
    config.validate()?;
    if head.kind() != config.task {
        return Err(Error::config(format!("head is {} but the task is {}", head.kind(), config.task)));
    }
    if data.train.is_empty() {
        return Err(Error::config("no training clouds"));
    }
    let started = Instant::now();
    head.frozen = !config.joint_training;
    let head_checksum = head.checksum();
    let mut sampler = LearnedSampler::new(
        &config.encoder_widths,
        &config.rho_hidden,
        config.m_max(),
        config.tau_min,
        config.seed.wrapping_add(17),
    )?;
    sampler.threshold = config.sparsify_threshold;
    sampler.calibrate(&data.train)?;
    let weights: LossWeights = config.loss_weights();

    let per_epoch = data.train.len().div_ceil(config.batch_size);
    let mut annealing = Annealing::new(config.tau_min, per_epoch * config.epochs);
    annealing.decay_fraction = config.anneal_fraction;
    let mut enc_adam = Adam::new(sampler.encoder.store());
    let mut rho_adam = Adam::new(sampler.sampler.store());
    let mut head_adam = Adam::new(head.store());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x0051_ab1e);
    let probe: Vec<PointCloud> = data.train.iter().take(4).cloned().collect();
    let mut report = RunReport::new(config.task.name(), config.seed);
    let mut iteration = 0;

    for epoch in 0..config.epochs {
        let lr = config.learning_rate(epoch);
        let pairs = pairs_for_epoch(config, &data.train, epoch);
        let items = items(config.task, &data.train, &pairs)?;
        let (mut sum_total, mut sum_task, mut sum_subset) = (0.0, 0.0, 0.0);
        for batch in batches(items.len(), config.batch_size, &mut rng) {
            let tau = annealing.temperature(iteration);
            let m = if config.flexible {
                config.m_set[rng.random_range(0..config.m_set.len())]
            } else {
                config.m
            };
            let mut enc_grads = ParamGrads::zeros_like(sampler.encoder.store());
            let mut rho_grads = ParamGrads::zeros_like(sampler.sampler.store());
            let mut head_grads = ParamGrads::zeros_like(head.store());
            for &i in &batch {
                let mut g = Graph::new();
                let e = sampler.encoder.store().bind(&mut g, true);
                let s = sampler.sampler.store().bind(&mut g, true);
                let h = head.store().bind(&mut g, config.joint_training);
                let (source, q, template, target) = match &items[i] {
                    Item::Single(cloud, target) => {
                        let x = g.constant(cloud.points().clone());
                        let (_, q) = sampler.forward(&mut g, &e, &s, x, m, tau);
                        (x, q, None, target.clone())
                    }
                    Item::Pair(pair) => {
                        let x = g.constant(pair.source.points().clone());
                        let (_, q) = sampler.forward(&mut g, &e, &s, x, m, tau);
                        let t = g.constant(pair.template.points().clone());
                        let (_, qt) = sampler.forward(&mut g, &e, &s, t, m, tau);
                        let target = TaskTarget::Registration {
                            template: Array2::zeros((0, 3)),
                            transform: pair.transform,
                        };
                        (x, q, Some((t, qt)), target)
                    }
                };
                let task = task_loss_node(&mut g, &head, &h, q, template.map(|(_, qt)| qt), &target, &weights)?;
                let mut subset = subset_loss_node(&mut g, source, q);
                if let Some((t, qt)) = template {
                    let other = subset_loss_node(&mut g, t, qt);
                    let both = g.add(subset, other);
                    subset = g.scale(both, 0.5);
                }
                let scaled = g.scale(subset, weights.alpha);
                let total = g.add(task, scaled);
                sum_task += g.scalar(task);
                sum_subset += g.scalar(subset);
                sum_total += g.scalar(total);
                check_finite(g.scalar(total), "training loss", epoch, iteration)?;
                let gr = g.backward(total);
                enc_grads.add_from(&e, &gr);
                rho_grads.add_from(&s, &gr);
                if config.joint_training {
                    head_grads.add_from(&h, &gr);
                }
            }
            let scale = 1.0 / batch.len() as f64;
            for grads in [&mut enc_grads, &mut rho_grads, &mut head_grads] {
                grads.scale(scale);
                if !grads.is_finite() {
                    return Err(Error::Divergence(format!(
                        "non-finite gradient at epoch {epoch}, iteration {iteration}"
                    )));
                }
            }
            enc_adam.step(sampler.encoder.store_mut(), &enc_grads, lr);
            rho_adam.step(sampler.sampler.store_mut(), &rho_grads, lr);
            if config.joint_training {
                head_adam.step(head.store_mut(), &head_grads, lr);
            }
            iteration += 1;
        }
        let count = items.len() as f64;
        let tau = annealing.temperature(iteration.saturating_sub(1));
        let sparsity = probe_sparsity(&sampler, &probe, config.m_max(), tau, config.sparsify_threshold)?;
        log::debug!(
            "epoch {epoch}: loss {:.5} task {:.5} subset {:.6} tau {tau:.3} sparsity {sparsity:.4}",
            sum_total / count,
            sum_task / count,
            sum_subset / count
        );
        report.epochs.push(EpochLog {
            epoch,
            loss: sum_total / count,
            task_loss: sum_task / count,
            subset_loss: sum_subset / count,
            tau,
            lr,
            sparsity,
        });
    }
    if !config.joint_training && head.checksum() != head_checksum {
        return Err(Error::config("frozen head changed during training"));
    }
    report.timings.push(Timing {
        stage: "train".into(),
        m: config.m_max(),
        seconds: started.elapsed().as_secs_f64(),
    });
    Ok(Trained { sampler, head, report })
}
