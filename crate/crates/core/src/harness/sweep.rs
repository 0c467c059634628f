use super::config::RunConfig;
use super::data::TaskData;
use super::evaluate::{classification_accuracy, reconstruction_nre, registration_mre};
use super::report::RunReport;
use super::train::{test_pairs, train_sampler};
use crate::cloud::SetKind;
use crate::error::Result;
use crate::heads::{TaskHead, TaskKind};

/// Label of one sweep point, used as the method name of its metric cells.
pub fn sweep_label(alpha: f64, tau_min: f64) -> String {
    format!("alpha={alpha},tau_min={tau_min}")
}

/// Trains one sampler per `(alpha, tau_min)` pair against the same head and
/// records the generated-set task metric of each at `config.m`.
pub fn sweep(config: &RunConfig, head: &TaskHead, data: &TaskData, alphas: &[f64], tau_mins: &[f64]) -> Result<RunReport> {
    let mut report = RunReport::new(format!("sweep-{}", config.task), config.seed);
    let pairs = test_pairs(config, data);
    for &alpha in alphas {
        for &tau_min in tau_mins {
            let mut c = config.clone();
            c.alpha = alpha;
            c.tau_min = tau_min;
            let trained = train_sampler(&c, head.clone(), data)?;
            let label = sweep_label(alpha, tau_min);
            let (metric, value) = match config.task {
                TaskKind::Classification => (
                    "accuracy",
                    classification_accuracy(&trained.head, &data.test, &trained.sampler, c.m)?[0],
                ),
                TaskKind::ReconstructionMlp | TaskKind::ReconstructionMfold => (
                    "nre_cd",
                    reconstruction_nre(&trained.head, &data.test, &trained.sampler, c.m)?[0][0],
                ),
                TaskKind::Registration => ("mre", registration_mre(&trained.head, &pairs, &trained.sampler, c.m)?[0]),
            };
            log::info!("{label}: {metric} = {value:.4}");
            report.push_metric(&label, c.m, SetKind::Generated, metric, value);
        }
    }
    Ok(report)
}
