use rayon::prelude::*;

use super::loss::{ms_loss_and_grad, MsParams};
use super::mining::{collect_pairs, mine_triplets, similarity_matrix, PairSets};
use super::sampler::{sample_batch, LabelGroups};
use crate::config::TrainConfig;
use crate::encoder::{EncoderParams, Forward, ParamGrad};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::record::NameRecord;
use crate::rng::seeded_rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub loss: f64,
    pub n_triplets: usize,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: EncoderParams,
    pub trace: Vec<StepRecord>,
}

/// `step,loss,n_triplets` with a header line.
pub fn trace_to_csv(trace: &[StepRecord]) -> String {
    let mut out = String::from("step,loss,n_triplets\n");
    for r in trace {
        out.push_str(&format!("{},{:.9},{}\n", r.step, r.loss, r.n_triplets));
    }
    out
}

/// Loss and parameter gradient for a batch of names under fixed pair sets.
///
/// The similarity gradient `G = dL/dS` maps to the embeddings as
/// `dL/dE = (G + Gᵀ) E`, then goes through each name's encoder backward pass.
pub fn loss_and_grad_with_pairs(
    params: &EncoderParams,
    forwards: &[Forward],
    pairs: &PairSets,
    ms: &MsParams,
) -> Result<(f64, ParamGrad), super::loss::NonFiniteLoss> {
    let n = forwards.len();
    let rows: Vec<Vec<f64>> = forwards.iter().map(|f| f.output.clone()).collect();
    let embeddings = Matrix::from_rows(params.dim, &rows);
    let sim = similarity_matrix(&embeddings);
    let (loss, g) = ms_loss_and_grad(&sim, pairs, ms)?;

    let mut grad = ParamGrad::zeros(params.dim);
    let mut grad_row = vec![0.0; params.dim];
    for i in 0..n {
        grad_row.iter_mut().for_each(|x| *x = 0.0);
        for j in 0..n {
            let w = g.get(i, j) + g.get(j, i);
            if w != 0.0 {
                for (gr, e) in grad_row.iter_mut().zip(embeddings.row(j)) {
                    *gr += w * e;
                }
            }
        }
        params.accumulate_backward(&forwards[i], &grad_row, &mut grad);
    }
    Ok((loss, grad))
}

/// Loss of a batch of names under fixed pair sets.
pub fn loss_with_pairs(
    params: &EncoderParams,
    names: &[&str],
    pairs: &PairSets,
    ms: &MsParams,
) -> Result<f64, super::loss::NonFiniteLoss> {
    let embeddings = params.encode_batch(names);
    super::loss::ms_loss(&similarity_matrix(&embeddings), pairs, ms)
}

/// Result of one mined training step.
#[derive(Debug, Clone)]
pub struct StepGrad {
    pub loss: f64,
    pub n_triplets: usize,
    pub grad: Option<ParamGrad>,
}

/// Encodes the batch, mines hard triplets and returns the loss gradient.
/// `grad` is `None` when nothing was mined.
pub fn step_gradient<L: PartialEq + Sync>(
    params: &EncoderParams,
    names: &[&str],
    labels: &[L],
    config: &TrainConfig,
) -> Result<StepGrad, super::loss::NonFiniteLoss> {
    let forwards: Vec<Forward> = names.par_iter().map(|n| params.forward(n)).collect();
    let rows: Vec<Vec<f64>> = forwards.iter().map(|f| f.output.clone()).collect();
    let sim = similarity_matrix(&Matrix::from_rows(params.dim, &rows));
    let triplets = mine_triplets(&sim, labels, config.margin_lambda);
    if triplets.is_empty() {
        return Ok(StepGrad {
            loss: 0.0,
            n_triplets: 0,
            grad: None,
        });
    }
    let pairs = collect_pairs(&triplets, names.len());
    let (loss, grad) = loss_and_grad_with_pairs(params, &forwards, &pairs, &MsParams::from_config(config))?;
    Ok(StepGrad {
        loss,
        n_triplets: triplets.len(),
        grad: Some(grad),
    })
}

/// Number of optimizer steps per epoch: enough batches to draw every label
/// once in expectation.
pub fn steps_per_epoch(n_labels: usize, config: &TrainConfig) -> usize {
    (n_labels * config.names_per_class).div_ceil(config.batch_size)
}

/// Self-alignment training with plain SGD.
///
/// An empty dataset leaves the parameters untouched. Steps that mine no
/// triplets are recorded with loss 0 and skip the update. The batch sampler
/// is seeded from `config.seed`, so two runs with equal inputs are
/// bit-identical.
pub fn train(
    dataset: &[NameRecord],
    config: &TrainConfig,
    initial: EncoderParams,
) -> Result<TrainOutcome> {
    config.validate()?;
    let mut params = initial;
    let mut trace = Vec::new();
    if dataset.is_empty() {
        return Ok(TrainOutcome { params, trace });
    }
    let groups = LabelGroups::new(dataset);
    let mut rng = seeded_rng(config.seed);
    let total_steps = config.epochs * steps_per_epoch(groups.len(), config);
    log::info!(
        "training on {} names / {} labels for {total_steps} steps",
        dataset.len(),
        groups.len()
    );
    for step in 0..total_steps {
        let batch = sample_batch(&groups, &mut rng, config.batch_size, config.names_per_class)?;
        let names: Vec<&str> = batch.records(dataset).map(|r| r.name.as_str()).collect();
        let out = step_gradient(&params, &names, &batch.classes, config)
            .map_err(|_| Error::NonFinite { what: "loss", step })?;
        if let Some(grad) = &out.grad {
            if !grad.is_finite() {
                return Err(Error::NonFinite {
                    what: "gradient",
                    step,
                });
            }
            params.apply_sgd(grad, config.learning_rate);
        }
        trace.push(StepRecord {
            step,
            loss: out.loss,
            n_triplets: out.n_triplets,
        });
        if step % 100 == 0 {
            log::debug!("step {step}: loss {:.6}, {} triplets", out.loss, out.n_triplets);
        }
    }
    Ok(TrainOutcome { params, trace })
}

/// Trains on `stage1` (ontology synonyms), then continues from the result on
/// `stage2` (translation pairs). Each stage seeds its own sampler from
/// `config.seed`; step numbers continue across stages in the trace.
pub fn train_sequential(
    stage1: &[NameRecord],
    stage2: &[NameRecord],
    config: &TrainConfig,
    initial: EncoderParams,
) -> Result<TrainOutcome> {
    let first = train(stage1, config, initial)?;
    let offset = first.trace.len();
    let second = train(stage2, config, first.params)?;
    let mut trace = first.trace;
    trace.extend(second.trace.into_iter().map(|mut r| {
        r.step += offset;
        r
    }));
    Ok(TrainOutcome {
        params: second.params,
        trace,
    })
}
