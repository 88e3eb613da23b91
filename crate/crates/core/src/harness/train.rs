use std::path::Path;
use std::time::Instant;

use log::{info, warn};

use crate::ctc::{ctc_loss, LabelSeq, PosteriorGrid};
use crate::distill::{
    combined_loss, frame_kd_loss, guided_loss, guided_mask, rkd_loss, seq_kd_targets, skd_loss, LayerPair,
    RkdTerm,
};
use crate::error::{Error, Result};
use crate::models::{Adapter, Checkpoint, Encoder, EncoderSpec, TrainingMeta};
use crate::numcore::{DenseArray, Rng, Tape, Var};
use crate::synthdata::{generate, read_dataset, Dataset, Utterance};

use super::config::{Method, RunConfig};
use super::eval::{evaluate, EvalReport};
use super::optim::Adam;

const INIT_STREAM: u64 = 0x11;
const ADAPTER_STREAM: u64 = 0x22;
const STAGE1_STREAM: u64 = 0x33;
const STAGE2_STREAM: u64 = 0x44;
const TRAIN_DATA_STREAM: u64 = 0x55;
const EVAL_DATA_STREAM: u64 = 0x66;

/// One optimizer step of the supervised stage.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepLoss {
    pub ctc: f64,
    /// Unweighted auxiliary loss (SKD, frame KD or guided); 0 without one.
    pub aux: f64,
    /// `ctc + weight · aux`, the optimised value.
    pub total: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub method: Method,
    pub seed: u64,
    /// Training utterances whose target needs more frames than they have.
    pub skipped: usize,
    pub aux_weight: f64,
    /// Stage-1 L_RKD per step and per epoch (batch means).
    pub rkd_steps: Vec<f64>,
    pub rkd_epochs: Vec<f64>,
    /// Mean L_RKD over the training set before and after stage 1.
    pub rkd_initial: Option<f64>,
    pub rkd_final: Option<f64>,
    pub steps: Vec<StepLoss>,
    pub epochs: Vec<StepLoss>,
    pub eval: Option<EvalReport>,
    pub wall_clock_secs: f64,
}

pub struct TrainOutcome {
    pub encoder: Encoder,
    pub report: RunReport,
}

impl TrainOutcome {
    pub fn checkpoint(&self) -> Checkpoint {
        self.encoder.to_checkpoint(TrainingMeta {
            stage: self.report.method.to_string(),
            epoch: self.report.epochs.len() as u64,
            seed: self.report.seed,
        })
    }
}

/// Training and held-out data named by the config, generated when no
/// files are given.
pub fn load_data(config: &RunConfig) -> Result<(Dataset, Dataset)> {
    let spec = config.task.spec();
    let task_rng = Rng::new(config.task.seed);
    let train = match &config.train_data {
        Some(p) => read_dataset(p)?,
        None => generate(&spec, config.task.train_count, "train", &mut task_rng.fork(TRAIN_DATA_STREAM))?,
    };
    let eval = match &config.eval_data {
        Some(p) => read_dataset(p)?,
        None => generate(&spec, config.task.eval_count, "eval", &mut task_rng.fork(EVAL_DATA_STREAM))?,
    };
    for d in [&train, &eval] {
        if d.alphabet_size != config.task.alphabet_size || d.feature_dim != config.task.feature_dim {
            return Err(Error::config(format!(
                "dataset has |Y|={} D_in={}, config says |Y|={} D_in={}",
                d.alphabet_size, d.feature_dim, config.task.alphabet_size, config.task.feature_dim
            )));
        }
    }
    Ok((train, eval))
}

pub fn load_teacher(path: &Path, config: &RunConfig, role: &str) -> Result<Encoder> {
    if !path.exists() {
        return Err(Error::config(format!("{role} teacher {} does not exist", path.display())));
    }
    let teacher = Encoder::from_checkpoint(&Checkpoint::load(path)?)?;
    let spec = teacher.spec();
    if spec.input_dim != config.task.feature_dim || spec.classes != config.classes() {
        return Err(Error::config(format!(
            "{role} teacher {} is {}x{}, task needs {}x{}",
            path.display(),
            spec.input_dim,
            spec.classes,
            config.task.feature_dim,
            config.classes()
        )));
    }
    Ok(teacher)
}

fn feasible(data: &Dataset) -> (Vec<&Utterance>, usize) {
    let kept: Vec<&Utterance> = data.utterances.iter().filter(|u| u.is_expressible()).collect();
    let skipped = data.len() - kept.len();
    if skipped > 0 {
        warn!("skipping {skipped} utterances with inexpressible targets");
    }
    (kept, skipped)
}

fn batches(order: &[usize], size: usize) -> impl Iterator<Item = &[usize]> {
    order.chunks(size)
}

fn student_params(student: &mut Encoder) -> Vec<&mut DenseArray> {
    student.params_mut().iter_mut().collect()
}

fn collect_grads<'g>(grads: &'g crate::numcore::Gradients, vars: &[Var]) -> Vec<&'g DenseArray> {
    vars.iter()
        .map(|&v| grads.get(v).expect("trainable leaf has a gradient"))
        .collect()
}

/// Per-utterance supervised objective: `(ctc, aux)` on the tape.
trait Objective {
    fn weight(&self) -> f64;
    fn terms(&self, tape: &mut Tape, utt: usize, logits: Var) -> Result<(Var, Option<Var>)>;
}

struct CtcOnly {
    targets: Vec<LabelSeq>,
}

impl Objective for CtcOnly {
    fn weight(&self) -> f64 {
        0.0
    }

    fn terms(&self, tape: &mut Tape, utt: usize, logits: Var) -> Result<(Var, Option<Var>)> {
        Ok((ctc_loss(tape, logits, &self.targets[utt])?, None))
    }
}

enum Aux {
    Skd { teacher_logits: Vec<DenseArray>, tau: f64 },
    FrameKd { teacher: Vec<PosteriorGrid> },
    Guided { masks: Vec<DenseArray> },
}

struct WithAux {
    targets: Vec<LabelSeq>,
    aux: Aux,
    weight: f64,
}

impl Objective for WithAux {
    fn weight(&self) -> f64 {
        self.weight
    }

    fn terms(&self, tape: &mut Tape, utt: usize, logits: Var) -> Result<(Var, Option<Var>)> {
        let ctc = ctc_loss(tape, logits, &self.targets[utt])?;
        let aux = match &self.aux {
            Aux::Skd { teacher_logits, tau } => skd_loss(tape, &teacher_logits[utt], logits, *tau)?,
            Aux::FrameKd { teacher } => frame_kd_loss(tape, &teacher[utt], logits)?,
            Aux::Guided { masks } => guided_loss(tape, &masks[utt], logits, 1.0)?,
        };
        Ok((ctc, Some(aux)))
    }
}

/// `Σ_k w_k · L_CTC(hyp_k)` over the teacher's renormalised n-best.
struct SeqKd {
    nbest: Vec<Vec<(LabelSeq, f64)>>,
}

impl Objective for SeqKd {
    fn weight(&self) -> f64 {
        0.0
    }

    fn terms(&self, tape: &mut Tape, utt: usize, logits: Var) -> Result<(Var, Option<Var>)> {
        let mut total: Option<Var> = None;
        for (seq, w) in &self.nbest[utt] {
            let l = ctc_loss(tape, logits, seq)?;
            let l = tape.scale(l, *w)?;
            total = Some(match total {
                Some(acc) => tape.add(acc, l)?,
                None => l,
            });
        }
        Ok((total.expect("n-best is never empty"), None))
    }
}

fn supervised_stage(
    config: &RunConfig,
    student: &mut Encoder,
    data: &[&Utterance],
    objective: &dyn Objective,
    report: &mut RunReport,
) -> Result<()> {
    let mut rng = Rng::new(config.seed).fork(STAGE2_STREAM);
    let per_epoch = data.len().div_ceil(config.batch_size);
    let mut opt = Adam::new(
        config.optim.clone(),
        &student.params().iter().collect::<Vec<_>>(),
        per_epoch * config.stage2_epochs,
    );
    let mut order: Vec<usize> = (0..data.len()).collect();
    let weight = objective.weight();
    for epoch in 0..config.stage2_epochs {
        rng.shuffle(&mut order);
        let mut sum = StepLoss {
            ctc: 0.0,
            aux: 0.0,
            total: 0.0,
        };
        let mut count = 0usize;
        for batch in batches(&order, config.batch_size) {
            let mut tape = Tape::new();
            let bound = student.bind(&mut tape, true);
            let mut ctc_sum: Option<Var> = None;
            let mut aux_sum: Option<Var> = None;
            for &i in batch {
                let x = tape.constant(data[i].features.clone());
                let out = student.forward(&mut tape, &bound, x)?;
                let (ctc, aux) = objective.terms(&mut tape, i, out.logits)?;
                ctc_sum = Some(match ctc_sum {
                    Some(acc) => tape.add(acc, ctc)?,
                    None => ctc,
                });
                if let Some(a) = aux {
                    aux_sum = Some(match aux_sum {
                        Some(acc) => tape.add(acc, a)?,
                        None => a,
                    });
                }
            }
            let inv = 1.0 / batch.len() as f64;
            let ctc_mean = tape.scale(ctc_sum.expect("non-empty batch"), inv)?;
            let (root, aux_value) = match aux_sum {
                Some(a) => {
                    let aux_mean = tape.scale(a, inv)?;
                    (combined_loss(&mut tape, ctc_mean, aux_mean, weight)?, tape.value(aux_mean).item())
                }
                None => (ctc_mean, 0.0),
            };
            let step = StepLoss {
                ctc: tape.value(ctc_mean).item(),
                aux: aux_value,
                total: tape.value(root).item(),
            };
            let grads = tape.backward(root)?;
            opt.update(&mut student_params(student), &collect_grads(&grads, &bound));
            report.steps.push(step);
            sum.ctc += step.ctc;
            sum.aux += step.aux;
            sum.total += step.total;
            count += 1;
        }
        let n = count.max(1) as f64;
        let mean = StepLoss {
            ctc: sum.ctc / n,
            aux: sum.aux / n,
            total: sum.total / n,
        };
        info!(
            "{} seed {} epoch {}: ctc {:.4} aux {:.4} total {:.4}",
            report.method, report.seed, epoch + 1, mean.ctc, mean.aux, mean.total
        );
        report.epochs.push(mean);
    }
    Ok(())
}

fn resolve_pairs(plan_pairs: &[LayerPair], teacher: &EncoderSpec, student: &EncoderSpec) -> Result<Vec<LayerPair>> {
    let pairs = if plan_pairs.is_empty() {
        vec![LayerPair {
            teacher_layer: teacher.depth() - 1,
            student_layer: student.depth() - 1,
        }]
    } else {
        plan_pairs.to_vec()
    };
    for p in &pairs {
        if p.teacher_layer >= teacher.depth() || p.student_layer >= student.depth() {
            return Err(Error::config(format!(
                "layer pair {}:{} outside teacher depth {} / student depth {}",
                p.teacher_layer,
                p.student_layer,
                teacher.depth(),
                student.depth()
            )));
        }
    }
    Ok(pairs)
}

struct RkdSetup<'a> {
    data: &'a [&'a Utterance],
    /// Teacher hidden layer per utterance, one entry per pair.
    teacher_hidden: Vec<Vec<DenseArray>>,
    pairs: Vec<LayerPair>,
    frame_weighting: bool,
}

impl RkdSetup<'_> {
    fn batch_loss(&self, tape: &mut Tape, student: &Encoder, bound: &[Var], adapters: &[crate::models::AdapterVars], batch: &[usize]) -> Result<Var> {
        let mut total: Option<Var> = None;
        for &i in batch {
            let x = tape.constant(self.data[i].features.clone());
            let out = student.forward(tape, bound, x)?;
            let terms: Vec<RkdTerm<'_>> = self
                .pairs
                .iter()
                .enumerate()
                .map(|(k, p)| RkdTerm {
                    teacher: &self.teacher_hidden[i][k],
                    student: out.hidden[p.student_layer],
                    adapter: &adapters[k],
                })
                .collect();
            let l = rkd_loss(tape, &terms, self.frame_weighting)?;
            total = Some(match total {
                Some(acc) => tape.add(acc, l)?,
                None => l,
            });
        }
        tape.scale(total.expect("non-empty batch"), 1.0 / batch.len() as f64)
    }

    /// Mean per-utterance L_RKD over the whole set.
    fn full_pass(&self, student: &Encoder, adapters: &[Adapter]) -> Result<f64> {
        let mut tape = Tape::new();
        let bound = student.bind(&mut tape, false);
        let vars: Vec<_> = adapters.iter().map(|a| a.bind(&mut tape, false)).collect();
        let all: Vec<usize> = (0..self.data.len()).collect();
        let mut sum = 0.0;
        for chunk in all.chunks(64) {
            let l = self.batch_loss(&mut tape, student, &bound, &vars, chunk)?;
            sum += tape.value(l).item() * chunk.len() as f64;
        }
        Ok(sum / self.data.len() as f64)
    }
}

fn rkd_stage(config: &RunConfig, student: &mut Encoder, setup: &RkdSetup<'_>, teacher_spec: &EncoderSpec, report: &mut RunReport) -> Result<()> {
    let mut adapter_rng = Rng::new(config.seed).fork(ADAPTER_STREAM);
    let mut adapters: Vec<Adapter> = setup
        .pairs
        .iter()
        .map(|p| {
            Adapter::new(
                student.spec().hidden_width(p.student_layer),
                teacher_spec.hidden_width(p.teacher_layer),
                &mut adapter_rng,
            )
        })
        .collect();
    report.rkd_initial = Some(setup.full_pass(student, &adapters)?);
    let mut rng = Rng::new(config.seed).fork(STAGE1_STREAM);
    let per_epoch = setup.data.len().div_ceil(config.batch_size);
    let shapes: Vec<&DenseArray> = student
        .params()
        .iter()
        .chain(adapters.iter().flat_map(|a| [&a.weight, &a.bias]))
        .collect();
    let mut opt = Adam::new(config.optim.clone(), &shapes, per_epoch * config.stage1_epochs);
    let mut order: Vec<usize> = (0..setup.data.len()).collect();
    for epoch in 0..config.stage1_epochs {
        rng.shuffle(&mut order);
        let mut sum = 0.0;
        let mut count = 0usize;
        for batch in batches(&order, config.batch_size) {
            let mut tape = Tape::new();
            let bound = student.bind(&mut tape, true);
            let adapter_vars: Vec<_> = adapters.iter().map(|a| a.bind(&mut tape, true)).collect();
            let root = setup.batch_loss(&mut tape, student, &bound, &adapter_vars, batch)?;
            let value = tape.value(root).item();
            let grads = tape.backward(root)?;
            let mut vars = bound.clone();
            vars.extend(adapter_vars.iter().flat_map(|a| [a.weight, a.bias]));
            let mut params: Vec<&mut DenseArray> = student.params_mut().iter_mut().collect();
            params.extend(adapters.iter_mut().flat_map(|a| [&mut a.weight, &mut a.bias]));
            opt.update(&mut params, &collect_grads(&grads, &vars));
            report.rkd_steps.push(value);
            sum += value;
            count += 1;
        }
        let mean = sum / count.max(1) as f64;
        info!("rkd seed {} epoch {}: {:.4}", report.seed, epoch + 1, mean);
        report.rkd_epochs.push(mean);
    }
    report.rkd_final = Some(setup.full_pass(student, &adapters)?);
    Ok(())
}

fn new_report(method: Method, seed: u64, skipped: usize) -> RunReport {
    RunReport {
        method,
        seed,
        skipped,
        aux_weight: 0.0,
        rkd_steps: Vec::new(),
        rkd_epochs: Vec::new(),
        rkd_initial: None,
        rkd_final: None,
        steps: Vec::new(),
        epochs: Vec::new(),
        eval: None,
        wall_clock_secs: 0.0,
    }
}

fn init_student(config: &RunConfig) -> Result<Encoder> {
    Encoder::build(config.student_spec(), &mut Rng::new(config.seed).fork(INIT_STREAM))
}

fn targets(config: &RunConfig, data: &[&Utterance]) -> Result<Vec<LabelSeq>> {
    data.iter()
        .map(|u| LabelSeq::new(u.labels.clone(), config.task.alphabet_size))
        .collect()
}

fn finish(config: &RunConfig, encoder: Encoder, mut report: RunReport, eval: &Dataset, started: Instant) -> Result<TrainOutcome> {
    if !eval.is_empty() {
        report.eval = Some(evaluate(&encoder, eval, config.task.spec().space_id)?);
    }
    report.wall_clock_secs = started.elapsed().as_secs_f64();
    Ok(TrainOutcome { encoder, report })
}

/// CTC-only training on the ground truth.
pub fn train_baseline(config: &RunConfig, train: &Dataset, eval: &Dataset) -> Result<TrainOutcome> {
    config.validate()?;
    let started = Instant::now();
    let (data, skipped) = feasible(train);
    let mut student = init_student(config)?;
    let mut report = new_report(Method::Baseline, config.seed, skipped);
    let objective = CtcOnly {
        targets: targets(config, &data)?,
    };
    supervised_stage(config, &mut student, &data, &objective, &mut report)?;
    finish(config, student, report, eval, started)
}

fn teacher_logits(teacher: &Encoder, data: &[&Utterance]) -> Result<Vec<DenseArray>> {
    data.iter().map(|u| Ok(teacher.infer(&u.features)?.logits)).collect()
}

/// Stage 1 matches representations through an adapter (skipped with zero
/// stage-1 epochs); stage 2 trains `L_CTC + λ·L_SKD` from the result.
pub fn train_two_stage(config: &RunConfig, train: &Dataset, eval: &Dataset) -> Result<TrainOutcome> {
    config.validate()?;
    let started = Instant::now();
    let method = if config.stage1_epochs == 0 {
        Method::SkdOnly
    } else {
        Method::Tutornet
    };
    let skd_path = config
        .plan
        .skd_teacher
        .as_ref()
        .ok_or_else(|| Error::config("kd.skd_teacher is required for the SKD stage"))?;
    let skd_teacher = load_teacher(skd_path, config, "skd")?;
    let (data, skipped) = feasible(train);
    let mut student = init_student(config)?;
    let mut report = new_report(method, config.seed, skipped);
    if config.stage1_epochs > 0 {
        let rkd_path = config
            .plan
            .rkd_teacher
            .as_ref()
            .ok_or_else(|| Error::config("kd.rkd_teacher is required when train.stage1_epochs > 0"))?;
        let rkd_teacher = load_teacher(rkd_path, config, "rkd")?;
        let pairs = resolve_pairs(&config.plan.layer_pairs, rkd_teacher.spec(), student.spec())?;
        let teacher_hidden = data
            .iter()
            .map(|u| {
                let hidden = rkd_teacher.infer(&u.features)?.hidden;
                Ok(pairs.iter().map(|p| hidden[p.teacher_layer].clone()).collect())
            })
            .collect::<Result<Vec<_>>>()?;
        let setup = RkdSetup {
            data: &data,
            teacher_hidden,
            pairs,
            frame_weighting: config.plan.frame_weighting,
        };
        rkd_stage(config, &mut student, &setup, rkd_teacher.spec(), &mut report)?;
    }
    let objective = WithAux {
        targets: targets(config, &data)?,
        aux: Aux::Skd {
            teacher_logits: teacher_logits(&skd_teacher, &data)?,
            tau: config.plan.tau,
        },
        weight: config.plan.lambda_skd,
    };
    report.aux_weight = objective.weight;
    supervised_stage(config, &mut student, &data, &objective, &mut report)?;
    finish(config, student, report, eval, started)
}

/// Frame-level KD, guided CTC or sequence-level KD against the SKD teacher.
pub fn train_baseline_kd(config: &RunConfig, method: Method, train: &Dataset, eval: &Dataset) -> Result<TrainOutcome> {
    config.validate()?;
    let started = Instant::now();
    let teacher_path = config
        .plan
        .skd_teacher
        .as_ref()
        .ok_or_else(|| Error::config(format!("kd.skd_teacher is required for {method}")))?;
    let teacher = load_teacher(teacher_path, config, "skd")?;
    let (data, skipped) = feasible(train);
    let mut student = init_student(config)?;
    let mut report = new_report(method, config.seed, skipped);
    let grids = teacher_logits(&teacher, &data)?
        .iter()
        .map(PosteriorGrid::from_logits)
        .collect::<Result<Vec<_>>>()?;
    let objective: Box<dyn Objective> = match method {
        Method::FrameKd => Box::new(WithAux {
            targets: targets(config, &data)?,
            aux: Aux::FrameKd { teacher: grids },
            weight: config.plan.lambda_skd,
        }),
        Method::Guided => Box::new(WithAux {
            targets: targets(config, &data)?,
            aux: Aux::Guided {
                masks: grids.iter().map(guided_mask).collect(),
            },
            weight: config.plan.guided_weight,
        }),
        Method::SeqKd => Box::new(SeqKd {
            nbest: grids
                .iter()
                .map(|g| seq_kd_targets(g, config.plan.nbest_n, config.plan.beam_width.max(config.plan.nbest_n)))
                .collect::<Result<_>>()?,
        }),
        other => {
            return Err(Error::Usage(format!(
                "{other} is not a single-stage KD baseline"
            )))
        }
    };
    report.aux_weight = objective.weight();
    supervised_stage(config, &mut student, &data, objective.as_ref(), &mut report)?;
    finish(config, student, report, eval, started)
}

/// Dispatches on `method`.
pub fn train(config: &RunConfig, method: Method, train: &Dataset, eval: &Dataset) -> Result<TrainOutcome> {
    match method {
        Method::Baseline => train_baseline(config, train, eval),
        Method::SkdOnly => {
            let mut c = config.clone();
            c.stage1_epochs = 0;
            train_two_stage(&c, train, eval)
        }
        Method::Tutornet => {
            if config.stage1_epochs == 0 {
                return Err(Error::config("tutornet needs train.stage1_epochs > 0"));
            }
            train_two_stage(config, train, eval)
        }
        Method::FrameKd | Method::Guided | Method::SeqKd => train_baseline_kd(config, method, train, eval),
    }
}
