//! Run configuration: a flat `section.key = value` text file. `#` starts a
//! comment, blank lines are ignored, later assignments win. Lists are
//! comma separated.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::distill::{DistillPlan, LayerPair};
use crate::error::{Error, Result};
use crate::models::{EncoderSpec, Family};
use crate::synthdata::TaskSpec;

use super::optim::AdamConfig;

pub const SEED_ENV: &str = "CTCD_SEED";

#[derive(Clone, Debug, PartialEq)]
pub struct TaskConfig {
    /// `|Y|`, the space symbol (id 0) included.
    pub alphabet_size: usize,
    pub feature_dim: usize,
    pub template_scale: f64,
    pub duration_min: usize,
    pub duration_max: usize,
    pub noise_std: f64,
    pub silence_prob: f64,
    pub length_min: usize,
    pub length_max: usize,
    pub seed: u64,
    pub train_count: usize,
    pub eval_count: usize,
}

impl Default for TaskConfig {
    fn default() -> Self {
        TaskConfig {
            alphabet_size: 6,
            feature_dim: 8,
            template_scale: 1.0,
            duration_min: 3,
            duration_max: 6,
            noise_std: 1.5,
            silence_prob: 0.2,
            length_min: 3,
            length_max: 8,
            seed: 1,
            train_count: 300,
            eval_count: 200,
        }
    }
}

impl TaskConfig {
    pub fn spec(&self) -> TaskSpec {
        TaskSpec::random(
            self.alphabet_size,
            self.feature_dim,
            self.template_scale,
            (self.duration_min, self.duration_max),
            self.noise_std,
            self.silence_prob,
            (self.length_min, self.length_max),
            self.seed,
        )
    }
}

/// Layer shape shared by both encoder families; `kernels` is read by tdnn
/// encoders only and `bidirectional` by rnn encoders only.
#[derive(Clone, Debug, PartialEq)]
pub struct ArchConfig {
    pub widths: Vec<usize>,
    pub kernels: Vec<usize>,
    pub bidirectional: bool,
}

impl ArchConfig {
    pub fn spec(&self, family: Family, input_dim: usize, classes: usize) -> EncoderSpec {
        match family {
            Family::Tdnn => EncoderSpec::tdnn(input_dim, &self.widths, &self.kernels, classes),
            Family::Rnn => EncoderSpec::rnn(input_dim, &self.widths, self.bidirectional, classes),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Method {
    Baseline,
    SkdOnly,
    Tutornet,
    FrameKd,
    Guided,
    SeqKd,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Baseline,
        Method::SkdOnly,
        Method::Tutornet,
        Method::FrameKd,
        Method::Guided,
        Method::SeqKd,
    ];

    pub fn needs_teacher(self) -> bool {
        self != Method::Baseline
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Baseline => "baseline",
            Method::SkdOnly => "skd-only",
            Method::Tutornet => "tutornet",
            Method::FrameKd => "framekd",
            Method::Guided => "guided",
            Method::SeqKd => "seqkd",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.to_string() == s)
            .ok_or_else(|| Error::config(format!("unknown method `{s}`")))
    }
}

/// Teacher-to-student transfer direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Scenario {
    CnnToRnn,
    CnnToCnn,
    RnnToCnn,
    RnnToRnn,
    /// RKD from the cnn teacher, SKD from the rnn teacher, cnn student.
    MixedToCnn,
}

impl Scenario {
    pub const ALL: [Scenario; 5] = [
        Scenario::CnnToRnn,
        Scenario::CnnToCnn,
        Scenario::RnnToCnn,
        Scenario::RnnToRnn,
        Scenario::MixedToCnn,
    ];

    pub fn student(self) -> Family {
        match self {
            Scenario::CnnToRnn | Scenario::RnnToRnn => Family::Rnn,
            _ => Family::Tdnn,
        }
    }

    pub fn rkd_teacher(self) -> Family {
        match self {
            Scenario::RnnToCnn | Scenario::RnnToRnn => Family::Rnn,
            _ => Family::Tdnn,
        }
    }

    pub fn skd_teacher(self) -> Family {
        match self {
            Scenario::CnnToRnn | Scenario::CnnToCnn => Family::Tdnn,
            _ => Family::Rnn,
        }
    }

    pub fn is_mixed(self) -> bool {
        self.rkd_teacher() != self.skd_teacher()
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::CnnToRnn => "cnn->rnn",
            Scenario::CnnToCnn => "cnn->cnn",
            Scenario::RnnToCnn => "rnn->cnn",
            Scenario::RnnToRnn => "rnn->rnn",
            Scenario::MixedToCnn => "rnn&cnn->cnn",
        })
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|m| m.to_string() == s)
            .ok_or_else(|| Error::config(format!("unknown scenario `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatrixConfig {
    pub seeds: Vec<u64>,
    pub scenarios: Vec<Scenario>,
    /// Methods run for single-teacher scenarios; the mixed scenario runs
    /// `tutornet` only. `baseline` always runs.
    pub methods: Vec<Method>,
    pub teacher_tdnn: Option<PathBuf>,
    pub teacher_rnn: Option<PathBuf>,
}

impl Default for MatrixConfig {
    fn default() -> Self {
        MatrixConfig {
            seeds: vec![1, 2, 3, 4, 5],
            scenarios: Scenario::ALL.to_vec(),
            methods: Method::ALL.to_vec(),
            teacher_tdnn: None,
            teacher_rnn: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub task: TaskConfig,
    /// Dataset files; generated from `task` when absent.
    pub train_data: Option<PathBuf>,
    pub eval_data: Option<PathBuf>,
    pub student_family: Family,
    pub student: ArchConfig,
    pub teacher: ArchConfig,
    pub plan: DistillPlan,
    pub optim: AdamConfig,
    pub batch_size: usize,
    pub stage1_epochs: usize,
    /// Epochs of the supervised stage; a baseline trains for this long.
    pub stage2_epochs: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub matrix: MatrixConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            task: TaskConfig::default(),
            train_data: None,
            eval_data: None,
            student_family: Family::Tdnn,
            student: ArchConfig {
                widths: vec![8, 8, 8],
                kernels: vec![3, 3, 3],
                bidirectional: false,
            },
            teacher: ArchConfig {
                widths: vec![48, 48],
                kernels: vec![5, 5],
                bidirectional: true,
            },
            plan: DistillPlan::default(),
            optim: AdamConfig::default(),
            batch_size: 8,
            stage1_epochs: 5,
            stage2_epochs: 50,
            seed: 1,
            out_dir: PathBuf::from("out"),
            matrix: MatrixConfig::default(),
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::config(format!("{key}: cannot parse `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::config(format!("{key}: expected true or false, got `{value}`"))),
    }
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|x| parse_num(key, x)).collect()
}

fn parse_path(value: &str) -> Option<PathBuf> {
    let v = value.trim();
    (!v.is_empty()).then(|| PathBuf::from(v))
}

fn parse_pairs(key: &str, value: &str) -> Result<Vec<LayerPair>> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value
        .split(',')
        .map(|p| {
            let (t, s) = p
                .split_once(':')
                .ok_or_else(|| Error::config(format!("{key}: expected teacher:student, got `{p}`")))?;
            Ok(LayerPair {
                teacher_layer: parse_num(key, t)?,
                student_layer: parse_num(key, s)?,
            })
        })
        .collect()
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = RunConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                msg: format!("expected `section.key = value`, found `{line}`"),
            })?;
            config.set(key.trim(), value.trim()).map_err(|e| match e {
                Error::Config(msg) => Error::Config(format!("line {}: {msg}", i + 1)),
                other => other,
            })?;
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        RunConfig::parse(&text)
    }

    /// Assigns one `section.key`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let t = &mut self.task;
        match key {
            "task.alphabet_size" => t.alphabet_size = parse_num(key, value)?,
            "task.feature_dim" => t.feature_dim = parse_num(key, value)?,
            "task.template_scale" => t.template_scale = parse_num(key, value)?,
            "task.duration_min" => t.duration_min = parse_num(key, value)?,
            "task.duration_max" => t.duration_max = parse_num(key, value)?,
            "task.noise_std" => t.noise_std = parse_num(key, value)?,
            "task.silence_prob" => t.silence_prob = parse_num(key, value)?,
            "task.length_min" => t.length_min = parse_num(key, value)?,
            "task.length_max" => t.length_max = parse_num(key, value)?,
            "task.seed" => t.seed = parse_num(key, value)?,
            "task.train_count" => t.train_count = parse_num(key, value)?,
            "task.eval_count" => t.eval_count = parse_num(key, value)?,
            "data.train" => self.train_data = parse_path(value),
            "data.eval" => self.eval_data = parse_path(value),
            "student.family" => self.student_family = value.parse()?,
            "student.widths" => self.student.widths = parse_list(key, value)?,
            "student.kernels" => self.student.kernels = parse_list(key, value)?,
            "student.bidirectional" => self.student.bidirectional = parse_bool(key, value)?,
            "teacher.widths" => self.teacher.widths = parse_list(key, value)?,
            "teacher.kernels" => self.teacher.kernels = parse_list(key, value)?,
            "teacher.bidirectional" => self.teacher.bidirectional = parse_bool(key, value)?,
            "kd.skd_teacher" => self.plan.skd_teacher = parse_path(value),
            "kd.rkd_teacher" => self.plan.rkd_teacher = parse_path(value),
            "kd.layer_pairs" => self.plan.layer_pairs = parse_pairs(key, value)?,
            "kd.lambda_skd" => self.plan.lambda_skd = parse_num(key, value)?,
            "kd.tau" => self.plan.tau = parse_num(key, value)?,
            "kd.guided_weight" => self.plan.guided_weight = parse_num(key, value)?,
            "kd.nbest" => self.plan.nbest_n = parse_num(key, value)?,
            "kd.beam_width" => self.plan.beam_width = parse_num(key, value)?,
            "kd.frame_weighting" => self.plan.frame_weighting = parse_bool(key, value)?,
            "optim.lr" => self.optim.lr = parse_num(key, value)?,
            "optim.beta1" => self.optim.beta1 = parse_num(key, value)?,
            "optim.beta2" => self.optim.beta2 = parse_num(key, value)?,
            "optim.eps" => self.optim.eps = parse_num(key, value)?,
            "optim.poly_decay" => self.optim.poly_decay = parse_bool(key, value)?,
            "train.batch_size" => self.batch_size = parse_num(key, value)?,
            "train.stage1_epochs" => self.stage1_epochs = parse_num(key, value)?,
            "train.stage2_epochs" => self.stage2_epochs = parse_num(key, value)?,
            "train.seed" => self.seed = parse_num(key, value)?,
            "train.out_dir" => self.out_dir = PathBuf::from(value),
            "matrix.seeds" => self.matrix.seeds = parse_list(key, value)?,
            "matrix.scenarios" => self.matrix.scenarios = parse_list(key, value)?,
            "matrix.methods" => self.matrix.methods = parse_list(key, value)?,
            "matrix.teacher_tdnn" => self.matrix.teacher_tdnn = parse_path(value),
            "matrix.teacher_rnn" => self.matrix.teacher_rnn = parse_path(value),
            _ => return Err(Error::config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Applies `CTCD_SEED` when set.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.seed = parse_num(SEED_ENV, &v)?;
        }
        Ok(())
    }

    pub fn classes(&self) -> usize {
        self.task.alphabet_size + 1
    }

    pub fn student_spec(&self) -> EncoderSpec {
        self.student_spec_for(self.student_family)
    }

    pub fn student_spec_for(&self, family: Family) -> EncoderSpec {
        self.student.spec(family, self.task.feature_dim, self.classes())
    }

    pub fn teacher_spec_for(&self, family: Family) -> EncoderSpec {
        self.teacher.spec(family, self.task.feature_dim, self.classes())
    }

    pub fn validate(&self) -> Result<()> {
        self.task.spec().validate()?;
        self.student_spec().validate()?;
        self.plan.validate()?;
        self.optim.validate()?;
        if self.batch_size == 0 {
            return Err(Error::config("train.batch_size must be >= 1"));
        }
        Ok(())
    }

    /// Canonical text form; `parse(to_text())` reproduces the config.
    pub fn to_text(&self) -> String {
        let t = &self.task;
        let p = &self.plan;
        let o = &self.optim;
        let m = &self.matrix;
        let pairs: Vec<String> = p
            .layer_pairs
            .iter()
            .map(|lp| format!("{}:{}", lp.teacher_layer, lp.student_layer))
            .collect();
        let lines = [
            ("task.alphabet_size", t.alphabet_size.to_string()),
            ("task.feature_dim", t.feature_dim.to_string()),
            ("task.template_scale", t.template_scale.to_string()),
            ("task.duration_min", t.duration_min.to_string()),
            ("task.duration_max", t.duration_max.to_string()),
            ("task.noise_std", t.noise_std.to_string()),
            ("task.silence_prob", t.silence_prob.to_string()),
            ("task.length_min", t.length_min.to_string()),
            ("task.length_max", t.length_max.to_string()),
            ("task.seed", t.seed.to_string()),
            ("task.train_count", t.train_count.to_string()),
            ("task.eval_count", t.eval_count.to_string()),
            ("data.train", show_path(&self.train_data)),
            ("data.eval", show_path(&self.eval_data)),
            ("student.family", self.student_family.to_string()),
            ("student.widths", join(&self.student.widths)),
            ("student.kernels", join(&self.student.kernels)),
            ("student.bidirectional", self.student.bidirectional.to_string()),
            ("teacher.widths", join(&self.teacher.widths)),
            ("teacher.kernels", join(&self.teacher.kernels)),
            ("teacher.bidirectional", self.teacher.bidirectional.to_string()),
            ("kd.skd_teacher", show_path(&p.skd_teacher)),
            ("kd.rkd_teacher", show_path(&p.rkd_teacher)),
            ("kd.layer_pairs", pairs.join(",")),
            ("kd.lambda_skd", p.lambda_skd.to_string()),
            ("kd.tau", p.tau.to_string()),
            ("kd.guided_weight", p.guided_weight.to_string()),
            ("kd.nbest", p.nbest_n.to_string()),
            ("kd.beam_width", p.beam_width.to_string()),
            ("kd.frame_weighting", p.frame_weighting.to_string()),
            ("optim.lr", o.lr.to_string()),
            ("optim.beta1", o.beta1.to_string()),
            ("optim.beta2", o.beta2.to_string()),
            ("optim.eps", o.eps.to_string()),
            ("optim.poly_decay", o.poly_decay.to_string()),
            ("train.batch_size", self.batch_size.to_string()),
            ("train.stage1_epochs", self.stage1_epochs.to_string()),
            ("train.stage2_epochs", self.stage2_epochs.to_string()),
            ("train.seed", self.seed.to_string()),
            ("train.out_dir", self.out_dir.display().to_string()),
            ("matrix.seeds", join(&m.seeds)),
            ("matrix.scenarios", join(&m.scenarios)),
            ("matrix.methods", join(&m.methods)),
            ("matrix.teacher_tdnn", show_path(&m.teacher_tdnn)),
            ("matrix.teacher_rnn", show_path(&m.teacher_rnn)),
        ];
        lines.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_overrides() {
        let c = RunConfig::parse(
            "# toy run\n\ntrain.seed = 7   # trailing\nkd.lambda_skd=0.5\nstudent.family = rnn\nstudent.widths = 4, 6\nkd.layer_pairs = 1:0\n",
        )
        .unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.plan.lambda_skd, 0.5);
        assert_eq!(c.student_family, Family::Rnn);
        assert_eq!(c.student.widths, vec![4, 6]);
        assert_eq!(
            c.plan.layer_pairs,
            vec![LayerPair {
                teacher_layer: 1,
                student_layer: 0
            }]
        );
    }

    #[test]
    fn unknown_key_is_config_error_with_line() {
        match RunConfig::parse("train.seed = 1\ntrain.sed = 2\n") {
            Err(Error::Config(msg)) => assert!(msg.contains("line 2") && msg.contains("train.sed")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_equals_is_parse_error() {
        assert!(matches!(RunConfig::parse("train.seed 1\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn text_form_round_trips() {
        let mut c = RunConfig::default();
        c.plan.skd_teacher = Some("t.ckpt".into());
        c.matrix.scenarios = vec![Scenario::MixedToCnn];
        c.plan.layer_pairs = vec![LayerPair {
            teacher_layer: 1,
            student_layer: 0,
        }];
        assert_eq!(RunConfig::parse(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
        }
        for s in Scenario::ALL {
            assert_eq!(s.to_string().parse::<Scenario>().unwrap(), s);
        }
        assert_eq!(Scenario::ALL.iter().filter(|s| s.is_mixed()).count(), 1);
    }

    #[test]
    fn validation_catches_bad_values() {
        let mut c = RunConfig::default();
        c.optim.lr = -1.0;
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.batch_size = 0;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        assert!(RunConfig::default().validate().is_ok());
    }
}
