//! Hyperparameters, presets and the flat `key = value` config format.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, IoContext, Result};
use crate::gce::AblationVariant;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NegativeSampling {
    Uniform,
    /// Log-uniform over popularity rank.
    LogUniform,
}

impl FromStr for NegativeSampling {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "uniform" => Ok(Self::Uniform),
            "log_uniform" => Ok(Self::LogUniform),
            other => Err(format!("unknown sampling `{other}` (uniform|log_uniform)")),
        }
    }
}

impl NegativeSampling {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Uniform => "uniform",
            Self::LogUniform => "log_uniform",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    AmazonBooks,
    AmazonHybrid,
    TaobaoBuy,
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "amazon-books" => Ok(Self::AmazonBooks),
            "amazon-hybrid" => Ok(Self::AmazonHybrid),
            "taobao-buy" => Ok(Self::TaobaoBuy),
            other => Err(format!(
                "unknown preset `{other}` (amazon-books|amazon-hybrid|taobao-buy)"
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HyperParams {
    pub a: f64,
    pub b: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Number of interests.
    pub k: usize,
    pub l_rec: usize,
    pub l_time: usize,
    pub d: usize,
    /// Attention heads.
    pub h: usize,
    pub l_layer: usize,
    pub batch: usize,
    pub neg_samples: usize,
    pub max_steps: usize,
    pub lr: f64,
    pub dropout: f64,
    pub time_unit_seconds: i64,
    pub variant: AblationVariant,
    pub seed: u64,
    pub residual: bool,
    pub allow_self_pairs: bool,
    pub sampling: NegativeSampling,
    /// Validation cadence in steps; 0 evaluates only at the start and end.
    pub eval_every: usize,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self::preset(Preset::AmazonBooks)
    }
}

impl HyperParams {
    pub fn preset(preset: Preset) -> Self {
        let base = Self {
            a: 0.65,
            b: 0.35,
            alpha: 4.5,
            beta: 2.0,
            gamma: 1.0,
            k: 4,
            l_rec: 20,
            l_time: 64,
            d: 64,
            h: 4,
            l_layer: 3,
            batch: 128,
            neg_samples: 10,
            max_steps: 5000,
            lr: 0.001,
            dropout: 0.1,
            time_unit_seconds: 86_400,
            variant: AblationVariant::Full,
            seed: 0,
            residual: false,
            allow_self_pairs: true,
            sampling: NegativeSampling::Uniform,
            eval_every: 500,
        };
        match preset {
            Preset::AmazonBooks => base,
            Preset::AmazonHybrid => Self {
                a: 0.5,
                b: 0.5,
                alpha: 5.0,
                beta: 2.5,
                gamma: 1.0,
                ..base
            },
            Preset::TaobaoBuy => Self {
                a: 0.6,
                b: 0.4,
                alpha: 5.0,
                beta: 3.0,
                gamma: 1.0,
                k: 8,
                l_time: 7,
                l_rec: 50,
                batch: 256,
                ..base
            },
        }
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
            value.parse().map_err(|_| Error::Config {
                key: key.to_owned(),
                reason: format!("cannot parse `{value}`"),
            })
        }
        fn parse_bool(key: &str, value: &str) -> Result<bool> {
            match value {
                "true" | "1" | "yes" | "on" => Ok(true),
                "false" | "0" | "no" | "off" => Ok(false),
                _ => Err(Error::Config {
                    key: key.to_owned(),
                    reason: format!("expected a boolean, got `{value}`"),
                }),
            }
        }
        let value = value.trim();
        match key.trim() {
            "a" => self.a = parse(key, value)?,
            "b" => self.b = parse(key, value)?,
            "alpha" => self.alpha = parse(key, value)?,
            "beta" => self.beta = parse(key, value)?,
            "gamma" => self.gamma = parse(key, value)?,
            "k" | "K" => self.k = parse(key, value)?,
            "l_rec" => self.l_rec = parse(key, value)?,
            "l_time" => self.l_time = parse(key, value)?,
            "d" => self.d = parse(key, value)?,
            "h" | "heads" => self.h = parse(key, value)?,
            "l_layer" => self.l_layer = parse(key, value)?,
            "batch" => self.batch = parse(key, value)?,
            "neg_samples" => self.neg_samples = parse(key, value)?,
            "max_steps" => self.max_steps = parse(key, value)?,
            "lr" => self.lr = parse(key, value)?,
            "dropout" => self.dropout = parse(key, value)?,
            "time_unit_seconds" => self.time_unit_seconds = parse(key, value)?,
            "variant" => {
                self.variant = value.parse().map_err(|reason| Error::Config {
                    key: key.to_owned(),
                    reason,
                })?
            }
            "seed" => self.seed = parse(key, value)?,
            "residual" => self.residual = parse_bool(key, value)?,
            "allow_self_pairs" => self.allow_self_pairs = parse_bool(key, value)?,
            "sampling" => {
                self.sampling = value.parse().map_err(|reason| Error::Config {
                    key: key.to_owned(),
                    reason,
                })?
            }
            "eval_every" => self.eval_every = parse(key, value)?,
            other => {
                return Err(Error::Config {
                    key: other.to_owned(),
                    reason: "unknown key".into(),
                })
            }
        }
        Ok(())
    }

    /// Applies `key = value` lines. Blank lines and `#` comments are ignored.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Config {
                key: line.to_owned(),
                reason: "expected `key = value`".into(),
            })?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, reason: &str| {
            Err(Error::Config {
                key: key.to_owned(),
                reason: reason.to_owned(),
            })
        };
        if (self.a + self.b - 1.0).abs() > 1e-9 {
            return bad("a", "a+b must equal 1");
        }
        if self.a < 0.0 || self.b < 0.0 {
            return bad("a", "a and b must be non-negative");
        }
        if self.k == 0 {
            return bad("k", "K must be at least 1");
        }
        if self.l_time == 0 {
            return bad("l_time", "L_time must be at least 1");
        }
        if self.l_rec == 0 {
            return bad("l_rec", "L_rec must be at least 1");
        }
        if self.l_layer == 0 {
            return bad("l_layer", "L_layer must be at least 1");
        }
        if self.d == 0 {
            return bad("d", "d must be positive");
        }
        if self.h == 0 || self.d % self.h != 0 {
            return bad("h", "d must be divisible by the head count");
        }
        if self.batch == 0 {
            return bad("batch", "batch must be positive");
        }
        if self.neg_samples == 0 {
            return bad("neg_samples", "need at least one negative sample");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout", "dropout must lie in [0, 1)");
        }
        if !(self.lr >= 0.0) {
            return bad("lr", "learning rate must be non-negative");
        }
        if self.time_unit_seconds <= 0 {
            return bad("time_unit_seconds", "time unit must be positive");
        }
        if self.alpha < 0.0 || self.beta < 0.0 || self.gamma < 0.0 {
            return bad("alpha", "hop weights must be non-negative");
        }
        if !(self.alpha >= self.beta && self.beta >= self.gamma && self.gamma > 0.0) {
            log::warn!(
                "hop weights alpha={} beta={} gamma={} do not satisfy alpha >= beta >= gamma > 0",
                self.alpha,
                self.beta,
                self.gamma
            );
        }
        Ok(())
    }

    /// Serializes every field as `key = value` lines; `apply_text` reads it back.
    pub fn to_kv_string(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("a", self.a.to_string());
        put("b", self.b.to_string());
        put("alpha", self.alpha.to_string());
        put("beta", self.beta.to_string());
        put("gamma", self.gamma.to_string());
        put("k", self.k.to_string());
        put("l_rec", self.l_rec.to_string());
        put("l_time", self.l_time.to_string());
        put("d", self.d.to_string());
        put("h", self.h.to_string());
        put("l_layer", self.l_layer.to_string());
        put("batch", self.batch.to_string());
        put("neg_samples", self.neg_samples.to_string());
        put("max_steps", self.max_steps.to_string());
        put("lr", self.lr.to_string());
        put("dropout", self.dropout.to_string());
        put("time_unit_seconds", self.time_unit_seconds.to_string());
        put("variant", self.variant.as_str().to_owned());
        put("seed", self.seed.to_string());
        put("residual", self.residual.to_string());
        put("allow_self_pairs", self.allow_self_pairs.to_string());
        put("sampling", self.sampling.as_str().to_owned());
        put("eval_every", self.eval_every.to_string());
        s
    }
}

/// Environment variable that overrides the seed (between file and flags).
pub const SEED_ENV: &str = "GIMI_SEED";

/// Resolves defaults ← preset ← file ← `GIMI_SEED` ← overrides, then validates.
pub fn load_config(
    preset: Option<Preset>,
    path: Option<&Path>,
    overrides: &[(String, String)],
) -> Result<HyperParams> {
    let mut hp = preset.map(HyperParams::preset).unwrap_or_default();
    if let Some(path) = path {
        let text = fs::read_to_string(path).with_path(path)?;
        hp.apply_text(&text)?;
    }
    if let Ok(seed) = std::env::var(SEED_ENV) {
        hp.set("seed", &seed)?;
    }
    for (k, v) in overrides {
        hp.set(k, v)?;
    }
    hp.validate()?;
    Ok(hp)
}

/// Splits `key=value` strings.
pub fn parse_overrides(items: &[String]) -> Result<Vec<(String, String)>> {
    items
        .iter()
        .map(|s| {
            s.split_once('=')
                .map(|(k, v)| (k.trim().to_owned(), v.trim().to_owned()))
                .ok_or_else(|| Error::Config {
                    key: s.clone(),
                    reason: "expected key=value".into(),
                })
        })
        .collect()
}
