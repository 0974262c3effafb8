//! `key = value` pipeline configuration.

use std::fmt::Write as _;
use std::str::FromStr;

use reldesc_core::spectral::RankPolicy;
use reldesc_core::{Protocol, SelectionMethod, SynthConfig, TrainConfig};

use crate::files::parse_key_values;

/// Everything a pipeline run depends on. The default is the pinned
/// synthetic benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub synth: SynthConfig,
    pub train: TrainConfig,
    pub select_method: SelectionMethod,
    pub select_n: usize,
    /// Only used by random selection.
    pub select_seed: u64,
    pub reduce_k: usize,
    pub rank_policy: RankPolicy,
    pub protocol: Protocol,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            synth: SynthConfig::default(),
            train: TrainConfig {
                orl_coefficient: 0.0,
                seed: 11,
                ..TrainConfig::default()
            },
            select_method: SelectionMethod::Fas,
            select_n: 96,
            select_seed: 0,
            reduce_k: 64,
            rank_policy: RankPolicy::Keep,
            protocol: Protocol::default(),
        }
    }
}

fn policy_str(p: RankPolicy) -> &'static str {
    match p {
        RankPolicy::Keep => "keep",
        RankPolicy::Truncate => "truncate",
    }
}

pub fn parse_policy(s: &str) -> Option<RankPolicy> {
    match s {
        "keep" => Some(RankPolicy::Keep),
        "truncate" => Some(RankPolicy::Truncate),
        _ => None,
    }
}

pub fn parse_ranks(s: &str) -> Result<Vec<usize>, String> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| format!("bad rank {t:?}"))
        })
        .collect()
}

fn number<T: FromStr>(key: &str, v: &str) -> Result<T, String> {
    v.parse().map_err(|_| format!("{key}: cannot parse {v:?}"))
}

impl PipelineConfig {
    /// Parses `key = value` text. Keys absent from the text keep their
    /// defaults; unknown keys are rejected.
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut c = Self::default();
        let mut ks = c.protocol.ks().to_vec();
        let (mut same_sample, mut same_view) =
            (c.protocol.exclude_same_sample, c.protocol.exclude_same_view);
        for (key, v) in parse_key_values(text)? {
            let k = key.as_str();
            let v = v.as_str();
            match k {
                "synth.seed" => c.synth.seed = number(k, v)?,
                "synth.dim" => c.synth.dim = number(k, v)?,
                "synth.noise_dims" => c.synth.noise_dims = number(k, v)?,
                "synth.n_train_ids" => c.synth.n_train_ids = number(k, v)?,
                "synth.n_test_ids" => c.synth.n_test_ids = number(k, v)?,
                "synth.samples_per_id" => c.synth.samples_per_id = number(k, v)?,
                "synth.views" => c.synth.views = number(k, v)?,
                "synth.view_strength" => c.synth.view_strength = number(k, v)?,
                "synth.noise_sigma" => c.synth.noise_sigma = number(k, v)?,
                "synth.shift_strength" => c.synth.shift_strength = number(k, v)?,
                "train.epochs" => c.train.epochs = number(k, v)?,
                "train.learning_rate" => c.train.learning_rate = number(k, v)?,
                "train.momentum" => c.train.momentum = number(k, v)?,
                "train.orl_coefficient" => c.train.orl_coefficient = number(k, v)?,
                "train.temperature" => c.train.temperature = number(k, v)?,
                "train.seed" => c.train.seed = number(k, v)?,
                "select.method" => {
                    c.select_method = SelectionMethod::parse(v)
                        .ok_or_else(|| format!("{k}: unknown method {v:?}"))?
                }
                "select.n" => c.select_n = number(k, v)?,
                "select.seed" => c.select_seed = number(k, v)?,
                "reduce.k" => c.reduce_k = number(k, v)?,
                "reduce.policy" => {
                    c.rank_policy =
                        parse_policy(v).ok_or_else(|| format!("{k}: unknown policy {v:?}"))?
                }
                "eval.exclude_same_sample" => same_sample = number(k, v)?,
                "eval.exclude_same_view" => same_view = number(k, v)?,
                "eval.ranks" => ks = parse_ranks(v)?,
                _ => return Err(format!("unknown key {k}")),
            }
        }
        c.protocol = Protocol::new(same_sample, same_view, ks).map_err(|e| e.to_string())?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), String> {
        self.synth.validate().map_err(|e| e.to_string())?;
        self.train.validate().map_err(|e| e.to_string())?;
        if self.select_n == 0 || self.select_n > self.synth.n_train_ids {
            return Err(format!(
                "select.n must be in 1..={}",
                self.synth.n_train_ids
            ));
        }
        if self.reduce_k == 0 || self.reduce_k > self.synth.width() {
            return Err(format!("reduce.k must be in 1..={}", self.synth.width()));
        }
        Ok(())
    }

    /// Every key, one per line, in a fixed order.
    pub fn render(&self) -> String {
        let s = &self.synth;
        let t = &self.train;
        let ranks: Vec<String> = self.protocol.ks().iter().map(usize::to_string).collect();
        let mut out = String::new();
        let lines: [(&str, String); 24] = [
            ("synth.seed", s.seed.to_string()),
            ("synth.dim", s.dim.to_string()),
            ("synth.noise_dims", s.noise_dims.to_string()),
            ("synth.n_train_ids", s.n_train_ids.to_string()),
            ("synth.n_test_ids", s.n_test_ids.to_string()),
            ("synth.samples_per_id", s.samples_per_id.to_string()),
            ("synth.views", s.views.to_string()),
            ("synth.view_strength", s.view_strength.to_string()),
            ("synth.noise_sigma", s.noise_sigma.to_string()),
            ("synth.shift_strength", s.shift_strength.to_string()),
            ("train.epochs", t.epochs.to_string()),
            ("train.learning_rate", t.learning_rate.to_string()),
            ("train.momentum", t.momentum.to_string()),
            ("train.orl_coefficient", t.orl_coefficient.to_string()),
            ("train.temperature", t.temperature.to_string()),
            ("train.seed", t.seed.to_string()),
            ("select.method", self.select_method.as_str().to_string()),
            ("select.n", self.select_n.to_string()),
            ("select.seed", self.select_seed.to_string()),
            ("reduce.k", self.reduce_k.to_string()),
            ("reduce.policy", policy_str(self.rank_policy).to_string()),
            (
                "eval.exclude_same_sample",
                self.protocol.exclude_same_sample.to_string(),
            ),
            (
                "eval.exclude_same_view",
                self.protocol.exclude_same_view.to_string(),
            ),
            ("eval.ranks", ranks.join(",")),
        ];
        for (k, v) in lines {
            writeln!(out, "{k} = {v}").expect("string write");
        }
        out
    }
}

/// `synth.*` lines only, used by the dataset manifest.
pub fn render_synth(s: &SynthConfig) -> String {
    let cfg = PipelineConfig {
        synth: *s,
        ..PipelineConfig::default()
    };
    cfg.render()
        .lines()
        .filter(|l| l.starts_with("synth."))
        .map(|l| format!("{l}\n"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let c = PipelineConfig::default();
        assert_eq!(PipelineConfig::parse(&c.render()).unwrap(), c);
        assert_eq!(PipelineConfig::parse("").unwrap(), c);
    }

    #[test]
    fn overrides_and_rejections() {
        let c = PipelineConfig::parse(
            "synth.noise_sigma = 0.125\nselect.method=random\neval.ranks=1,3",
        )
        .unwrap();
        assert_eq!(c.synth.noise_sigma, 0.125);
        assert_eq!(c.select_method, SelectionMethod::Random);
        assert_eq!(c.protocol.ks(), &[1, 3]);
        for bad in [
            "synth.colour = 3",
            "synth.dim = two",
            "select.n = 0",
            "select.n = 129",
            "reduce.k = 81",
            "eval.ranks = 5,1",
            "train.momentum = 1",
            "reduce.policy = maybe",
        ] {
            assert!(PipelineConfig::parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn synth_lines() {
        let text = render_synth(&SynthConfig::default());
        assert_eq!(text.lines().count(), 10);
        assert!(text.starts_with("synth.seed = 11\n"));
    }
}
