//! Flat key=value configuration files with `#` comments, plus the
//! resolution order: preset defaults, then file values, then CLI flags.

use std::collections::HashMap;
use std::path::Path;

use agglo_core::error::{Error, Result};
use agglo_core::model::{presets, AttentionKind, EncodingKind, ModelConfig};
use agglo_core::tensor::DType;

#[derive(Debug, Default, Clone)]
pub struct KvConfig(HashMap<String, String>);

impl KvConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = HashMap::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("malformed config line `{line}`")))?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(KvConfig(map))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(|s| s.as_str())
    }

    pub fn get_usize(&self, key: &str) -> Result<Option<usize>> {
        self.get(key)
            .map(|v| {
                v.parse().map_err(|_| {
                    Error::config(format!("config key `{key}`: `{v}` is not an integer"))
                })
            })
            .transpose()
    }

    pub fn get_u64(&self, key: &str) -> Result<Option<u64>> {
        self.get(key)
            .map(|v| {
                v.parse().map_err(|_| {
                    Error::config(format!("config key `{key}`: `{v}` is not an integer"))
                })
            })
            .transpose()
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>> {
        self.get(key)
            .map(|v| {
                v.parse().map_err(|_| {
                    Error::config(format!("config key `{key}`: `{v}` is not a number"))
                })
            })
            .transpose()
    }

    pub fn get_bool(&self, key: &str) -> Result<Option<bool>> {
        self.get(key)
            .map(|v| match v {
                "true" | "1" | "yes" => Ok(true),
                "false" | "0" | "no" => Ok(false),
                other => Err(Error::config(format!(
                    "config key `{key}`: `{other}` is not a boolean"
                ))),
            })
            .transpose()
    }
}

/// Everything a training or evaluation run needs, fully resolved.
#[derive(Debug, Clone)]
pub struct RunSettings {
    pub model: ModelConfig,
    pub corpus: String,
    pub limit_chars: usize,
    pub fractions: (f64, f64, f64),
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub rho: f64,
    pub eps: f64,
    pub clip_norm: Option<f64>,
    pub target_valid_bits: Option<f64>,
    pub seed: u64,
    pub dtype: DType,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            model: presets::preset("text8_agglo_conv").unwrap(),
            corpus: "synthetic".to_string(),
            limit_chars: 1_000_000,
            fractions: (0.9, 0.05, 0.05),
            batch_size: 32,
            max_epochs: 100,
            patience: 10,
            rho: 0.95,
            eps: 1e-6,
            clip_norm: Some(5.0),
            target_valid_bits: None,
            seed: 0,
            dtype: DType::F32,
        }
    }
}

impl RunSettings {
    /// Load a named preset or a config file; file keys override the
    /// preset defaults.
    pub fn resolve(config_arg: Option<&str>) -> Result<Self> {
        let mut settings = RunSettings::default();
        let Some(arg) = config_arg else {
            return Ok(settings);
        };
        if let Some(model) = presets::preset(arg) {
            settings.model = model;
            return Ok(settings);
        }
        let path = Path::new(arg);
        if !path.exists() {
            return Err(Error::config(format!(
                "`{arg}` is neither a preset ({}) nor a config file",
                presets::PRESET_NAMES.join(", ")
            )));
        }
        let kv = KvConfig::from_file(path)?;
        settings.apply(&kv)?;
        Ok(settings)
    }

    pub fn apply(&mut self, kv: &KvConfig) -> Result<()> {
        if let Some(v) = kv.get("attention") {
            self.model.attention_kind = v.parse::<AttentionKind>()?;
        }
        if let Some(v) = kv.get("encoding") {
            self.model.encoding_kind = v.parse::<EncodingKind>()?;
        }
        if let Some(v) = kv.get_usize("n_blocks")? {
            self.model.n_blocks = v;
        }
        if let Some(v) = kv.get_usize("seq_len")? {
            self.model.seq_len = v;
        }
        if let Some(v) = kv.get_usize("d_model")? {
            self.model.d_model = v;
        }
        if let Some(v) = kv.get_usize("heads_or_classes")? {
            self.model.heads_or_classes = v;
        }
        if let Some(v) = kv.get_usize("vocab_size")? {
            self.model.vocab_size = v;
        }
        if let Some(v) = kv.get_usize("ffn_multiplier")? {
            self.model.ffn_multiplier = v;
        }
        if let Some(v) = kv.get_usize("conv_width")? {
            self.model.conv_width = v;
        }
        if let Some(v) = kv.get("corpus") {
            self.corpus = v.to_string();
        }
        if let Some(v) = kv.get_usize("limit_chars")? {
            self.limit_chars = v;
        }
        let train_frac = kv.get_f64("train_frac")?;
        let valid_frac = kv.get_f64("valid_frac")?;
        let test_frac = kv.get_f64("test_frac")?;
        if train_frac.is_some() || valid_frac.is_some() || test_frac.is_some() {
            self.fractions = (
                train_frac.unwrap_or(self.fractions.0),
                valid_frac.unwrap_or(self.fractions.1),
                test_frac.unwrap_or(self.fractions.2),
            );
        }
        if let Some(v) = kv.get_usize("batch_size")? {
            self.batch_size = v;
        }
        if let Some(v) = kv.get_usize("max_epochs")? {
            self.max_epochs = v;
        }
        if let Some(v) = kv.get_usize("patience")? {
            self.patience = v;
        }
        if let Some(v) = kv.get_f64("rho")? {
            self.rho = v;
        }
        if let Some(v) = kv.get_f64("eps")? {
            self.eps = v;
        }
        if let Some(v) = kv.get("clip_norm") {
            self.clip_norm = match v {
                "none" | "off" => None,
                other => Some(other.parse().map_err(|_| {
                    Error::config(format!("config key `clip_norm`: `{other}` is not a number"))
                })?),
            };
        }
        if let Some(v) = kv.get_f64("target_valid_bits")? {
            self.target_valid_bits = Some(v);
        }
        if let Some(v) = kv.get_u64("seed")? {
            self.seed = v;
        }
        if let Some(v) = kv.get("dtype") {
            self.dtype = v.parse()?;
        }
        Ok(())
    }

    /// Serialize every resolved knob; parsing this text back yields an
    /// identical run.
    pub fn to_text(&self, command: &str) -> String {
        let mut out = String::new();
        out.push_str(&format!("# effective configuration\ncommand={command}\n"));
        out.push_str(&self.model.to_text());
        out.push_str(&format!("corpus={}\n", self.corpus));
        out.push_str(&format!("limit_chars={}\n", self.limit_chars));
        out.push_str(&format!(
            "train_frac={}\nvalid_frac={}\ntest_frac={}\n",
            self.fractions.0, self.fractions.1, self.fractions.2
        ));
        out.push_str(&format!("batch_size={}\n", self.batch_size));
        out.push_str(&format!("max_epochs={}\n", self.max_epochs));
        out.push_str(&format!("patience={}\n", self.patience));
        out.push_str(&format!("rho={}\n", self.rho));
        out.push_str(&format!("eps={}\n", self.eps));
        match self.clip_norm {
            Some(c) => out.push_str(&format!("clip_norm={c}\n")),
            None => out.push_str("clip_norm=none\n"),
        }
        if let Some(t) = self.target_valid_bits {
            out.push_str(&format!("target_valid_bits={t}\n"));
        }
        out.push_str(&format!("seed={}\n", self.seed));
        out.push_str(&format!("dtype={}\n", self.dtype.name()));
        out
    }
}

/// Benchmark knobs, resolved the same way.
#[derive(Debug, Clone)]
pub struct BenchSettings {
    pub batch: usize,
    pub d_model: usize,
    pub heads_or_classes: usize,
    pub seq_lengths: Vec<usize>,
    pub replicas: usize,
    pub warmup: usize,
    pub masked: bool,
    pub seed: u64,
    pub dtype: DType,
    pub time_backward: bool,
}

impl Default for BenchSettings {
    fn default() -> Self {
        BenchSettings {
            batch: 32,
            d_model: 512,
            heads_or_classes: 8,
            seq_lengths: vec![64, 128, 256, 512, 1024, 2048],
            replicas: 5,
            warmup: 1,
            masked: true,
            seed: 0,
            dtype: DType::F32,
            time_backward: false,
        }
    }
}

impl BenchSettings {
    pub fn resolve(config_arg: Option<&str>) -> Result<Self> {
        let mut settings = BenchSettings::default();
        let Some(arg) = config_arg else {
            return Ok(settings);
        };
        let path = Path::new(arg);
        if !path.exists() {
            return Err(Error::config(format!("`{arg}` is not a config file")));
        }
        let kv = KvConfig::from_file(path)?;
        settings.apply(&kv)?;
        Ok(settings)
    }

    pub fn apply(&mut self, kv: &KvConfig) -> Result<()> {
        if let Some(v) = kv.get_usize("batch")? {
            self.batch = v;
        }
        if let Some(v) = kv.get_usize("d_model")? {
            self.d_model = v;
        }
        if let Some(v) = kv.get_usize("heads_or_classes")? {
            self.heads_or_classes = v;
        }
        if let Some(v) = kv.get("lengths") {
            self.seq_lengths = parse_lengths(v)?;
        }
        if let Some(v) = kv.get_usize("replicas")? {
            self.replicas = v;
        }
        if let Some(v) = kv.get_usize("warmup")? {
            self.warmup = v;
        }
        if let Some(v) = kv.get_bool("masked")? {
            self.masked = v;
        }
        if let Some(v) = kv.get_u64("seed")? {
            self.seed = v;
        }
        if let Some(v) = kv.get("dtype") {
            self.dtype = v.parse()?;
        }
        if let Some(v) = kv.get_bool("time_backward")? {
            self.time_backward = v;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let lengths: Vec<String> = self.seq_lengths.iter().map(|t| t.to_string()).collect();
        format!(
            "# effective configuration\ncommand=bench\nbatch={}\nd_model={}\nheads_or_classes={}\nlengths={}\nreplicas={}\nwarmup={}\nmasked={}\nseed={}\ndtype={}\ntime_backward={}\n",
            self.batch,
            self.d_model,
            self.heads_or_classes,
            lengths.join(","),
            self.replicas,
            self.warmup,
            self.masked,
            self.seed,
            self.dtype.name(),
            self.time_backward
        )
    }
}

pub fn parse_lengths(csv: &str) -> Result<Vec<usize>> {
    csv.split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| Error::config(format!("bad sequence length `{s}` in lengths list")))
        })
        .collect()
}
