use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Binary classification on 0/1 labels; outputs are probabilities.
    Logistic,
    SquaredError,
}

/// Hyperparameters of one boosted ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbtConfig {
    pub objective: Objective,
    pub n_rounds: usize,
    pub learning_rate: f64,
    /// Minimum loss reduction for a split.
    pub gamma: f64,
    pub max_depth: usize,
    /// Minimum hessian sum in each child.
    pub min_child_weight: f64,
    pub subsample: f64,
    pub colsample_bytree: f64,
    pub colsample_bylevel: f64,
    pub scale_pos_weight: f64,
    pub reg_lambda: f64,
    pub seed: u64,
    /// Stop after this many rounds without validation improvement.
    pub early_stopping_rounds: Option<usize>,
    pub validation_fraction: f64,
}

impl Default for GbtConfig {
    fn default() -> Self {
        GbtConfig {
            objective: Objective::Logistic,
            n_rounds: 100,
            learning_rate: 0.3,
            gamma: 0.0,
            max_depth: 6,
            min_child_weight: 1.0,
            subsample: 1.0,
            colsample_bytree: 1.0,
            colsample_bylevel: 1.0,
            scale_pos_weight: 1.0,
            reg_lambda: 1.0,
            seed: 0,
            early_stopping_rounds: None,
            validation_fraction: 0.2,
        }
    }
}

impl GbtConfig {
    pub fn check(&self) -> Result<(), String> {
        let unit = |name: &str, v: f64| {
            if v > 0.0 && v <= 1.0 {
                Ok(())
            } else {
                Err(format!("{name} must be in (0, 1], got {v}"))
            }
        };
        unit("subsample", self.subsample)?;
        unit("colsample_bytree", self.colsample_bytree)?;
        unit("colsample_bylevel", self.colsample_bylevel)?;
        if !(self.learning_rate > 0.0) {
            return Err(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(self.gamma >= 0.0 && self.min_child_weight >= 0.0 && self.reg_lambda >= 0.0) {
            return Err("gamma, min_child_weight and reg_lambda must be non-negative".into());
        }
        if !(self.scale_pos_weight > 0.0) {
            return Err("scale_pos_weight must be positive".into());
        }
        if self.early_stopping_rounds.is_some() && !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err("validation_fraction must be in (0, 1)".into());
        }
        Ok(())
    }
}

/// Candidate values for the randomized search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Grid {
    pub learning_rate: Vec<f64>,
    pub gamma: Vec<f64>,
    pub max_depth: Vec<usize>,
    pub subsample: Vec<f64>,
    pub colsample_bylevel: Vec<f64>,
    pub colsample_bytree: Vec<f64>,
    pub min_child_weight: Vec<f64>,
    pub scale_pos_weight: Vec<f64>,
}

impl Default for Grid {
    fn default() -> Self {
        let tenths = |from: u32| (from..=10).map(|k| f64::from(k) / 10.0).collect::<Vec<_>>();
        Grid {
            learning_rate: vec![0.001, 0.01, 0.1, 0.2, 0.3],
            gamma: vec![0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.5],
            max_depth: vec![6, 8, 10, 12, 15],
            subsample: tenths(5),
            colsample_bylevel: tenths(4),
            colsample_bytree: tenths(4),
            min_child_weight: vec![0.5, 1.0, 3.0, 5.0, 7.0, 10.0],
            scale_pos_weight: vec![1.0, 2.0, 3.0, 4.0],
        }
    }
}

impl Grid {
    pub fn check(&self) -> Result<(), String> {
        let lens = [
            ("learning_rate", self.learning_rate.len()),
            ("gamma", self.gamma.len()),
            ("max_depth", self.max_depth.len()),
            ("subsample", self.subsample.len()),
            ("colsample_bylevel", self.colsample_bylevel.len()),
            ("colsample_bytree", self.colsample_bytree.len()),
            ("min_child_weight", self.min_child_weight.len()),
            ("scale_pos_weight", self.scale_pos_weight.len()),
        ];
        match lens.iter().find(|(_, n)| *n == 0) {
            Some((name, _)) => Err(format!("grid field {name} is empty")),
            None => Ok(()),
        }
    }

    /// Draws every grid field uniformly; other fields come from `base`.
    pub fn sample<R: Rng>(&self, base: &GbtConfig, rng: &mut R) -> GbtConfig {
        fn pick<T: Copy, R: Rng>(values: &[T], rng: &mut R) -> T {
            values[rng.random_range(0..values.len())]
        }
        GbtConfig {
            learning_rate: pick(&self.learning_rate, rng),
            gamma: pick(&self.gamma, rng),
            max_depth: pick(&self.max_depth, rng),
            subsample: pick(&self.subsample, rng),
            colsample_bylevel: pick(&self.colsample_bylevel, rng),
            colsample_bytree: pick(&self.colsample_bytree, rng),
            min_child_weight: pick(&self.min_child_weight, rng),
            scale_pos_weight: pick(&self.scale_pos_weight, rng),
            ..base.clone()
        }
    }
}

/// SplitMix64 finalizer, used to derive independent seeds.
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
