//! Initial data from `--init` expressions or `--fourier` coefficient files.

use std::path::Path;

use anyhow::{bail, Context};
use mudp_core::{PeriodicFunction, TrigPolynomial};
use serde::Serialize;

use crate::expr::parse_init;

pub const REFERENCE_INIT: &str = "0.2 + 0.05*cos(2*pi*x)";

/// Where the initial datum came from, echoed into manifests.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum InitSource {
    Expression(String),
    Fourier(Vec<(usize, f64, f64)>),
}

#[derive(Debug, Clone)]
pub struct InitialData {
    pub source: InitSource,
    sampler: Sampler,
}

#[derive(Debug, Clone)]
enum Sampler {
    Expr(crate::expr::InitExpr),
    Trig(TrigPolynomial),
}

impl InitialData {
    pub fn from_expression(src: &str) -> anyhow::Result<Self> {
        let e = parse_init(src).with_context(|| format!("--init {src:?}"))?;
        Ok(Self { source: InitSource::Expression(src.to_string()), sampler: Sampler::Expr(e) })
    }

    /// JSON list of `[k, cos_coeff, sin_coeff]`; `k = 0` sets the mean.
    pub fn from_fourier_json(text: &str) -> anyhow::Result<Self> {
        let raw: Vec<(f64, f64, f64)> =
            serde_json::from_str(text).context("expected a JSON list of [k, cos, sin] triples")?;
        let mut modes = Vec::with_capacity(raw.len());
        for (i, &(k, a, b)) in raw.iter().enumerate() {
            if !(k >= 0.0 && k.fract() == 0.0 && k <= 1e6) {
                bail!("entry {i}: wavenumber {k} is not a non-negative integer");
            }
            if !a.is_finite() || !b.is_finite() {
                bail!("entry {i}: coefficients must be finite");
            }
            modes.push((k as usize, a, b));
        }
        let poly = TrigPolynomial::from_modes(&modes);
        Ok(Self { source: InitSource::Fourier(modes), sampler: Sampler::Trig(poly) })
    }

    pub fn from_fourier_file(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_fourier_json(&text).with_context(|| format!("--fourier {}", path.display()))
    }

    pub fn reference() -> Self {
        Self::from_expression(REFERENCE_INIT).expect("reference datum parses")
    }

    pub fn sample(&self, n: usize) -> mudp_core::Result<PeriodicFunction> {
        match &self.sampler {
            Sampler::Expr(e) => e.sample(n),
            Sampler::Trig(p) => p.sample(n),
        }
    }
}
