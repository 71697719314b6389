//! Command-line argument types and grid parsing.

use blocktm::chain::{BlockChain, Ensemble};
use blocktm::CMatrix;
use clap::{Args, ValueEnum};
use num_complex::Complex64;
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    /// Anderson strip: transverse hopping, uniform on-site disorder.
    Anderson,
    /// Gaussian diagonal blocks with lower-triangular Gaussian couplings.
    BandRandom,
    /// Ladder `H_n = H_0 + n omega I` with constant coupling.
    Floquet,
    /// Explicit chain from a JSON file.
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EnsembleArg {
    Goe,
    Gue,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Chain model to build.
    #[arg(long, value_enum, default_value = "anderson")]
    pub model: ModelKind,

    /// JSON chain file (for --model file).
    #[arg(long)]
    pub chain_file: Option<PathBuf>,

    /// Number of slices.
    #[arg(long = "N", default_value_t = 8)]
    pub slices: usize,

    /// Block size.
    #[arg(long = "M", default_value_t = 1)]
    pub block_size: usize,

    /// Disorder width for the Anderson strip.
    #[arg(long = "W", default_value_t = 1.0)]
    pub disorder: f64,

    /// Ladder step for the Floquet model.
    #[arg(long, default_value_t = 1.0)]
    pub omega: f64,

    /// Gaussian ensemble for --model band-random.
    #[arg(long, value_enum, default_value = "gue")]
    pub ensemble: EnsembleArg,

    /// Master seed; per-block and per-realization streams derive from it.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl ModelArgs {
    /// Builds the chain for one realization.
    pub fn build(&self, realization: u64) -> Result<BlockChain, String> {
        let seed = blocktm::chain::realization_seed(self.seed, realization);
        match self.model {
            ModelKind::Anderson => {
                BlockChain::anderson_strip(self.block_size, self.slices, self.disorder, seed)
                    .map_err(|e| e.to_string())
            }
            ModelKind::BandRandom => {
                let ensemble = match self.ensemble {
                    EnsembleArg::Goe => Ensemble::Goe,
                    EnsembleArg::Gue => Ensemble::Gue,
                };
                BlockChain::band_random(self.block_size, self.slices, ensemble, seed)
                    .map_err(|e| e.to_string())
            }
            ModelKind::Floquet => {
                let m = self.block_size;
                let mut h0 = CMatrix::zeros(m, m);
                for i in 0..m.saturating_sub(1) {
                    h0[(i, i + 1)] = Complex64::ONE;
                    h0[(i + 1, i)] = Complex64::ONE;
                }
                BlockChain::floquet(&h0, &CMatrix::identity(m, m), self.omega, self.slices)
                    .map_err(|e| e.to_string())
            }
            ModelKind::File => {
                let path = self
                    .chain_file
                    .as_ref()
                    .ok_or_else(|| "--model file requires --chain-file".to_string())?;
                let text = std::fs::read_to_string(path)
                    .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
                BlockChain::from_json(&text).map_err(|e| e.to_string())
            }
        }
    }

    /// Metadata echo for output headers.
    pub fn describe(&self) -> serde_json::Value {
        serde_json::json!({
            "model": format!("{:?}", self.model).to_lowercase(),
            "N": self.slices,
            "M": self.block_size,
            "W": self.disorder,
            "omega": self.omega,
            "ensemble": format!("{:?}", self.ensemble).to_lowercase(),
            "seed": self.seed,
            "chain_file": self.chain_file.as_ref().map(|p| p.display().to_string()),
        })
    }
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Output format.
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

/// Parses a grid spec: either a comma list of (complex) values or a real
/// range `start:stop:count`.
pub fn parse_grid(spec: &str) -> Result<Vec<Complex64>, String> {
    let spec = spec.trim();
    if spec.is_empty() {
        return Err("empty grid specification".into());
    }
    if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("range must be start:stop:count, got '{spec}'"));
        }
        let start: f64 = parts[0].trim().parse().map_err(|_| format!("bad range start '{}'", parts[0]))?;
        let stop: f64 = parts[1].trim().parse().map_err(|_| format!("bad range stop '{}'", parts[1]))?;
        let count: usize = parts[2].trim().parse().map_err(|_| format!("bad range count '{}'", parts[2]))?;
        if count == 0 {
            return Err("range count must be positive".into());
        }
        if count == 1 {
            return Ok(vec![Complex64::new(start, 0.0)]);
        }
        let step = (stop - start) / (count as f64 - 1.0);
        return Ok((0..count).map(|k| Complex64::new(start + step * k as f64, 0.0)).collect());
    }
    spec.split(',')
        .map(|tok| {
            let tok = tok.trim();
            tok.parse::<Complex64>().map_err(|_| format!("cannot parse '{tok}' as a complex number"))
        })
        .collect()
}

/// Real-only grid; rejects entries with an imaginary part.
pub fn parse_real_grid(spec: &str) -> Result<Vec<f64>, String> {
    parse_grid(spec)?
        .into_iter()
        .map(|z| {
            if z.im == 0.0 {
                Ok(z.re)
            } else {
                Err(format!("expected a real value, got {z}"))
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn list_and_range_forms() {
        let list = parse_grid("0.5, 1+2i, -3i").unwrap();
        assert_eq!(list.len(), 3);
        assert_eq!(list[1], Complex64::new(1.0, 2.0));
        assert_eq!(list[2], Complex64::new(0.0, -3.0));

        let range = parse_grid("0:1:5").unwrap();
        assert_eq!(range.len(), 5);
        assert!((range[3].re - 0.75).abs() < 1e-15);

        assert!(parse_grid("0:1").is_err());
        assert!(parse_grid("").is_err());
        assert!(parse_real_grid("1+1i").is_err());
        assert_eq!(parse_real_grid("2").unwrap(), vec![2.0]);
    }
}
