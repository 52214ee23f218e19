//! Statistical report on the configured error models.

use std::path::PathBuf;

use axprox::error_models::{ErrorStream, GRADIENT_STREAM, PROX_STREAM};
use axprox::{validate_error_stream, ValidationReport};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};

#[derive(Debug, Clone)]
pub struct ErrorReport {
    pub gradient: Option<ValidationReport>,
    pub prox: Option<ValidationReport>,
    pub file: PathBuf,
}

impl ErrorReport {
    pub fn all_passed(&self) -> bool {
        self.gradient.iter().chain(&self.prox).all(ValidationReport::all_passed)
    }
}

/// Draws `validate.samples` scalars from each configured model (gradient
/// vectors of `validate.dim` entries, flattened) using the first seed, and
/// writes `validate_errors.csv`.
pub fn validate_errors(cfg: &ExperimentConfig) -> Result<ErrorReport> {
    cfg.validate()?;
    let seed = cfg.seeds[0];
    let samples = cfg.validate.samples;
    if cfg.errors.gradient.is_none() && cfg.errors.prox.is_none() {
        return Err(CliError::config("errors: configure errors.gradient and/or errors.prox to validate"));
    }

    let gradient = cfg
        .errors
        .gradient
        .as_ref()
        .map(|g| -> Result<ValidationReport> {
            let model = g.model(seed);
            let sampler = model.sampler()?;
            let dim = cfg.validate.dim.max(1);
            let mut stream = ErrorStream::new(seed, GRADIENT_STREAM);
            let mut draws = Vec::with_capacity(samples);
            while draws.len() < samples {
                draws.extend(sampler.sample(dim, 1.0, &mut stream).iter().copied());
            }
            draws.truncate(samples);
            Ok(validate_error_stream(&draws, &model.expectation(1.0))?)
        })
        .transpose()?;

    let prox = cfg
        .errors
        .prox
        .as_ref()
        .map(|p| -> Result<ValidationReport> {
            let model = p.model(seed);
            let sampler = model.sampler()?;
            let mut stream = ErrorStream::new(seed, PROX_STREAM);
            let draws: Vec<f64> = (0..samples).map(|_| sampler.sample(&mut stream)).collect();
            Ok(validate_error_stream(&draws, &model.expectation())?)
        })
        .transpose()?;

    std::fs::create_dir_all(&cfg.out).map_err(|e| CliError::io(&cfg.out, e))?;
    let file = cfg.out.join("validate_errors.csv");
    let f = std::fs::File::create(&file).map_err(|e| CliError::io(&file, e))?;
    let mut w = csv::Writer::from_writer(f);
    w.write_record(["model", "check", "statistic", "threshold", "passed", "samples"])?;
    for (name, report) in [("gradient", &gradient), ("prox", &prox)] {
        if let Some(r) = report {
            for c in &r.checks {
                w.write_record([
                    name.to_string(),
                    c.name.to_string(),
                    c.statistic.to_string(),
                    c.threshold.to_string(),
                    c.passed.to_string(),
                    r.samples.to_string(),
                ])?;
            }
        }
    }
    w.flush().map_err(|e| CliError::io(&file, e))?;
    Ok(ErrorReport { gradient, prox, file })
}
