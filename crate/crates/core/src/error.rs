use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{name} = {value} is outside its domain {domain}")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },
    #[error("divergent quantity: {0}")]
    Divergence(String),
    #[error("heralding impossible: {0}")]
    HeraldingImpossible(String),
    #[error("QBER undefined: click probability is zero")]
    UndefinedQber,
    #[error("distillation failed: success probability is zero")]
    DistillationFailed,
    #[error("truncation: {0}")]
    Truncation(String),
    #[error("configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_unit(name: &'static str, value: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(Error::Domain {
            name,
            value,
            domain: "[0, 1]",
        })
    }
}
