use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A scalar argument fell outside the range an operation accepts.
    #[error("{name} = {value} is outside the allowed domain ({constraint})")]
    Domain {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },
    #[error("invalid decay model: {0}")]
    InvalidModel(String),
    #[error("operation requires a {required} model")]
    UnsupportedModel { required: &'static str },
    #[error("usage error: {0}")]
    Usage(&'static str),
    #[error("insufficient data: {population} has {count} usable pulses, need at least {needed}")]
    InsufficientData {
        population: &'static str,
        count: usize,
        needed: usize,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_domain(
    ok: bool,
    name: &'static str,
    value: f64,
    constraint: &'static str,
) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Domain {
            name,
            value,
            constraint,
        })
    }
}
