use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{bits:#x} does not fit the {width}-bit {format} format")]
    Width {
        format: &'static str,
        bits: u64,
        width: u32,
    },
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("no packing plan with at least one lane for {0}")]
    Infeasible(String),
    #[error("unknown datatype `{0}`")]
    UnknownDatatype(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}
