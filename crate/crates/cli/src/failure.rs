use std::fmt;

/// Process exit status of a failed run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Usage = 1,
    Data = 2,
    Numerical = 3,
}

#[derive(Debug)]
pub struct Failure {
    pub kind: ExitKind,
    pub message: String,
}

pub type Outcome<T> = Result<T, Failure>;

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure {
            kind: ExitKind::Usage,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Failure {
            kind: ExitKind::Data,
            message: message.into(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<igl_core::Error> for Failure {
    fn from(e: igl_core::Error) -> Self {
        let kind = if e.is_numerical() {
            ExitKind::Numerical
        } else if e.is_data() {
            ExitKind::Data
        } else {
            ExitKind::Usage
        };
        Failure {
            kind,
            message: e.to_string(),
        }
    }
}

/// Treat any core error as a configuration problem (used while loading config files).
pub fn as_config(e: igl_core::Error) -> Failure {
    Failure::usage(e.to_string())
}
