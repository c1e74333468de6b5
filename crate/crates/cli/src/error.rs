use std::fmt;

/// Error class and message; the class fixes the exit status.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Io(String),
    Numerical(String),
}

impl CliError {
    pub fn class(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Data(_) => "data",
            CliError::Io(_) => "io",
            CliError::Numerical(_) => "numerical",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) | CliError::Io(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (CliError::Usage(m) | CliError::Data(m) | CliError::Io(m) | CliError::Numerical(m)) = self;
        // keep the message on one line
        f.write_str(&m.replace('\n', " "))
    }
}

impl From<hyperclust::Error> for CliError {
    fn from(e: hyperclust::Error) -> Self {
        use hyperclust::Error::*;
        match &e {
            Argument(_) => CliError::Usage(e.to_string()),
            Validation(_) | Generation(_) => CliError::Data(e.to_string()),
            Domain(_) | Decomposition(_) | Degenerate { .. } | Fit(_) | Search(_) => CliError::Numerical(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
