use std::fmt;
use std::path::Path;

use coldstart::Error;

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_METHOD: u8 = 3;
pub const EXIT_INVARIANT: u8 = 4;

/// An error on its way to becoming a process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    pub fn invariant(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_INVARIANT,
            message: format!("invariant violated: {}", message.into()),
        }
    }

    pub fn context(mut self, ctx: impl fmt::Display) -> Self {
        self.message = format!("{ctx}: {}", self.message);
        self
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: if e.is_methodology() {
                EXIT_METHOD
            } else {
                EXIT_USAGE
            },
            message: e.to_string(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

pub trait Context<T> {
    fn ctx(self, ctx: impl fmt::Display) -> Result<T, Failure>;
}

impl<T, E: Into<Failure>> Context<T> for Result<T, E> {
    fn ctx(self, ctx: impl fmt::Display) -> Result<T, Failure> {
        self.map_err(|e| e.into().context(ctx))
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::usage(e.to_string())
    }
}

pub fn path_ctx(path: &Path) -> String {
    path.display().to_string()
}
