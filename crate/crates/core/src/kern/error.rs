use crate::model::{Warning, WarningKind};

/// Parse failure in strict mode, with a 1-based source position.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}, column {column}: {reason}")]
pub struct SyntaxError {
    pub line: usize,
    pub column: usize,
    pub reason: String,
}

impl SyntaxError {
    pub fn new(line: usize, column: usize, reason: impl Into<String>) -> SyntaxError {
        SyntaxError {
            line,
            column,
            reason: reason.into(),
        }
    }
}

/// Separator misuse or structural failure in ekern input.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}, column {column}: {reason}")]
pub struct EkernSyntaxError {
    pub line: usize,
    pub column: usize,
    pub reason: String,
}

impl EkernSyntaxError {
    pub fn new(line: usize, column: usize, reason: impl Into<String>) -> EkernSyntaxError {
        EkernSyntaxError {
            line,
            column,
            reason: reason.into(),
        }
    }
}

/// Serialization failure for scores that cannot be expressed in the
/// supported kern subset (only reachable through hand-built models; parser
/// output always serializes).
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WriteError {
    #[error("part {part}, measure {measure}: duration {duration} has no reciprocal form")]
    UnsupportedDuration {
        part: usize,
        measure: usize,
        duration: String,
    },
    #[error("part {part}, measure {measure}: simultaneous note and rest in one voice")]
    VoiceCollision { part: usize, measure: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Strict,
    Lenient,
}

/// Collects recoveries as warnings in lenient mode and turns the first one
/// into a `SyntaxError` in strict mode.
#[derive(Debug)]
pub struct Reporter {
    pub mode: Mode,
    pub warnings: Vec<Warning>,
}

impl Reporter {
    pub fn new(mode: Mode) -> Reporter {
        Reporter {
            mode,
            warnings: Vec::new(),
        }
    }

    pub fn report(
        &mut self,
        line: usize,
        column: usize,
        kind: WarningKind,
        message: impl Into<String>,
    ) -> Result<(), SyntaxError> {
        let message = message.into();
        match self.mode {
            Mode::Strict => Err(SyntaxError::new(line, column, message)),
            Mode::Lenient => {
                self.warnings.push(Warning {
                    line,
                    column,
                    kind,
                    message,
                });
                Ok(())
            }
        }
    }
}
