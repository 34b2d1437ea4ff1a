//! JSON output envelope, exit codes and the input digest.

use std::ffi::OsString;
use std::fmt::Display;
use std::process::ExitCode;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::Output;

pub const EXIT_INPUT: u8 = 2;
pub const EXIT_COMPUTE: u8 = 3;

#[derive(Debug)]
pub enum CliError {
    /// Unreadable, malformed or inconsistent input; exit 2.
    Input(String),
    /// The estimators failed on valid input; exit 3.
    Compute(String),
}

impl CliError {
    /// Prefixes `context` (a file or flag) and classifies by error kind.
    pub fn from_core(context: impl AsRef<std::path::Path>, e: prevalence_core::Error) -> Self {
        let msg = format!("{}: {e}", context.as_ref().display());
        if e.is_input_error() {
            CliError::Input(msg)
        } else {
            CliError::Compute(msg)
        }
    }

    pub fn compute(e: prevalence_core::Error) -> Self {
        if e.is_input_error() {
            CliError::Input(e.to_string())
        } else {
            CliError::Compute(e.to_string())
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Compute(m) => m,
        }
    }

    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Compute(_) => EXIT_COMPUTE,
        }
    }
}

/// SHA-256 over the command-line arguments and the bytes of every input
/// file, each length-prefixed.
pub struct Inputs {
    hasher: Sha256,
}

impl Inputs {
    pub fn from_args(args: impl IntoIterator<Item = OsString>) -> Self {
        let mut inputs = Self {
            hasher: Sha256::new(),
        };
        for arg in args {
            inputs.add(arg.to_string_lossy().as_bytes());
        }
        inputs
    }

    fn add(&mut self, bytes: &[u8]) {
        self.hasher.update((bytes.len() as u64).to_le_bytes());
        self.hasher.update(bytes);
    }

    pub fn add_file(&mut self, bytes: &[u8]) {
        self.add(bytes);
    }

    pub fn digest(&self) -> String {
        hex::encode(self.hasher.clone().finalize())
    }
}

#[derive(Serialize)]
pub struct Envelope {
    command: &'static str,
    inputs_digest: String,
    result: Option<serde_json::Value>,
    warnings: Vec<String>,
    error: Option<String>,
}

impl Envelope {
    pub fn new(command: &'static str, inputs_digest: String, warnings: Vec<String>) -> Self {
        Self {
            command,
            inputs_digest,
            result: None,
            warnings,
            error: None,
        }
    }

    /// Prints the outcome and returns the exit code. CSV output is printed
    /// bare, with warnings on stderr.
    pub fn emit(mut self, outcome: Result<Output, CliError>, csv: bool) -> ExitCode {
        let code = match outcome {
            Ok(Output::Csv(text)) if csv => {
                for w in &self.warnings {
                    eprintln!("warning: {w}");
                }
                print!("{text}");
                return ExitCode::SUCCESS;
            }
            Ok(Output::Csv(text)) => {
                self.result = Some(serde_json::Value::String(text));
                0
            }
            Ok(Output::Json(value)) => {
                self.result = Some(value);
                0
            }
            Err(e) => {
                eprintln!("error: {}", e.message());
                self.error = Some(e.message().to_string());
                e.code()
            }
        };
        if csv && code != 0 {
            return ExitCode::from(code);
        }
        println!("{}", pretty(&self));
        ExitCode::from(code)
    }
}

fn pretty(value: &impl Serialize) -> impl Display {
    serde_json::to_string_pretty(value).expect("envelope is always serialisable")
}
