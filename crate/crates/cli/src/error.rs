use std::fmt;
use std::path::PathBuf;

/// Process exit codes. Clap itself exits with 2 on usage errors.
pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_CONFIG: u8 = 3;
pub const EXIT_OUTPUT: u8 = 4;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Output { path: PathBuf, msg: String },
    Run(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Output { .. } => EXIT_OUTPUT,
            CliError::Run(_) => EXIT_FAILURE,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Output { .. } => "output",
            CliError::Run(_) => "run",
        }
    }

    pub fn output(path: impl Into<PathBuf>, err: impl fmt::Display) -> Self {
        CliError::Output {
            path: path.into(),
            msg: err.to_string(),
        }
    }
}

impl fmt::Display for CliError {
    /// One line: `error[<kind>]: <message>`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msg = match self {
            CliError::Config(m) | CliError::Run(m) => m.clone(),
            CliError::Output { path, msg } => format!("{}: {msg}", path.display()),
        };
        write!(f, "error[{}]: {}", self.kind(), one_line(&msg))
    }
}

pub fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

impl From<fdd_sim::Error> for CliError {
    fn from(e: fdd_sim::Error) -> Self {
        use fdd_sim::Error as E;
        match e {
            E::Config(_) | E::ConfigParse { .. } => CliError::Config(e.to_string()),
            other => CliError::Run(other.to_string()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn messages_are_single_line() {
        let e = CliError::Run("a\nb\n  c".into());
        assert_eq!(e.to_string(), "error[run]: a b c");
        assert_eq!(CliError::output("/x", "denied").to_string(), "error[output]: /x: denied");
    }

    #[test]
    fn codes_are_distinct() {
        let codes = [
            CliError::Config(String::new()).exit_code(),
            CliError::output("", "").exit_code(),
            CliError::Run(String::new()).exit_code(),
            EXIT_USAGE,
        ];
        for i in 0..codes.len() {
            for j in 0..i {
                assert_ne!(codes[i], codes[j]);
            }
        }
    }

    #[test]
    fn core_errors_map_by_kind() {
        let c: CliError = fdd_sim::Error::Config("bad".into()).into();
        assert_eq!(c.exit_code(), EXIT_CONFIG);
        let r: CliError = fdd_sim::Error::NonFinite("x").into();
        assert_eq!(r.exit_code(), EXIT_FAILURE);
    }
}
