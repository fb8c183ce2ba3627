use std::fmt;

use stormarket_core::Error as CoreError;

/// A failed command, classified by exit code.
#[derive(Debug)]
pub enum Failure {
    /// Bad configuration or arguments (exit 2).
    Config(anyhow::Error),
    /// Missing, malformed or inconsistent data (exit 3).
    Data(anyhow::Error),
    /// Solver failure, infeasibility or a search that ran out of sweeps (exit 4).
    Solver(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Data(_) => 3,
            Failure::Solver(_) => 4,
        }
    }

    pub fn config(msg: impl fmt::Display) -> Self {
        Failure::Config(anyhow::anyhow!("{msg}"))
    }

    pub fn data(msg: impl fmt::Display) -> Self {
        Failure::Data(anyhow::anyhow!("{msg}"))
    }

    /// Wraps a core error, prefixed with the module it came from.
    pub fn core(module: &str, e: CoreError) -> Self {
        let solver = matches!(
            e,
            CoreError::Infeasible { .. } | CoreError::Solver(_) | CoreError::TooLarge(_)
        );
        let e = anyhow::Error::new(e).context(module.to_string());
        if solver {
            Failure::Solver(e)
        } else {
            Failure::Data(e)
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(e) => write!(f, "config error: {e:#}"),
            Failure::Data(e) => write!(f, "data error: {e:#}"),
            Failure::Solver(e) => write!(f, "solver error: {e:#}"),
        }
    }
}

impl std::error::Error for Failure {}

/// Shorthand for mapping core results inside one module.
pub(crate) trait CoreContext<T> {
    fn within(self, module: &str) -> Result<T, Failure>;
}

impl<T> CoreContext<T> for stormarket_core::Result<T> {
    fn within(self, module: &str) -> Result<T, Failure> {
        self.map_err(|e| Failure::core(module, e))
    }
}
