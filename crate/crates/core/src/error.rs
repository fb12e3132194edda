use thiserror::Error;

/// Errors raised anywhere in the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical contract violated: {0}")]
    Numeric(String),

    #[error("probability mass {mass:.3e} reached the grid edge{}", step_suffix(*.step))]
    BoundaryEscape { mass: f64, step: Option<usize> },

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{} trajectories failed (first: #{}: {})", .0.len(), .0[0].0, .0[0].1)]
    Ensemble(Vec<(usize, Error)>),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

fn step_suffix(step: Option<usize>) -> String {
    match step {
        Some(s) => format!(" at step {s}"),
        None => String::new(),
    }
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    /// Attach a step index, unless one is already present.
    pub fn at_step(self, step: usize) -> Self {
        match self {
            Error::AtStep { .. } => self,
            Error::BoundaryEscape { mass, step: None } => Error::BoundaryEscape {
                mass,
                step: Some(step),
            },
            other => Error::AtStep {
                step,
                source: Box::new(other),
            },
        }
    }

    /// The innermost error, with step wrappers removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtStep { source, .. } => source.root(),
            Error::Ensemble(failures) => failures[0].1.root(),
            other => other,
        }
    }

    /// Process exit code for the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::Config(_) | Error::Io(_) => 2,
            Error::Numeric(_) | Error::BoundaryEscape { .. } | Error::Resource(_) => 3,
            Error::AtStep { .. } | Error::Ensemble(_) => unreachable!(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
