use std::path::PathBuf;

/// Errors produced anywhere in the simulator.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("photodiode orientations are not pairwise distinct (branches {branches}, tilt {tilt} rad)")]
    DegenerateOrientations { branches: usize, tilt: f64 },

    #[error("quadrature did not converge after {evaluations} evaluations (estimate {estimate:e})")]
    QuadratureDiverged { evaluations: usize, estimate: f64 },

    #[error("channel matrix is singular; users {users:?} cannot be zero-forced")]
    SingularChannel { users: Vec<usize> },

    #[error("BIA schedule for L={aps}, K={users} needs {length} slots, over the budget of {budget}")]
    ScheduleTooLarge {
        aps: usize,
        users: usize,
        length: u128,
        budget: u128,
    },

    #[error("exhaustive search over {size} assignments exceeds the budget of {budget}")]
    SearchTooLarge { size: u128, budget: u128 },

    #[error("user {user} has no AP with a positive rate")]
    UnserveableUser { user: usize },

    #[error("assignment violates constraints: {0}")]
    Infeasible(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
