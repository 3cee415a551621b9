use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("numerical error{}: {detail}", location(.round, .client))]
    Numerical {
        round: Option<usize>,
        client: Option<usize>,
        detail: String,
    },

    /// Raised by aggregation when no client contributed to a model this round.
    #[error("no contributions to aggregate")]
    NoContributions,

    #[error("client {client} failed in round {round}: {source}")]
    Client {
        client: usize,
        round: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn location(round: &Option<usize>, client: &Option<usize>) -> String {
    match (round, client) {
        (Some(r), Some(c)) => format!(" (round {r}, client {c})"),
        (Some(r), None) => format!(" (round {r})"),
        (None, Some(c)) => format!(" (client {c})"),
        (None, None) => String::new(),
    }
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub(crate) fn numerical(detail: impl Into<String>) -> Self {
        Error::Numerical {
            round: None,
            client: None,
            detail: detail.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Attaches a client id to numerical errors that do not carry one yet.
    pub(crate) fn for_client(self, id: usize) -> Self {
        match self {
            Error::Numerical {
                round,
                client: None,
                detail,
            } => Error::Numerical {
                round,
                client: Some(id),
                detail,
            },
            other => other,
        }
    }

    /// Process exit code used by the `sim` binary.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::Client { source, .. } => source.exit_code().max(2),
            _ => 2,
        }
    }
}
