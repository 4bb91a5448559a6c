use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("facet {facet} references vertex {index} but the mesh has {vertex_count} vertices")]
    IndexOutOfRange {
        facet: usize,
        index: usize,
        vertex_count: usize,
    },
    #[error("facet {facet} repeats vertex {index}")]
    RepeatedIndex { facet: usize, index: usize },
    #[error("mesh needs at least {min_vertices} vertices and {min_facets} facets, got {vertices} and {facets}")]
    TooSmall {
        vertices: usize,
        facets: usize,
        min_vertices: usize,
        min_facets: usize,
    },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cannot reach {requested} output vertices; the smallest achievable count is {achievable}")]
    Infeasible { requested: usize, achievable: usize },
    #[error("{path}: parse error at {location}: {message}")]
    Parse {
        path: PathBuf,
        location: String,
        message: String,
    },
    #[error("{path}: unsupported format: {message}")]
    Format { path: PathBuf, message: String },
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
}
