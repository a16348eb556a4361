use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("schema errors:\n  {}", .0.join("\n  "))]
    Schema(Vec<String>),
    #[error("{module}: {source}")]
    Module {
        module: &'static str,
        #[source]
        source: selfdual::Error,
    },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn module(module: &'static str) -> impl Fn(selfdual::Error) -> CliError + Copy {
        move |source| CliError::Module { module, source }
    }
}
