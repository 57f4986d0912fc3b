use thiserror::Error;

use crate::cluster::ClusterError;
use crate::ingest::IngestError;
use crate::model::ModelError;
use crate::profile::ProfileError;
use crate::wrangle::WrangleError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Wrangle(#[from] WrangleError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
