use ndfem::analysis::AnalysisError;
use ndfem::constitutive::ConstitutiveError;
use ndfem::discovery::DiscoveryError;
use ndfem::experiments::ExperimentError;
use ndfem::fem::FemError;
use ndfem::mesh::MeshError;
use std::fmt;
use std::process::ExitCode;

/// Failure classes with their process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Config,
    Solver,
    Data,
    Property,
}

impl Category {
    pub fn code(self) -> u8 {
        match self {
            Category::Config => 2,
            Category::Solver => 3,
            Category::Data => 4,
            Category::Property => 5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Category::Config => "config",
            Category::Solver => "solver",
            Category::Data => "data",
            Category::Property => "property",
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub category: Category,
    pub message: String,
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn new(category: Category, message: impl Into<String>) -> Self {
        Self { category, message: message.into() }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(Category::Config, message)
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self::new(Category::Data, message)
    }

    pub fn solver(message: impl Into<String>) -> Self {
        Self::new(Category::Solver, message)
    }

    /// Prefixes the message with the file or step it concerns.
    pub fn context(mut self, what: impl fmt::Display) -> Self {
        self.message = format!("{what}: {}", self.message);
        self
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.category.code())
    }

    /// One line for stderr: `error category=<name> message="<text>"`.
    pub fn report(&self) -> String {
        format!("error category={} message={:?}", self.category.name(), self.message)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} error: {}", self.category.name(), self.message)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::data(e.to_string())
    }
}

impl From<MeshError> for CliError {
    fn from(e: MeshError) -> Self {
        let cat = match e {
            MeshError::GeometryInfeasible(_) => Category::Config,
            MeshError::MalformedMeshFile { .. } | MeshError::InvalidMesh(_) | MeshError::Io(_) => Category::Data,
        };
        CliError::new(cat, e.to_string())
    }
}

impl From<FemError> for CliError {
    fn from(e: FemError) -> Self {
        let cat = match e {
            FemError::UnknownTag(_)
            | FemError::RigidBodyModes
            | FemError::NonAxisAligned { .. }
            | FemError::ConflictingConstraint { .. }
            | FemError::TagNotDirichlet(_) => Category::Config,
            FemError::MalformedSolutionFile { .. } | FemError::DimensionMismatch { .. } | FemError::PointOutsideMesh(_) => Category::Data,
            _ => Category::Solver,
        };
        CliError::new(cat, e.to_string())
    }
}

impl From<ConstitutiveError> for CliError {
    fn from(e: ConstitutiveError) -> Self {
        let cat = match e {
            ConstitutiveError::MalformedCheckpoint(_) => Category::Data,
            ConstitutiveError::InvalidParameters(_) => Category::Config,
            ConstitutiveError::Kinematics(_) => Category::Solver,
        };
        CliError::new(cat, e.to_string())
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::UnknownSetup(_) => CliError::config(e.to_string()),
            ExperimentError::Mesh(m) => m.into(),
            ExperimentError::Fem(f) => f.into(),
            ExperimentError::MalformedDataset(_) | ExperimentError::Io(_) => CliError::data(e.to_string()),
        }
    }
}

impl From<DiscoveryError> for CliError {
    fn from(e: DiscoveryError) -> Self {
        match e {
            DiscoveryError::Fem(f) => f.into(),
            DiscoveryError::Constitutive(c) => c.into(),
            DiscoveryError::Experiment(x) => x.into(),
            DiscoveryError::Misaligned(_) => CliError::data(e.to_string()),
            DiscoveryError::SolveFailure { .. } | DiscoveryError::AllSeedsFailed(_) => CliError::solver(e.to_string()),
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        let cat = match e {
            AnalysisError::InvalidParameter(_) => Category::Config,
            AnalysisError::NoConvergence(_) | AnalysisError::Solve(_) => Category::Solver,
            AnalysisError::Fem(f) => return f.into(),
            _ => Category::Data,
        };
        CliError::new(cat, e.to_string())
    }
}
