use crate::elasticity::{Constraints, Elasticity, SolverSettings, StateSolution};
use crate::error::{Error, Result};
use crate::fields::{DesignField, StimulusField, TargetDisplacement, VectorField};
use crate::functional::RegularizationParams;
use crate::materials::PhaseSet;
use crate::mesh::Mesh;
use crate::stimulus_update::StimulusCarrier;

/// Everything needed to evaluate the reduced objective on a fixed mesh.
#[derive(Debug, Clone)]
pub struct DesignProblem {
    pub mesh: Mesh,
    pub elasticity: Elasticity,
    pub targets: Vec<TargetDisplacement>,
    pub params: RegularizationParams,
    pub carrier: StimulusCarrier,
}

impl DesignProblem {
    /// Clamps the mesh's Dirichlet nodes in both directions.
    pub fn new(
        mesh: Mesh,
        phases: PhaseSet,
        targets: Vec<TargetDisplacement>,
        params: RegularizationParams,
        solver: SolverSettings,
    ) -> Result<Self> {
        let constraints = Constraints::from_mesh(&mesh);
        Self::with_constraints(mesh, phases, constraints, targets, params, solver)
    }

    pub fn with_constraints(
        mesh: Mesh,
        phases: PhaseSet,
        constraints: Constraints,
        targets: Vec<TargetDisplacement>,
        params: RegularizationParams,
        solver: SolverSettings,
    ) -> Result<Self> {
        if targets.is_empty() {
            return Err(Error::InvalidParameter("at least one target displacement is required".into()));
        }
        for t in &targets {
            t.check(mesh.num_nodes())?;
        }
        params.validate()?;
        if params.epsilon < mesh.cell_size {
            log::warn!(
                "epsilon = {} is below the cell size {}; interfaces are unresolved",
                params.epsilon,
                mesh.cell_size
            );
        }
        if mesh.target_elements.is_empty() {
            return Err(Error::InvalidParameter("mesh has no target elements".into()));
        }
        let elasticity = Elasticity::new(&mesh, phases, constraints, solver);
        Ok(DesignProblem {
            mesh,
            elasticity,
            targets,
            params,
            carrier: StimulusCarrier::default(),
        })
    }

    pub fn num_cases(&self) -> usize {
        self.targets.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.mesh.num_nodes()
    }

    pub fn phases(&self) -> &PhaseSet {
        &self.elasticity.phases
    }

    pub fn solve_state(&self, design: &DesignField, stimulus: &StimulusField) -> Result<StateSolution> {
        stimulus.check(self.num_cases(), self.num_nodes())?;
        self.elasticity.solve_state(&self.mesh, design, stimulus, None)
    }

    pub fn solve_adjoint(&self, state: &StateSolution) -> Result<Vec<VectorField>> {
        self.elasticity.solve_adjoint(&self.mesh, state, &self.targets, None)
    }
}
