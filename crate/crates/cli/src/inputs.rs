//! Turning a configuration into fields on the grid.

use plab_core::field::read_dump;
use plab_core::field::gradient;
use plab_core::orlicz::{a_map, v_map};
use plab_core::solver::{manufactured_forcing, solve_p_poisson, ExactSolution};
use plab_core::{
    ConvergenceRecord, DirichletProblem, ExponentCtx, Grid2D, ScalarField, Solution, Vec2, VectorField,
};

use crate::config::{BoundarySpec, DomainMask, ForcingSpec, Loaded, SeriesSpec, SolutionSpec};
use crate::CliError;

/// The solution of the configured problem and everything derived from it.
pub struct Inputs {
    pub ctx: ExponentCtx,
    pub grid: Grid2D,
    pub u: ScalarField,
    pub grad: VectorField,
    pub forcing: Option<VectorField>,
    /// Present when the solution was computed rather than read.
    pub record: Option<ConvergenceRecord>,
    pub exact: Option<ExactSolution>,
}

impl Inputs {
    pub fn a_grad(&self) -> VectorField {
        self.grad.map(|q| a_map(&self.ctx, q))
    }

    pub fn v_grad(&self) -> VectorField {
        self.grad.map(|q| v_map(&self.ctx, q))
    }
}

fn check_grid<T: plab_core::field::FieldValue>(field: &plab_core::Field<T>, grid: &Grid2D, what: &str) -> Result<(), CliError> {
    if field.grid() != grid {
        return Err(CliError::Config(format!("{what}: dump grid differs from the configured grid")));
    }
    Ok(())
}

/// The closed-form solution behind the data, when there is one.
pub fn exact_solution(loaded: &Loaded) -> Result<Option<ExactSolution>, CliError> {
    let cfg = &loaded.config;
    let ctx = cfg.ctx()?;
    let seed = cfg.effective_seed();
    let entry = match (&cfg.forcing, &cfg.boundary) {
        (ForcingSpec::Manufactured { solution, .. }, _) => Some(match solution {
            SolutionSpec::Catalogue(e) => e.clone(),
            SolutionSpec::Random(r) => plab_core::solver::CatalogueEntry::Trig(r.series(seed)),
        }),
        (ForcingSpec::None, Some(BoundarySpec::Catalogue(e))) => Some(e.clone()),
        _ => None,
    };
    entry
        .map(|e| ExactSolution::new(e, &ctx).map_err(CliError::from))
        .transpose()
}

/// Dirichlet data on every node; only boundary values matter for the solve.
pub fn boundary_data(loaded: &Loaded) -> Result<ScalarField, CliError> {
    let cfg = &loaded.config;
    let ctx = cfg.ctx()?;
    let grid = cfg.grid()?;
    let seed = cfg.effective_seed();
    match &cfg.boundary {
        Some(BoundarySpec::Catalogue(e)) => Ok(ExactSolution::new(e.clone(), &ctx)?.sample(&grid)?.0),
        Some(BoundarySpec::Random(r)) => {
            let s = r.series(seed);
            Ok(grid.sample(|q| s.value(q)))
        }
        Some(BoundarySpec::File(p)) => {
            let u: ScalarField = read_dump(&loaded.base_dir.join(p))?;
            check_grid(&u, &grid, "boundary")?;
            Ok(u)
        }
        None => match exact_solution(loaded)? {
            Some(exact) => Ok(exact.sample(&grid)?.0),
            None => Err(CliError::Config("boundary: required unless the forcing is manufactured".into())),
        },
    }
}

pub fn forcing_field(loaded: &Loaded) -> Result<Option<VectorField>, CliError> {
    let cfg = &loaded.config;
    let ctx = cfg.ctx()?;
    let grid = cfg.grid()?;
    match &cfg.forcing {
        ForcingSpec::None => Ok(None),
        ForcingSpec::Manufactured { psi, .. } => {
            let exact = exact_solution(loaded)?.expect("manufactured forcing has a solution");
            let psi = psi.as_ref().map(|s| match s {
                SeriesSpec::Series(t) => t.clone(),
                SeriesSpec::Random(r) => r.series(cfg.effective_seed()),
            });
            Ok(Some(manufactured_forcing(&exact, &ctx, &grid, psi.as_ref())?))
        }
        ForcingSpec::File(p) => {
            let f: VectorField = read_dump(&loaded.base_dir.join(p))?;
            check_grid(&f, &grid, "forcing")?;
            Ok(Some(f))
        }
    }
}

pub fn problem(loaded: &Loaded) -> Result<DirichletProblem, CliError> {
    let cfg = &loaded.config;
    let ctx = cfg.ctx()?;
    let grid = cfg.grid()?;
    let data = boundary_data(loaded)?;
    let forcing = forcing_field(loaded)?;
    let prob = match cfg.domain_mask {
        DomainMask::Rectangle => DirichletProblem::new(ctx, data, forcing)?,
        DomainMask::Disk { center, radius } => {
            let c = Vec2::new(center[0], center[1]);
            let mask = (0..grid.len())
                .map(|k| !grid.is_boundary_node(k) && (grid.node_position(k) - c).norm() < radius)
                .collect();
            DirichletProblem::with_mask(ctx, data, forcing, mask)?
        }
    };
    Ok(prob)
}

pub fn solve(loaded: &Loaded) -> Result<(Solution, Option<VectorField>), CliError> {
    let prob = problem(loaded)?;
    let sol = solve_p_poisson(&prob, &loaded.config.solver)?;
    Ok((sol, prob.forcing().cloned()))
}

/// Read the configured solution dump, or solve.
pub fn load(loaded: &Loaded) -> Result<Inputs, CliError> {
    let cfg = &loaded.config;
    let ctx = cfg.ctx()?;
    let grid = cfg.grid()?;
    let (u, forcing, record) = match &cfg.solution {
        Some(p) => {
            let u: ScalarField = read_dump(&loaded.base_dir.join(p))?;
            check_grid(&u, &grid, "solution")?;
            (u, forcing_field(loaded)?, None)
        }
        None => {
            let (sol, forcing) = solve(loaded)?;
            (sol.u, forcing, Some(sol.record))
        }
    };
    let grad = gradient(&u);
    Ok(Inputs {
        ctx,
        grid,
        u,
        grad,
        forcing,
        record,
        exact: exact_solution(loaded)?,
    })
}
