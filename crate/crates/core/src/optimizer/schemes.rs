use super::bncg::{bncg_minimize, AcceptInfo, Objective, Termination};
use super::{IterateRecord, OptimizerConfig};
use crate::error::{Error, Result};
use crate::fields::{DesignField, StimulusField, VectorField};
use crate::functional::{volume_fractions, ObjectiveBreakdown};
use crate::problem::DesignProblem;
use crate::sensitivity::{evaluate, Evaluation};
use crate::stimulus_update::minimize_stimulus_field;

/// State handed to the observer after every accepted iterate.
#[derive(Debug)]
pub struct IterateSnapshot<'a> {
    pub record: &'a IterateRecord,
    pub design: &'a DesignField,
    pub stimulus: &'a StimulusField,
    pub displacement: &'a [VectorField],
    pub adjoint: &'a [VectorField],
}

#[derive(Debug, Clone)]
pub struct SchemeOutcome {
    pub design: DesignField,
    pub stimulus: StimulusField,
    pub displacement: Vec<VectorField>,
    pub adjoint: Vec<VectorField>,
    pub history: Vec<IterateRecord>,
    pub termination: Termination,
}

/// What is kept from an evaluation until it is accepted or discarded.
struct Cached {
    x: Vec<f64>,
    design: DesignField,
    stimulus: StimulusField,
    breakdown: ObjectiveBreakdown,
    grad_norms: (f64, f64),
    u: Vec<VectorField>,
    lambda: Vec<VectorField>,
}

impl Cached {
    fn new(x: &[f64], design: DesignField, stimulus: StimulusField, ev: Evaluation) -> Self {
        Cached {
            x: x.to_vec(),
            design,
            stimulus,
            breakdown: ev.breakdown,
            grad_norms: (ev.gradient.design_norm(), ev.gradient.stimulus_norm()),
            u: ev.state.u,
            lambda: ev.adjoint,
        }
    }
}

type Observer<'o> = dyn FnMut(&IterateSnapshot) -> Result<()> + 'o;

struct Recorder<'p, 'o> {
    problem: &'p DesignProblem,
    trials: Vec<Cached>,
    current: Option<Cached>,
    history: Vec<IterateRecord>,
    observer: &'o mut Observer<'o>,
}

impl Recorder<'_, '_> {
    fn accept(&mut self, x: &[f64], info: &AcceptInfo) -> Result<()> {
        let pos = self
            .trials
            .iter()
            .rposition(|c| c.x == x)
            .ok_or_else(|| Error::InvalidParameter("accepted point was never evaluated".into()))?;
        let c = self.trials.swap_remove(pos);
        self.trials.clear();
        let [vol_frac2, vol_frac3] = volume_fractions(&self.problem.mesh, &c.design);
        let record = IterateRecord {
            iteration: info.iteration,
            breakdown: c.breakdown,
            grad_norm_design: c.grad_norms.0,
            grad_norm_stimulus: c.grad_norms.1,
            step: info.step,
            vol_frac2,
            vol_frac3,
        };
        (self.observer)(&IterateSnapshot {
            record: &record,
            design: &c.design,
            stimulus: &c.stimulus,
            displacement: &c.u,
            adjoint: &c.lambda,
        })?;
        self.history.push(record);
        self.current = Some(c);
        Ok(())
    }

    fn finish(self, termination: Termination) -> Result<SchemeOutcome> {
        let c = self
            .current
            .ok_or_else(|| Error::InvalidParameter("optimizer accepted no iterate".into()))?;
        Ok(SchemeOutcome {
            design: c.design,
            stimulus: c.stimulus,
            displacement: c.u,
            adjoint: c.lambda,
            history: self.history,
            termination,
        })
    }
}

struct Monolithic<'p, 'o> {
    rec: Recorder<'p, 'o>,
}

impl Objective for Monolithic<'_, '_> {
    fn evaluate(&mut self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let pb = self.rec.problem;
        let n = pb.num_nodes();
        let design = DesignField::from_flat(&x[..2 * n]);
        let stimulus = StimulusField::from_flat(&x[2 * n..], pb.num_cases());
        let ev = evaluate(pb, &design, &stimulus)?;
        let value = ev.breakdown.total;
        let mut g = Vec::with_capacity(x.len());
        g.extend_from_slice(&ev.gradient.g_rho2);
        g.extend_from_slice(&ev.gradient.g_rho3);
        for gs in &ev.gradient.g_s {
            g.extend_from_slice(gs);
        }
        self.rec.trials.push(Cached::new(x, design, stimulus, ev));
        Ok((value, g))
    }

    fn accept(&mut self, x: &[f64], info: &AcceptInfo) -> Result<()> {
        self.rec.accept(x, info)
    }
}

/// Joint descent over `(ρ2, ρ3, s_1..s_n)`.
pub fn run_monolithic(
    problem: &DesignProblem,
    design0: &DesignField,
    stimulus0: &StimulusField,
    cfg: &OptimizerConfig,
    observer: &mut dyn FnMut(&IterateSnapshot) -> Result<()>,
) -> Result<SchemeOutcome> {
    let n = problem.num_nodes();
    design0.check(n)?;
    stimulus0.check(problem.num_cases(), n)?;
    let mut x0 = design0.to_flat();
    x0.extend(stimulus0.to_flat());
    let m = problem.num_cases() * n;
    let mut lower = vec![0.0; 2 * n];
    lower.extend(std::iter::repeat(-1.0).take(m));
    let upper = vec![1.0; 2 * n + m];
    let mut obj = Monolithic {
        rec: Recorder {
            problem,
            trials: Vec::new(),
            current: None,
            history: Vec::new(),
            observer,
        },
    };
    let result = bncg_minimize(&mut obj, &x0, &lower, &upper, cfg)?;
    obj.rec.finish(result.termination)
}

/// Closed-form stimulus for `design`, using the adjoint solved with `previous`.
pub fn staggered_stimulus(
    problem: &DesignProblem,
    design: &DesignField,
    previous: &StimulusField,
) -> Result<StimulusField> {
    let state = problem.solve_state(design, previous)?;
    let lambda = problem.solve_adjoint(&state)?;
    minimize_stimulus_field(
        &problem.mesh,
        design,
        &lambda,
        problem.phases(),
        problem.params.stimulus_weight,
        problem.carrier,
    )
}

struct Staggered<'p, 'o> {
    rec: Recorder<'p, 'o>,
    accepted_stimulus: StimulusField,
}

impl Objective for Staggered<'_, '_> {
    fn evaluate(&mut self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let pb = self.rec.problem;
        let design = DesignField::from_flat(x);
        let stimulus = staggered_stimulus(pb, &design, &self.accepted_stimulus)?;
        let ev = evaluate(pb, &design, &stimulus)?;
        let value = ev.breakdown.total;
        let mut g = ev.gradient.g_rho2.clone();
        g.extend_from_slice(&ev.gradient.g_rho3);
        self.rec.trials.push(Cached::new(x, design, stimulus, ev));
        Ok((value, g))
    }

    fn accept(&mut self, x: &[f64], info: &AcceptInfo) -> Result<()> {
        self.rec.accept(x, info)?;
        if let Some(c) = &self.rec.current {
            self.accepted_stimulus = c.stimulus.clone();
        }
        Ok(())
    }
}

/// Descent over `(ρ2, ρ3)`; every evaluation first minimizes the stimulus in
/// closed form, then re-solves state and adjoint with the new stimulus.
pub fn run_staggered(
    problem: &DesignProblem,
    design0: &DesignField,
    stimulus0: &StimulusField,
    cfg: &OptimizerConfig,
    observer: &mut dyn FnMut(&IterateSnapshot) -> Result<()>,
) -> Result<SchemeOutcome> {
    let n = problem.num_nodes();
    design0.check(n)?;
    stimulus0.check(problem.num_cases(), n)?;
    let mut obj = Staggered {
        rec: Recorder {
            problem,
            trials: Vec::new(),
            current: None,
            history: Vec::new(),
            observer,
        },
        accepted_stimulus: stimulus0.clone(),
    };
    let result = bncg_minimize(&mut obj, &design0.to_flat(), &vec![0.0; 2 * n], &vec![1.0; 2 * n], cfg)?;
    obj.rec.finish(result.termination)
}
