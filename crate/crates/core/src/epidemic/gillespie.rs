use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tree::SumTree;
use crate::error::{Error, Result};
use crate::network::ContactNetwork;
use crate::types::{DurationCategory, DURATION_HALF_MINUTES};

/// Force-of-infection units per unit of normalized weight: edge weights are
/// `half_minutes / 960`, so weighted sums are exact in integer units.
const WEIGHT_UNITS: f64 = 960.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpidemicParams {
    /// Transmission rate per unit edge weight per day.
    pub tau: f64,
    /// Mean latent period in days, split over three exposed stages.
    pub sigma_inv: f64,
    /// Mean infectious period in days.
    pub gamma_inv: f64,
    /// When false every edge transmits with weight 1.
    pub use_duration_weights: bool,
}

impl Default for EpidemicParams {
    fn default() -> Self {
        EpidemicParams { tau: 1.0, sigma_inv: 3.0, gamma_inv: 4.0, use_duration_weights: true }
    }
}

impl EpidemicParams {
    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        if !(self.tau.is_finite() && self.tau >= 0.0) || !ok(self.sigma_inv) || !ok(self.gamma_inv) {
            return Err(Error::InvalidInput("epidemic rates must be positive and finite".into()));
        }
        Ok(())
    }

    /// Rate of each exposed-stage transition.
    pub fn stage_rate(&self) -> f64 {
        3.0 / self.sigma_inv
    }

    pub fn recovery_rate(&self) -> f64 {
        1.0 / self.gamma_inv
    }

    /// Integer weight units of an edge of duration `d`.
    fn units(&self, d: DurationCategory) -> u64 {
        if self.use_duration_weights {
            DURATION_HALF_MINUTES[d.index()]
        } else {
            1
        }
    }

    /// Hazard per unit of accumulated weight units.
    fn unit_rate(&self) -> f64 {
        if self.use_duration_weights {
            self.tau / WEIGHT_UNITS
        } else {
            self.tau
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    /// Keep a full event log and compartment series.
    pub record_events: bool,
    /// After every event, compare the maintained force of infection of
    /// each susceptible with a from-scratch sum (slow).
    pub check_force: bool,
    /// Stop once every case of generation `<= g` has recovered; the
    /// generation sizes up to `g + 1` are then final.
    pub stop_after_generation: Option<u32>,
    /// Fixed index case instead of weighted-degree seeding.
    pub index_case: Option<u32>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum State {
    S,
    E1,
    E2,
    E3,
    I,
    R,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Transition {
    Infection,
    E1ToE2,
    E2ToE3,
    Onset,
    Recovery,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Compartments {
    pub s: u64,
    pub e1: u64,
    pub e2: u64,
    pub e3: u64,
    pub i: u64,
    pub r: u64,
}

impl Compartments {
    pub fn total(&self) -> u64 {
        self.s + self.e1 + self.e2 + self.e3 + self.i + self.r
    }

    pub fn get_mut(&mut self, state: State) -> &mut u64 {
        match state {
            State::S => &mut self.s,
            State::E1 => &mut self.e1,
            State::E2 => &mut self.e2,
            State::E3 => &mut self.e3,
            State::I => &mut self.i,
            State::R => &mut self.r,
        }
    }

    fn apply(&mut self, t: Transition) {
        let (from, to) = t.states();
        *self.get_mut(from) -= 1;
        *self.get_mut(to) += 1;
    }
}

impl Transition {
    pub fn label(self) -> &'static str {
        match self {
            Transition::Infection => "S->E1",
            Transition::E1ToE2 => "E1->E2",
            Transition::E2ToE3 => "E2->E3",
            Transition::Onset => "E3->I",
            Transition::Recovery => "I->R",
        }
    }

    pub fn states(self) -> (State, State) {
        match self {
            Transition::Infection => (State::S, State::E1),
            Transition::E1ToE2 => (State::E1, State::E2),
            Transition::E2ToE3 => (State::E2, State::E3),
            Transition::Onset => (State::E3, State::I),
            Transition::Recovery => (State::I, State::R),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub time: f64,
    pub node: u32,
    pub transition: Transition,
    pub infector: Option<u32>,
}

/// One infected individual. Times not reached before the run stopped are NaN.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Infection {
    pub node: u32,
    pub infector: Option<u32>,
    pub generation: u32,
    pub infected_at: f64,
    pub infectious_at: f64,
    pub recovered_at: f64,
    /// Duration of the transmitting edge; `None` for the index case.
    pub via: Option<DurationCategory>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpidemicTrace {
    pub n: usize,
    /// In order of infection; the index case first.
    pub infections: Vec<Infection>,
    /// `generation_sizes[g - 1] = |g_g|`.
    pub generation_sizes: Vec<u64>,
    pub final_counts: Compartments,
    pub end_time: f64,
    /// Stopped early by [`RunOptions::stop_after_generation`].
    pub truncated: bool,
    pub events: Vec<EventRecord>,
    pub series: Vec<(f64, Compartments)>,
}

impl EpidemicTrace {
    pub fn generation_size(&self, g: u32) -> u64 {
        self.generation_sizes.get(g as usize - 1).copied().unwrap_or(0)
    }

    /// Ever-infected count at the end of the run; equals `R(end)` for a
    /// run that ran to extinction.
    pub fn recovered(&self) -> u64 {
        self.final_counts.r
    }

    /// Number of infectees of each case in generation `g`.
    pub fn offspring(&self, g: u32) -> Vec<u64> {
        let mut slot = std::collections::HashMap::new();
        let mut counts = Vec::new();
        for inf in self.infections.iter().filter(|i| i.generation == g) {
            slot.insert(inf.node, counts.len());
            counts.push(0u64);
        }
        for inf in self.infections.iter().filter(|i| i.generation == g + 1) {
            if let Some(&k) = inf.infector.and_then(|p| slot.get(&p)) {
                counts[k] += 1;
            }
        }
        counts
    }
}

/// Index case drawn with probability proportional to weighted degree.
pub fn seed_index_case<R: Rng + ?Sized>(network: &ContactNetwork, params: &EpidemicParams, rng: &mut R) -> Result<u32> {
    let weights: Vec<u64> = (0..network.node_count()).map(|i| network.neighbors(i).map(|(_, e)| params.units(e.duration)).sum()).collect();
    let total: u64 = weights.iter().sum();
    if total == 0 {
        return Err(Error::EmptyNetwork);
    }
    let mut u = rng.random_range(0..total);
    for (i, &w) in weights.iter().enumerate() {
        if u < w {
            return Ok(i as u32);
        }
        u -= w;
    }
    unreachable!("u is below the total weight")
}

struct Engine<'a> {
    net: &'a ContactNetwork,
    params: &'a EpidemicParams,
    state: Vec<State>,
    /// Weight units from infectious neighbours, for susceptible nodes.
    force: Vec<u64>,
    slot: Vec<u32>,
    tree: SumTree,
    trace: EpidemicTrace,
    counts: Compartments,
    /// Cases of generation `<= stop` not yet recovered.
    open_early: u64,
}

const NO_SLOT: u32 = u32::MAX;

impl Engine<'_> {
    fn refresh(&mut self, i: usize) {
        let rate = match self.state[i] {
            State::S => self.force[i] as f64 * self.params.unit_rate(),
            State::E1 | State::E2 | State::E3 => self.params.stage_rate(),
            State::I => self.params.recovery_rate(),
            State::R => 0.0,
        };
        self.tree.set(i, rate);
    }

    fn shift_force(&mut self, i: usize, add: bool) {
        let net = self.net;
        for (j, e) in net.neighbors(i) {
            let j = j as usize;
            if self.state[j] == State::S {
                let w = self.params.units(e.duration);
                if add {
                    self.force[j] += w;
                } else {
                    self.force[j] -= w;
                }
                self.refresh(j);
            }
        }
    }

    fn pick_infector<R: Rng + ?Sized>(&self, i: usize, rng: &mut R) -> (u32, DurationCategory) {
        let mut u = rng.random_range(0..self.force[i]);
        for (j, e) in self.net.neighbors(i) {
            if self.state[j as usize] == State::I {
                let w = self.params.units(e.duration);
                if u < w {
                    return (j, e.duration);
                }
                u -= w;
            }
        }
        unreachable!("force of infection matches infectious neighbours")
    }

    fn check_force(&self) {
        for i in 0..self.net.node_count() {
            if self.state[i] == State::S {
                let fresh: u64 = self.net.neighbors(i).filter(|(j, _)| self.state[*j as usize] == State::I).map(|(_, e)| self.params.units(e.duration)).sum();
                assert_eq!(fresh, self.force[i], "force of infection drifted at node {i}");
            }
        }
    }

    fn infect(&mut self, i: usize, infector: Option<(u32, DurationCategory)>, generation: u32, time: f64) {
        self.slot[i] = self.trace.infections.len() as u32;
        self.trace.infections.push(Infection {
            node: i as u32,
            infector: infector.map(|p| p.0),
            generation,
            infected_at: time,
            infectious_at: f64::NAN,
            recovered_at: f64::NAN,
            via: infector.map(|p| p.1),
        });
        let g = generation as usize;
        if self.trace.generation_sizes.len() < g {
            self.trace.generation_sizes.resize(g, 0);
        }
        self.trace.generation_sizes[g - 1] += 1;
    }
}

/// Exact continuous-time SEIR run by the direct method. The index case
/// starts infectious at time 0.
pub fn gillespie_run<R: Rng + ?Sized>(network: &ContactNetwork, params: &EpidemicParams, options: &RunOptions, rng: &mut R) -> Result<EpidemicTrace> {
    params.validate()?;
    let n = network.node_count();
    let index = match options.index_case {
        Some(i) if (i as usize) < n => i,
        Some(i) => return Err(Error::InvalidInput(format!("index case {i} out of range"))),
        None => seed_index_case(network, params, rng)?,
    };
    let mut eng = Engine {
        net: network,
        params,
        state: vec![State::S; n],
        force: vec![0; n],
        slot: vec![NO_SLOT; n],
        tree: SumTree::new(n),
        trace: EpidemicTrace {
            n,
            infections: Vec::new(),
            generation_sizes: Vec::new(),
            final_counts: Compartments::default(),
            end_time: 0.0,
            truncated: false,
            events: Vec::new(),
            series: Vec::new(),
        },
        counts: Compartments { s: n as u64 - 1, i: 1, ..Default::default() },
        open_early: 0,
    };
    let stop = options.stop_after_generation;
    let ix = index as usize;
    eng.infect(ix, None, 1, 0.0);
    eng.trace.infections[0].infectious_at = 0.0;
    eng.state[ix] = State::I;
    eng.refresh(ix);
    eng.shift_force(ix, true);
    if stop.is_some_and(|g| g >= 1) {
        eng.open_early = 1;
    }
    if options.record_events {
        eng.trace.series.push((0.0, eng.counts));
    }

    let mut t = 0.0;
    while eng.tree.total() > 0.0 {
        if stop.is_some() && eng.open_early == 0 {
            eng.trace.truncated = true;
            break;
        }
        let total = eng.tree.total();
        t += -(1.0 - rng.random::<f64>()).ln() / total;
        let i = eng.tree.sample(rng);
        let (transition, infector) = match eng.state[i] {
            State::S => {
                let (p, d) = eng.pick_infector(i, rng);
                let generation = eng.trace.infections[eng.slot[p as usize] as usize].generation + 1;
                eng.infect(i, Some((p, d)), generation, t);
                if stop.is_some_and(|g| generation <= g) {
                    eng.open_early += 1;
                }
                eng.state[i] = State::E1;
                eng.force[i] = 0;
                (Transition::Infection, Some(p))
            }
            State::E1 => {
                eng.state[i] = State::E2;
                (Transition::E1ToE2, None)
            }
            State::E2 => {
                eng.state[i] = State::E3;
                (Transition::E2ToE3, None)
            }
            State::E3 => {
                eng.state[i] = State::I;
                eng.trace.infections[eng.slot[i] as usize].infectious_at = t;
                eng.shift_force(i, true);
                (Transition::Onset, None)
            }
            State::I => {
                eng.state[i] = State::R;
                let inf = &mut eng.trace.infections[eng.slot[i] as usize];
                inf.recovered_at = t;
                if stop.is_some_and(|g| inf.generation <= g) {
                    eng.open_early -= 1;
                }
                eng.shift_force(i, false);
                (Transition::Recovery, None)
            }
            State::R => unreachable!("recovered nodes have zero rate"),
        };
        eng.refresh(i);
        eng.counts.apply(transition);
        debug_assert_eq!(eng.counts.total(), n as u64);
        if options.record_events {
            eng.trace.events.push(EventRecord { time: t, node: i as u32, transition, infector });
            eng.trace.series.push((t, eng.counts));
        }
        if options.check_force {
            eng.check_force();
        }
    }
    eng.trace.end_time = t;
    eng.trace.final_counts = eng.counts;
    Ok(eng.trace)
}
