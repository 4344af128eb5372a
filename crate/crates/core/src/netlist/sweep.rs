//! Clock-period sweep classifying the trojanized design into states ① to ④.

use std::fmt;

use super::sim::{classify_arrival, simulate_waveforms, Waveform};
use super::sim::ViolationKind;
use super::{shared_g_output_groups, Delays, Netlist, SHARED_G_TARGETS};
use crate::error::{Error, Result};
use crate::exec::Exec;

/// Correction-term instances, the registers they feed, and how registers recombine.
#[derive(Clone, Debug, PartialEq)]
pub struct TrojanSpec {
    pub instances: Vec<usize>,
    /// Register fed by each instance.
    pub targets: Vec<usize>,
    /// Register indices XORed into one design output bit.
    pub groups: Vec<Vec<usize>>,
}

impl TrojanSpec {
    /// `groups` empty means every register is its own output.
    pub fn new(n: &Netlist, instances: &[&str], groups: Vec<Vec<usize>>) -> Result<Self> {
        let mut ids = Vec::new();
        let mut targets = Vec::new();
        for name in instances {
            let id = n.node_id(name)?;
            let regs = n.registers_driven_by(id);
            if regs.len() != 1 {
                return Err(Error::InvalidParameter(format!(
                    "instance `{name}` must feed exactly one register, feeds {}",
                    regs.len()
                )));
            }
            ids.push(id);
            targets.push(regs[0]);
        }
        let groups = if groups.is_empty() {
            (0..n.registers().len()).map(|r| vec![r]).collect()
        } else {
            groups
        };
        Ok(Self {
            instances: ids,
            targets,
            groups,
        })
    }

    /// The `c²b²` instances of the synthesized shared `G`.
    pub fn shared_g(n: &Netlist) -> Result<Self> {
        Self::new(n, &SHARED_G_TARGETS, shared_g_output_groups(n))
    }

    pub fn recombine(&self, regs: &[bool]) -> Vec<bool> {
        self.groups
            .iter()
            .map(|g| g.iter().fold(false, |acc, &r| acc ^ regs[r]))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DesignState {
    /// Fault free and uniform.
    Uniform = 1,
    /// Metastable or partially cancelled correction.
    Unstable = 2,
    /// Fault free, correction cancelled: the Trojan is active.
    Trojan = 3,
    /// Wrong outputs.
    Faulty = 4,
}

impl DesignState {
    pub fn symbol(self) -> &'static str {
        match self {
            DesignState::Uniform => "①",
            DesignState::Unstable => "②",
            DesignState::Trojan => "③",
            DesignState::Faulty => "④",
        }
    }

    pub fn number(self) -> u8 {
        self as u8
    }
}

impl fmt::Display for DesignState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Clone, Debug)]
struct VectorPrep {
    regs: Vec<Waveform>,
    func_last: Option<f64>,
    toggles: Vec<bool>,
    expected: Vec<bool>,
}

/// Per-vector waveforms, simulated once and reused for every period.
#[derive(Clone, Debug)]
pub struct SweepPrep {
    spec: TrojanSpec,
    vectors: Vec<VectorPrep>,
}

impl SweepPrep {
    pub fn n_vectors(&self) -> usize {
        self.vectors.len()
    }

    /// Latest register transition without the instances, over all vectors.
    pub fn max_functional_arrival(&self) -> f64 {
        self.vectors
            .iter()
            .filter_map(|v| v.func_last)
            .fold(0.0, f64::max)
    }

    /// Latest transition on any instance-fed register among toggling vectors.
    pub fn max_instance_arrival(&self) -> f64 {
        self.vectors
            .iter()
            .flat_map(|v| {
                self.spec
                    .targets
                    .iter()
                    .zip(&v.toggles)
                    .filter(|(_, &t)| t)
                    .filter_map(|(&r, _)| v.regs[r].last_transition())
            })
            .fold(0.0, f64::max)
    }
}

pub fn prepare_sweep(
    n: &Netlist,
    delays: &Delays,
    spec: &TrojanSpec,
    vectors: &[(u64, u64)],
    exec: Exec,
) -> Result<SweepPrep> {
    delays.validate(n)?;
    let prep = exec.map_slice(vectors, |&(before, after)| {
        let full = simulate_waveforms(n, delays, before, after, &[]);
        let func = simulate_waveforms(n, delays, before, after, &spec.instances);
        let regs: Vec<Waveform> = n.registers().iter().map(|r| full[r.d].clone()).collect();
        let settled: Vec<bool> = regs.iter().map(|w| w.final_value()).collect();
        let func_last = n
            .registers()
            .iter()
            .filter_map(|r| func[r.d].last_transition())
            .reduce(f64::max);
        let toggles = spec
            .instances
            .iter()
            .map(|&i| full[i].initial != full[i].final_value())
            .collect();
        VectorPrep {
            regs,
            func_last,
            toggles,
            expected: spec.recombine(&settled),
        }
    });
    Ok(SweepPrep {
        spec: spec.clone(),
        vectors: prep,
    })
}

/// Counts behind the state assigned to one period.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub period: f64,
    pub state: DesignState,
    /// Vectors with a wrong recombined output.
    pub wrong: usize,
    /// Vectors where the correction term toggles.
    pub toggling: usize,
    pub all_missed: usize,
    pub partly_missed: usize,
    /// Instance-fed registers settling inside the setup window.
    pub metastable: usize,
    /// Vectors whose non-instance logic settles late or inside the window.
    pub late_functional: usize,
}

pub fn classify_period(prep: &SweepPrep, period: f64, margin_frac: f64) -> SweepPoint {
    let margin = margin_frac * period;
    let spec = &prep.spec;
    let mut p = SweepPoint {
        period,
        state: DesignState::Uniform,
        wrong: 0,
        toggling: 0,
        all_missed: 0,
        partly_missed: 0,
        metastable: 0,
        late_functional: 0,
    };
    let mut unexplained = 0usize;
    for v in &prep.vectors {
        if classify_arrival(v.func_last, period, margin).is_some() {
            p.late_functional += 1;
        }
        let mut toggled = 0;
        let mut missed = 0;
        for (k, &r) in spec.targets.iter().enumerate() {
            if !v.toggles[k] {
                continue;
            }
            toggled += 1;
            match classify_arrival(v.regs[r].last_transition(), period, margin) {
                Some(ViolationKind::Missed) => missed += 1,
                Some(ViolationKind::Metastable) => p.metastable += 1,
                None => {}
            }
        }
        let n_inst = spec.targets.len();
        if toggled > 0 {
            p.toggling += 1;
        }
        if toggled == n_inst && missed == n_inst {
            p.all_missed += 1;
        } else if missed > 0 {
            p.partly_missed += 1;
        }
        let captured: Vec<bool> = v.regs.iter().map(|w| w.value_at(period)).collect();
        if spec.recombine(&captured) != v.expected {
            p.wrong += 1;
            if missed == 0 || missed == toggled {
                unexplained += 1;
            }
        }
    }
    p.state = if p.late_functional > 0 || unexplained > 0 {
        DesignState::Faulty
    } else if p.metastable > 0
        || p.partly_missed > 0
        || (p.all_missed > 0 && p.all_missed < p.toggling)
    {
        DesignState::Unstable
    } else if p.toggling > 0 && p.all_missed == p.toggling {
        DesignState::Trojan
    } else {
        DesignState::Uniform
    };
    p
}

/// A maximal run of periods sharing one state; `high >= low`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Band {
    pub state: DesignState,
    pub high: f64,
    pub low: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateClassification {
    /// Sorted by decreasing period.
    pub points: Vec<SweepPoint>,
    pub margin_frac: f64,
}

impl StateClassification {
    pub fn bands(&self) -> Vec<Band> {
        let mut out: Vec<Band> = Vec::new();
        for p in &self.points {
            match out.last_mut() {
                Some(b) if b.state == p.state => b.low = p.period,
                _ => out.push(Band {
                    state: p.state,
                    high: p.period,
                    low: p.period,
                }),
            }
        }
        out
    }

    pub fn band(&self, state: DesignState) -> Option<Band> {
        self.bands().into_iter().find(|b| b.state == state)
    }

    /// True when states only ever advance as the period shrinks.
    pub fn is_ordered(&self) -> bool {
        self.points.windows(2).all(|w| w[0].state <= w[1].state)
    }

    pub fn state_at(&self, period: f64) -> Option<DesignState> {
        self.points
            .iter()
            .find(|p| p.period == period)
            .map(|p| p.state)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "period,frequency,state,wrong,toggling,all_missed,partly_missed,metastable,late_functional\n",
        );
        for p in &self.points {
            s += &format!(
                "{},{},{},{},{},{},{},{},{}\n",
                p.period,
                1.0 / p.period,
                p.state.number(),
                p.wrong,
                p.toggling,
                p.all_missed,
                p.partly_missed,
                p.metastable,
                p.late_functional
            );
        }
        s
    }
}

/// Classifies every period in a monotone grid.
pub fn sweep_clock(
    n: &Netlist,
    delays: &Delays,
    spec: &TrojanSpec,
    periods: &[f64],
    vectors: &[(u64, u64)],
    margin_frac: f64,
    exec: Exec,
) -> Result<StateClassification> {
    let inc = periods.windows(2).all(|w| w[0] < w[1]);
    let dec = periods.windows(2).all(|w| w[0] > w[1]);
    if periods.is_empty() || !(inc || dec) || periods.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::InvalidParameter("period grid must be positive and strictly monotone".into()));
    }
    if !(0.0..1.0).contains(&margin_frac) {
        return Err(Error::InvalidParameter(format!("setup margin fraction {margin_frac} outside [0, 1)")));
    }
    let prep = prepare_sweep(n, delays, spec, vectors, exec)?;
    let mut points: Vec<SweepPoint> = exec.map_slice(periods, |&t| classify_period(&prep, t, margin_frac));
    points.sort_by(|a, b| b.period.total_cmp(&a.period));
    Ok(StateClassification {
        points,
        margin_frac,
    })
}

/// `count` evenly spaced periods from `from` to `to` inclusive.
pub fn period_grid(from: f64, to: f64, count: usize) -> Vec<f64> {
    if count < 2 {
        return vec![from];
    }
    (0..count)
        .map(|i| from + (to - from) * i as f64 / (count - 1) as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{random_vector_pairs, synthesize_shared_g};

    /// AND delays 1, XOR delays 1, instance paths stretched to arrive at 10.
    fn stretched() -> (Netlist, Delays, TrojanSpec) {
        let n = synthesize_shared_g();
        let mut d = n.nominal_delays();
        for (i, node) in n.nodes().iter().enumerate() {
            if node.is_gate() {
                d.set(i, 1.0);
            }
        }
        for t in SHARED_G_TARGETS {
            d.set(n.node_id(t).unwrap(), 8.0);
        }
        let spec = TrojanSpec::shared_g(&n).unwrap();
        (n, d, spec)
    }

    #[test]
    fn stretched_correction_is_state_three_at_eight() {
        let (n, d, spec) = stretched();
        let vectors = random_vector_pairs(12, 2000, 5);
        let prep = prepare_sweep(&n, &d, &spec, &vectors, Exec::Parallel).unwrap();
        assert!(prep.max_functional_arrival() <= 6.0);
        assert_eq!(prep.max_instance_arrival(), 10.0);
        let p = classify_period(&prep, 8.0, 0.02);
        assert_eq!(p.state, DesignState::Trojan);
        assert_eq!(p.wrong, 0);
        assert!(p.toggling > 0);
        assert_eq!(p.all_missed, p.toggling);
        assert_eq!(classify_period(&prep, 11.0, 0.02).state, DesignState::Uniform);
        assert_eq!(classify_period(&prep, 10.1, 0.02).state, DesignState::Unstable);
        assert_eq!(classify_period(&prep, 3.0, 0.02).state, DesignState::Faulty);
    }

    #[test]
    fn single_instance_late_is_unstable() {
        let (n, mut d, spec) = stretched();
        d.set(n.node_id(SHARED_G_TARGETS[1]).unwrap(), 1.0);
        let vectors = random_vector_pairs(12, 500, 6);
        let prep = prepare_sweep(&n, &d, &spec, &vectors, Exec::Sequential).unwrap();
        let p = classify_period(&prep, 8.0, 0.02);
        assert_eq!(p.state, DesignState::Unstable);
        assert!(p.wrong > 0);
        assert_eq!(p.wrong, p.partly_missed);
    }

    #[test]
    fn sweep_is_ordered() {
        let (n, d, spec) = stretched();
        let vectors = random_vector_pairs(12, 500, 7);
        let grid = period_grid(12.0, 2.0, 101);
        let c = sweep_clock(&n, &d, &spec, &grid, &vectors, 0.02, Exec::Parallel).unwrap();
        assert!(c.is_ordered());
        let states: Vec<DesignState> = c.bands().iter().map(|b| b.state).collect();
        assert_eq!(
            states,
            [DesignState::Uniform, DesignState::Unstable, DesignState::Trojan, DesignState::Faulty]
        );
        assert!(sweep_clock(&n, &d, &spec, &[3.0, 2.0, 4.0], &vectors, 0.02, Exec::Parallel).is_err());
    }
}
