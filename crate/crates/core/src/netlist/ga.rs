//! Genetic distribution of a target path delay over the selected path gates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::sim::simulate_waveforms;
use super::sweep::TrojanSpec;
use super::{Delays, Netlist, SensitizedPath};
use crate::error::{Error, Result};
use crate::exec::Exec;

/// Smallest delay the repair step will assign.
const MIN_DELAY: f64 = 1e-3;
const EQ1_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    pub mutation_rate: f64,
    pub crossover_rate: f64,
    /// Target path delay `D`.
    pub target_delay: f64,
    /// Window half-width `c`.
    pub c: f64,
    pub seed: u64,
    /// Attack period; defaults to midway between the non-correction critical path and `D`.
    pub period: Option<f64>,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population: 24,
            generations: 12,
            mutation_rate: 0.25,
            crossover_rate: 0.8,
            target_delay: 0.0,
            c: 1.0,
            seed: 1,
            period: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitnessReport {
    pub period: f64,
    pub error_rate_design: f64,
    pub error_rate_target: f64,
    pub cost: f64,
}

impl FitnessReport {
    fn new(period: f64, error_rate_design: f64, error_rate_target: f64) -> Self {
        let cost = if error_rate_target > 0.0 {
            error_rate_design + 1.0 / error_rate_target
        } else {
            f64::INFINITY
        };
        Self {
            period,
            error_rate_design,
            error_rate_target,
            cost,
        }
    }
}

/// Design error rate and the rate at which every instance misses the edge,
/// the latter over vectors where the instances toggle.
pub fn evaluate_fitness(
    n: &Netlist,
    delays: &Delays,
    spec: &TrojanSpec,
    period: f64,
    vectors: &[(u64, u64)],
) -> FitnessReport {
    let mut wrong = 0usize;
    let mut toggling = 0usize;
    let mut missed = 0usize;
    for &(before, after) in vectors {
        let w = simulate_waveforms(n, delays, before, after, &[]);
        let captured: Vec<bool> = n.registers().iter().map(|r| w[r.d].value_at(period)).collect();
        let settled: Vec<bool> = n.registers().iter().map(|r| w[r.d].final_value()).collect();
        if spec.recombine(&captured) != spec.recombine(&settled) {
            wrong += 1;
        }
        let toggles = spec
            .instances
            .iter()
            .all(|&i| w[i].initial != w[i].final_value());
        if toggles {
            toggling += 1;
            let all_late = spec.targets.iter().all(|&r| {
                w[n.registers()[r].d]
                    .last_transition()
                    .is_some_and(|t| t > period)
            });
            if all_late {
                missed += 1;
            }
        }
    }
    let erd = if vectors.is_empty() {
        0.0
    } else {
        wrong as f64 / vectors.len() as f64
    };
    let ert = if toggling == 0 {
        0.0
    } else {
        missed as f64 / toggling as f64
    };
    FitnessReport::new(period, erd, ert)
}

/// Allowed delay interval per gate, `[d' + s - c, d' + s + c]`, floored at a small positive delay.
pub fn path_windows(nominal: &[f64], slack: &[f64], c: f64) -> Vec<(f64, f64)> {
    nominal
        .iter()
        .zip(slack)
        .map(|(&d, &s)| ((d + s - c).max(MIN_DELAY), d + s + c))
        .collect()
}

fn envelope(windows: &[(f64, f64)]) -> (f64, f64) {
    windows
        .iter()
        .fold((0.0, 0.0), |(lo, hi), &(a, b)| (lo + a, hi + b))
}

/// Scales `genes` to sum to `target`, clamps into `windows`, then spreads the
/// remainder over gates with room left.
pub fn repair(genes: &mut [f64], windows: &[(f64, f64)], target: f64) -> Result<()> {
    let (min, max) = envelope(windows);
    if windows.iter().any(|&(lo, hi)| lo > hi) || target < min - EQ1_TOL || target > max + EQ1_TOL {
        return Err(Error::InfeasibleTarget { target, min, max });
    }
    let sum: f64 = genes.iter().sum();
    if sum > 0.0 && sum.is_finite() {
        genes.iter_mut().for_each(|g| *g *= target / sum);
    } else {
        genes
            .iter_mut()
            .zip(windows)
            .for_each(|(g, &(lo, hi))| *g = 0.5 * (lo + hi));
    }
    let clamp = |genes: &mut [f64]| {
        genes
            .iter_mut()
            .zip(windows)
            .for_each(|(g, &(lo, hi))| *g = g.clamp(lo, hi));
    };
    clamp(genes);
    for _ in 0..genes.len() + 2 {
        let r = target - genes.iter().sum::<f64>();
        if r.abs() <= EQ1_TOL * 1e-3 {
            break;
        }
        let room: Vec<f64> = genes
            .iter()
            .zip(windows)
            .map(|(&g, &(lo, hi))| if r > 0.0 { hi - g } else { g - lo })
            .collect();
        let total: f64 = room.iter().sum();
        if total <= 0.0 {
            break;
        }
        genes
            .iter_mut()
            .zip(&room)
            .for_each(|(g, &rm)| *g += r * rm / total);
        clamp(genes);
    }
    // put the last rounding residue on the gate with the most room
    let r = target - genes.iter().sum::<f64>();
    if r != 0.0 {
        let k = (0..genes.len())
            .max_by(|&a, &b| {
                let room = |i: usize| (genes[i] - windows[i].0).min(windows[i].1 - genes[i]);
                room(a).total_cmp(&room(b))
            })
            .expect("nonempty path");
        genes[k] += r;
    }
    Ok(())
}

/// Assigned delays for the gates of each selected path.
#[derive(Clone, Debug, PartialEq)]
pub struct DelayAssignment {
    pub paths: Vec<Vec<usize>>,
    pub nominal: Vec<Vec<f64>>,
    pub slack: Vec<Vec<f64>>,
    pub assigned: Vec<Vec<f64>>,
    pub target: f64,
    pub c: f64,
    /// Reference clock period the slacks are measured against.
    pub t_ref: f64,
}

impl DelayAssignment {
    /// Verifies the per-path sum and every per-gate window.
    pub fn check(&self) -> Result<()> {
        for p in 0..self.paths.len() {
            let sum: f64 = self.assigned[p].iter().sum();
            if (sum - self.target).abs() > EQ1_TOL * self.target.abs().max(1.0) {
                return Err(Error::InvalidParameter(format!(
                    "path {p}: delays sum to {sum}, expected {}",
                    self.target
                )));
            }
            let w = path_windows(&self.nominal[p], &self.slack[p], self.c);
            for (i, (&d, &(lo, hi))) in self.assigned[p].iter().zip(&w).enumerate() {
                if d < lo - EQ1_TOL || d > hi + EQ1_TOL {
                    return Err(Error::InvalidParameter(format!(
                        "path {p} gate {i}: delay {d} outside [{lo}, {hi}]"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Nominal delays with the path gates overridden.
    pub fn delays(&self, n: &Netlist) -> Delays {
        let mut d = n.nominal_delays();
        for (p, gates) in self.paths.iter().enumerate() {
            for (k, &g) in gates.iter().enumerate() {
                d.set(g, self.assigned[p][k]);
            }
        }
        d
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaOutcome {
    pub assignment: DelayAssignment,
    pub report: FitnessReport,
    /// Best cost after initialization and after each generation.
    pub history: Vec<f64>,
    /// Longest path avoiding the instances, nominal delays.
    pub nominal_critical: f64,
    /// Same, under the assigned delays.
    pub assigned_critical: f64,
}

impl GaOutcome {
    /// Distance between `D` and the next-longest path; at least `c` counts as unique.
    pub fn uniqueness_gap(&self) -> f64 {
        self.assignment.target - self.assigned_critical
    }
}

struct Layout {
    paths: Vec<Vec<usize>>,
    nominal: Vec<Vec<f64>>,
    slack: Vec<Vec<f64>>,
    windows: Vec<Vec<(f64, f64)>>,
}

impl Layout {
    fn split<'a>(&self, genome: &'a [f64]) -> Vec<&'a [f64]> {
        let mut out = Vec::new();
        let mut at = 0;
        for p in &self.paths {
            out.push(&genome[at..at + p.len()]);
            at += p.len();
        }
        out
    }

    fn repair(&self, genome: &mut [f64], target: f64) -> Result<()> {
        let mut at = 0;
        for (p, w) in self.paths.iter().zip(&self.windows) {
            repair(&mut genome[at..at + p.len()], w, target)?;
            at += p.len();
        }
        Ok(())
    }

    fn flat_windows(&self) -> Vec<(f64, f64)> {
        self.windows.iter().flatten().copied().collect()
    }

    fn delays(&self, n: &Netlist, genome: &[f64]) -> Delays {
        let mut d = n.nominal_delays();
        for (gates, genes) in self.paths.iter().zip(self.split(genome)) {
            for (&g, &v) in gates.iter().zip(genes) {
                d.set(g, v);
            }
        }
        d
    }
}

#[derive(Clone, Copy, Debug)]
struct Score {
    report: FitnessReport,
    critical: f64,
}

impl Score {
    /// Lower cost first, then a shorter non-instance critical path.
    fn better_than(&self, o: &Score) -> bool {
        self.report
            .cost
            .total_cmp(&o.report.cost)
            .then(self.critical.total_cmp(&o.critical))
            .is_lt()
    }
}

/// Searches per-gate delays on `paths` so each sums to `D` within its windows,
/// minimizing `error_rate_design + 1 / error_rate_target` at the attack period.
pub fn distribute_delays(
    n: &Netlist,
    paths: &[SensitizedPath],
    spec: &TrojanSpec,
    cfg: &GaConfig,
    vectors: &[(u64, u64)],
    exec: Exec,
) -> Result<GaOutcome> {
    if cfg.population < 2 || paths.is_empty() || vectors.is_empty() {
        return Err(Error::InvalidParameter("GA needs population >= 2, paths and vectors".into()));
    }
    if !(0.0..=1.0).contains(&cfg.mutation_rate) || !(0.0..=1.0).contains(&cfg.crossover_rate) {
        return Err(Error::InvalidParameter("GA rates must lie in [0, 1]".into()));
    }
    if !(cfg.c >= 0.0 && cfg.target_delay > 0.0) {
        return Err(Error::InvalidParameter("need D > 0 and c >= 0".into()));
    }
    let nominal = n.nominal_delays();
    let t_ref = n.critical_path(&nominal);
    let slacks = n.slacks(&nominal, t_ref);
    let mut seen = vec![false; n.nodes().len()];
    let mut layout = Layout {
        paths: Vec::new(),
        nominal: Vec::new(),
        slack: Vec::new(),
        windows: Vec::new(),
    };
    for p in paths {
        for &g in &p.gates {
            if std::mem::replace(&mut seen[g], true) {
                return Err(Error::InvalidParameter(format!(
                    "gate `{}` appears on more than one path",
                    n.node(g).name
                )));
            }
        }
        let dn: Vec<f64> = p.gates.iter().map(|&g| nominal.get(g)).collect();
        let sl: Vec<f64> = p.gates.iter().map(|&g| slacks[g]).collect();
        let w = path_windows(&dn, &sl, cfg.c);
        let (min, max) = envelope(&w);
        if cfg.target_delay < min || cfg.target_delay > max {
            return Err(Error::InfeasibleTarget {
                target: cfg.target_delay,
                min,
                max,
            });
        }
        layout.paths.push(p.gates.clone());
        layout.nominal.push(dn);
        layout.slack.push(sl);
        layout.windows.push(w);
    }
    let nominal_critical = n.critical_path_excluding(&nominal, &spec.instances);
    let period = cfg
        .period
        .unwrap_or(0.5 * (nominal_critical + cfg.target_delay));
    if !(period > 0.0 && period < cfg.target_delay) {
        return Err(Error::InvalidParameter(format!(
            "attack period {period} must lie in (0, D = {})",
            cfg.target_delay
        )));
    }

    let windows = layout.flat_windows();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let score = |genome: &Vec<f64>| {
        let d = layout.delays(n, genome);
        Score {
            report: evaluate_fitness(n, &d, spec, period, vectors),
            critical: n.critical_path_excluding(&d, &spec.instances),
        }
    };

    // first individual: every gate at the centre of its window
    let mut pop: Vec<Vec<f64>> = Vec::with_capacity(cfg.population);
    let mut centre: Vec<f64> = windows.iter().map(|&(lo, hi)| 0.5 * (lo + hi)).collect();
    layout.repair(&mut centre, cfg.target_delay)?;
    pop.push(centre);
    while pop.len() < cfg.population {
        let mut g: Vec<f64> = windows
            .iter()
            .map(|&(lo, hi)| if hi > lo { rng.random_range(lo..hi) } else { lo })
            .collect();
        layout.repair(&mut g, cfg.target_delay)?;
        pop.push(g);
    }
    let mut scores = exec.map_slice(&pop, score);
    let best_of = |scores: &[Score]| {
        (0..scores.len())
            .reduce(|a, b| if scores[b].better_than(&scores[a]) { b } else { a })
            .expect("nonempty population")
    };
    let mut bi = best_of(&scores);
    let mut best = (pop[bi].clone(), scores[bi]);
    let mut history = vec![best.1.report.cost];

    for _ in 0..cfg.generations {
        let tournament = |rng: &mut ChaCha8Rng, scores: &[Score]| {
            (0..3)
                .map(|_| rng.random_range(0..scores.len()))
                .reduce(|a, b| if scores[b].better_than(&scores[a]) { b } else { a })
                .expect("tournament of three")
        };
        let mut next = vec![best.0.clone()];
        while next.len() < cfg.population {
            let a = tournament(&mut rng, &scores);
            let b = tournament(&mut rng, &scores);
            let mut child = pop[a].clone();
            if rng.random_bool(cfg.crossover_rate) {
                for (x, &y) in child.iter_mut().zip(&pop[b]) {
                    let w: f64 = rng.random();
                    *x = w * *x + (1.0 - w) * y;
                }
            }
            for (x, &(lo, hi)) in child.iter_mut().zip(&windows) {
                if rng.random_bool(cfg.mutation_rate) {
                    let sd = (0.25 * (hi - lo)).max(1e-6);
                    *x += Normal::new(0.0, sd).expect("positive sd").sample(&mut rng);
                }
            }
            layout.repair(&mut child, cfg.target_delay)?;
            next.push(child);
        }
        pop = next;
        scores = exec.map_slice(&pop, score);
        bi = best_of(&scores);
        if scores[bi].better_than(&best.1) {
            best = (pop[bi].clone(), scores[bi]);
        }
        history.push(best.1.report.cost);
    }

    let assignment = DelayAssignment {
        assigned: layout.split(&best.0).into_iter().map(|s| s.to_vec()).collect(),
        paths: layout.paths,
        nominal: layout.nominal,
        slack: layout.slack,
        target: cfg.target_delay,
        c: cfg.c,
        t_ref,
    };
    assignment.check()?;
    Ok(GaOutcome {
        assignment,
        report: best.1.report,
        history,
        nominal_critical,
        assigned_critical: best.1.critical,
    })
}
