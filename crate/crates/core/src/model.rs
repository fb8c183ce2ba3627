//! Domain types shared by every part of the engine.
//!
//! Quantities are MWh per hourly step (MW and MWh coincide at one-hour
//! resolution), prices are €/MWh, money is €. Hours are 0-based internally;
//! reports and error messages use 1-based hours.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute slack (MWh) applied to state-of-charge bounds, the terminal band
/// and the non-negative supply floor. Every solver uses the same value so that
/// their feasible sets coincide.
pub const FEAS_TOL: f64 = 1e-6;

/// Default initial/terminal state-of-charge ratio.
pub const DEFAULT_ALPHA: f64 = 0.5;
/// Default half-width of the terminal state-of-charge band.
pub const DEFAULT_EPSILON: f64 = 0.05;
/// Default price cap of the demand curves.
pub const DEFAULT_PRICE_CAP: f64 = 4000.0;

/// One step of an hourly demand curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub price: f64,
    pub cum_volume: f64,
}

/// Aggregated demand bids for one hour: prices strictly descending, cumulative
/// volumes strictly ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandCurve {
    /// 1-based hour label.
    pub hour: usize,
    pub blocks: Vec<Block>,
}

impl DemandCurve {
    /// Builds a curve without checking invariants. Use [`DemandCurve::try_new`]
    /// or [`DemandCurve::violations`] when the data is untrusted.
    pub fn from_pairs(hour: usize, pairs: &[(f64, f64)]) -> Self {
        let blocks = pairs
            .iter()
            .map(|&(price, cum_volume)| Block { price, cum_volume })
            .collect();
        Self { hour, blocks }
    }

    pub fn try_new(hour: usize, pairs: &[(f64, f64)]) -> Result<Self> {
        let curve = Self::from_pairs(hour, pairs);
        curve.check()?;
        Ok(curve)
    }

    pub fn check(&self) -> Result<()> {
        match self.violations().into_iter().next() {
            None => Ok(()),
            Some(reason) => Err(Error::InvalidCurve {
                hour: self.hour,
                reason,
            }),
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.blocks.is_empty() {
            out.push("curve has no blocks".to_string());
            return out;
        }
        for (j, b) in self.blocks.iter().enumerate() {
            if !b.price.is_finite() || !b.cum_volume.is_finite() {
                out.push(format!("block {} is not finite", j + 1));
            }
        }
        if self.blocks.last().map_or(false, |b| b.price < 0.0) {
            out.push("prices must be non-negative".to_string());
        }
        if self.blocks.windows(2).any(|w| w[0].price <= w[1].price) {
            out.push("prices must be strictly descending".to_string());
        }
        if self.blocks[0].cum_volume <= 0.0 {
            out.push("first cumulative volume must be positive".to_string());
        }
        if self.blocks.windows(2).any(|w| w[0].cum_volume >= w[1].cum_volume) {
            out.push("cumulative volumes must be strictly ascending".to_string());
        }
        out
    }

    /// Number of blocks `D`.
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn price(&self, j: usize) -> f64 {
        self.blocks[j].price
    }

    pub fn volume(&self, j: usize) -> f64 {
        self.blocks[j].cum_volume
    }

    /// Volume served by all blocks above `j` (`q^min`).
    pub fn volume_before(&self, j: usize) -> f64 {
        if j == 0 {
            0.0
        } else {
            self.blocks[j - 1].cum_volume
        }
    }

    /// Width of block `j` (`q^max`).
    pub fn width(&self, j: usize) -> f64 {
        self.volume(j) - self.volume_before(j)
    }

    /// Largest cumulative volume `vol_D`.
    pub fn max_volume(&self) -> f64 {
        self.blocks.last().map_or(0.0, |b| b.cum_volume)
    }

    pub fn prices(&self) -> impl Iterator<Item = f64> + '_ {
        self.blocks.iter().map(|b| b.price)
    }
}

/// Hourly renewable output (MWh).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResProfile {
    pub values: Vec<f64>,
}

impl ResProfile {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Physical and economic parameters of one storage player.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StorageParams {
    pub player_id: usize,
    /// Power rating (MW).
    pub q_max: f64,
    /// Energy capacity (MWh).
    pub e_max: f64,
    /// Charging efficiency in (0, 1].
    pub eta: f64,
    /// Operating cost (€/MWh) paid on both charge and discharge.
    pub oc: f64,
    /// Initial state of charge as a fraction of `e_max`.
    pub alpha_batt: f64,
    /// Relative half-width of the terminal state-of-charge band.
    pub epsilon: f64,
    /// Number of discrete power levels per direction.
    pub n_levels: u32,
}

impl StorageParams {
    /// Lossless, costless unit with the default SoC settings.
    pub fn new(player_id: usize, q_max: f64, e_max: f64, n_levels: u32) -> Self {
        Self {
            player_id,
            q_max,
            e_max,
            eta: 1.0,
            oc: 0.0,
            alpha_batt: DEFAULT_ALPHA,
            epsilon: DEFAULT_EPSILON,
            n_levels,
        }
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    pub fn with_oc(mut self, oc: f64) -> Self {
        self.oc = oc;
        self
    }

    pub fn with_soc_band(mut self, alpha_batt: f64, epsilon: f64) -> Self {
        self.alpha_batt = alpha_batt;
        self.epsilon = epsilon;
        self
    }

    /// Size of one power step, `Q^max / N`.
    pub fn step(&self) -> f64 {
        self.q_max / self.n_levels as f64
    }

    /// Offer quantity of level `i` (1-based).
    pub fn level_quantity(&self, i: u32) -> f64 {
        self.step() * i as f64
    }

    /// The offer grid `{Q^max/N * i : i = 1..N}`.
    pub fn offer_grid(&self) -> Vec<f64> {
        (1..=self.n_levels).map(|i| self.level_quantity(i)).collect()
    }

    pub fn initial_soc(&self) -> f64 {
        self.alpha_batt * self.e_max
    }

    pub fn terminal_band(&self) -> (f64, f64) {
        let base = self.initial_soc();
        (base * (1.0 - self.epsilon), base * (1.0 + self.epsilon))
    }

    pub fn soc_within_bounds(&self, soc: f64) -> bool {
        soc >= -FEAS_TOL && soc <= self.e_max + FEAS_TOL
    }

    pub fn soc_within_terminal_band(&self, soc: f64) -> bool {
        let (lo, hi) = self.terminal_band();
        soc >= lo - FEAS_TOL && soc <= hi + FEAS_TOL
    }

    /// Every action available in one hour, in tie-break order
    /// (idle, charge levels ascending, discharge levels ascending).
    pub fn actions(&self) -> Vec<Action> {
        let n = self.n_levels;
        std::iter::once(Action::Idle)
            .chain((1..=n).map(Action::Charge))
            .chain((1..=n).map(Action::Discharge))
            .collect()
    }

    /// Charge and discharge quantity of an action.
    pub fn quantities(&self, action: Action) -> (f64, f64) {
        match action {
            Action::Idle => (0.0, 0.0),
            Action::Charge(i) => (self.level_quantity(i), 0.0),
            Action::Discharge(i) => (0.0, self.level_quantity(i)),
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let finite = [
            self.q_max,
            self.e_max,
            self.eta,
            self.oc,
            self.alpha_batt,
            self.epsilon,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            out.push("parameters must be finite".to_string());
            return out;
        }
        if self.q_max <= 0.0 {
            out.push("q_max must be positive".to_string());
        }
        if self.e_max < 0.0 {
            out.push("e_max must be non-negative".to_string());
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            out.push("eta out of (0,1]".to_string());
        }
        if self.oc < 0.0 {
            out.push("oc must be non-negative".to_string());
        }
        if !(0.0..=1.0).contains(&self.alpha_batt) {
            out.push("alpha_batt out of [0,1]".to_string());
        }
        if self.epsilon < 0.0 {
            out.push("epsilon must be non-negative".to_string());
        }
        if self.n_levels == 0 {
            out.push("n_levels must be positive".to_string());
        }
        out
    }
}

/// One hourly decision of a storage player. The derived ordering is the
/// deterministic tie-break order: idle < charge levels < discharge levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    Idle,
    Charge(u32),
    Discharge(u32),
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Idle => write!(f, "idle"),
            Action::Charge(i) => write!(f, "ch{i}"),
            Action::Discharge(i) => write!(f, "dis{i}"),
        }
    }
}

/// One player's hourly self-schedule. Equality compares the action sequence
/// only; the quantity and SoC vectors are derived from it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Schedule {
    pub actions: Vec<Action>,
    pub charge: Vec<f64>,
    pub discharge: Vec<f64>,
    pub soc: Vec<f64>,
}

impl PartialEq for Schedule {
    fn eq(&self, other: &Self) -> bool {
        self.actions == other.actions
    }
}

impl Eq for Schedule {}

impl std::hash::Hash for Schedule {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.actions.hash(state);
    }
}

impl Schedule {
    pub fn from_actions(params: &StorageParams, actions: Vec<Action>) -> Self {
        let mut charge = Vec::with_capacity(actions.len());
        let mut discharge = Vec::with_capacity(actions.len());
        let mut soc = Vec::with_capacity(actions.len());
        let mut level = params.initial_soc();
        for &a in &actions {
            let (ch, dis) = params.quantities(a);
            level += params.eta * ch - dis;
            charge.push(ch);
            discharge.push(dis);
            soc.push(level);
        }
        Self {
            actions,
            charge,
            discharge,
            soc,
        }
    }

    pub fn idle(params: &StorageParams, horizon: usize) -> Self {
        Self::from_actions(params, vec![Action::Idle; horizon])
    }

    pub fn horizon(&self) -> usize {
        self.actions.len()
    }

    pub fn is_idle(&self) -> bool {
        self.actions.iter().all(|a| *a == Action::Idle)
    }

    /// Violated schedule invariants, with 1-based hours.
    pub fn violations(&self, params: &StorageParams) -> Vec<String> {
        let mut out = Vec::new();
        let t_len = self.actions.len();
        if self.charge.len() != t_len || self.discharge.len() != t_len || self.soc.len() != t_len
        {
            out.push("schedule vectors have different lengths".to_string());
            return out;
        }
        let step = params.step();
        let mut level = params.initial_soc();
        for t in 0..t_len {
            let (ch, dis) = (self.charge[t], self.discharge[t]);
            if ch > 0.0 && dis > 0.0 {
                out.push(format!("hour {}: simultaneous charge and discharge", t + 1));
            }
            if let Action::Charge(i) | Action::Discharge(i) = self.actions[t] {
                if i == 0 || i > params.n_levels {
                    out.push(format!("hour {}: level {i} outside the offer grid", t + 1));
                }
            }
            for q in [ch, dis] {
                if q < 0.0 {
                    out.push(format!("hour {}: negative quantity", t + 1));
                } else if q > 0.0 && step > 0.0 {
                    let k = (q / step).round();
                    if (q - k * step).abs() > 1e-9 || k < 1.0 || k > params.n_levels as f64 {
                        out.push(format!("hour {}: {q} is not on the offer grid", t + 1));
                    }
                }
            }
            let (ech, edis) = params.quantities(self.actions[t]);
            if (ech - ch).abs() > 1e-9 || (edis - dis).abs() > 1e-9 {
                out.push(format!("hour {}: quantities disagree with action", t + 1));
            }
            level += params.eta * ch - dis;
            if (level - self.soc[t]).abs() > 1e-9 {
                out.push(format!("hour {}: soc does not follow the dynamics", t + 1));
            }
            if !params.soc_within_bounds(self.soc[t]) {
                out.push(format!("hour {}: soc {} outside [0, e_max]", t + 1, self.soc[t]));
            }
        }
        if let Some(&last) = self.soc.last() {
            if !params.soc_within_terminal_band(last) {
                out.push(format!("terminal soc {last} outside the band"));
            }
        }
        out
    }
}

/// The joint strategy profile: one schedule per player, in scenario order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GameState {
    pub schedules: Vec<Schedule>,
}

impl GameState {
    pub fn new(schedules: Vec<Schedule>) -> Self {
        Self { schedules }
    }

    pub fn idle(players: &[StorageParams], horizon: usize) -> Self {
        Self {
            schedules: players.iter().map(|p| Schedule::idle(p, horizon)).collect(),
        }
    }

    pub fn horizon(&self) -> Option<usize> {
        self.schedules.first().map(Schedule::horizon)
    }

    pub fn check_horizon(&self, horizon: usize) -> Result<()> {
        for s in &self.schedules {
            if s.horizon() != horizon {
                return Err(Error::HorizonMismatch {
                    expected: horizon,
                    found: s.horizon(),
                });
            }
        }
        Ok(())
    }

    /// Aggregate charge and discharge of every player except `player`
    /// (`q^{ch,o}`, `q^{dis,o}`).
    pub fn exogenous(&self, player: usize, horizon: usize) -> (Vec<f64>, Vec<f64>) {
        let mut ch = vec![0.0; horizon];
        let mut dis = vec![0.0; horizon];
        for (o, s) in self.schedules.iter().enumerate() {
            if o == player {
                continue;
            }
            for t in 0..horizon {
                ch[t] += s.charge[t];
                dis[t] += s.discharge[t];
            }
        }
        (ch, dis)
    }
}

/// Per-hour market result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketOutcome {
    /// 1-based hour.
    pub hour: usize,
    pub price: f64,
    /// 0-based index of the active (marginal) block.
    pub active_block: usize,
    pub served: f64,
    pub partial_fill: f64,
    pub curtailment: f64,
    pub unmet: f64,
    pub consumer_surplus: f64,
    pub producer_surplus: f64,
}

impl MarketOutcome {
    pub fn social_welfare(&self) -> f64 {
        self.consumer_surplus + self.producer_surplus
    }
}

/// Knobs of the iterative equilibrium search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Profit tolerance (€) for keeping a schedule and certifying equilibria.
    pub tolerance: f64,
    /// Maximum number of full best-response sweeps.
    pub max_sweeps: usize,
    /// Player update order as player ids; ascending id when absent.
    pub player_order: Option<Vec<usize>>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            max_sweeps: 100,
            player_order: None,
        }
    }
}

/// A complete game instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub horizon: usize,
    pub curves: Vec<DemandCurve>,
    pub res: ResProfile,
    pub players: Vec<StorageParams>,
    pub price_cap: f64,
    pub options: SolverOptions,
}

impl Scenario {
    pub fn new(curves: Vec<DemandCurve>, res: ResProfile, players: Vec<StorageParams>) -> Self {
        Self {
            horizon: curves.len(),
            curves,
            res,
            players,
            price_cap: DEFAULT_PRICE_CAP,
            options: SolverOptions::default(),
        }
    }

    pub fn with_players(&self, players: Vec<StorageParams>) -> Self {
        Self {
            players,
            ..self.clone()
        }
    }

    /// Fails with the first violation, if any.
    pub fn check(&self) -> Result<()> {
        match validate_scenario(self).into_iter().next() {
            None => Ok(()),
            Some(v) => Err(Error::InvalidInput(v.to_string())),
        }
    }
}

/// One broken invariant with its location.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub location: String,
    pub rule: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.rule)
    }
}

/// Every violated invariant of the scenario; empty when it is well formed.
pub fn validate_scenario(s: &Scenario) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |location: String, rule: String| out.push(Violation { location, rule });

    if s.horizon == 0 {
        push("scenario".into(), "horizon must be positive".into());
    }
    if s.curves.len() != s.horizon {
        push(
            "scenario".into(),
            format!("{} curves for horizon {}", s.curves.len(), s.horizon),
        );
    }
    if !(s.price_cap > 0.0) {
        push("scenario".into(), "price cap must be positive".into());
    }
    for (t, curve) in s.curves.iter().enumerate() {
        let loc = format!("hour {}", t + 1);
        if curve.hour != t + 1 {
            push(loc.clone(), format!("curve labelled hour {}", curve.hour));
        }
        for rule in curve.violations() {
            push(loc.clone(), rule);
        }
        if curve.prices().any(|p| p > s.price_cap) {
            push(loc.clone(), "price above the price cap".into());
        }
    }
    if s.res.len() != s.horizon {
        push(
            "res".into(),
            format!("{} values for horizon {}", s.res.len(), s.horizon),
        );
    }
    for (t, v) in s.res.values.iter().enumerate() {
        if !(v.is_finite() && *v >= 0.0) {
            push(format!("res hour {}", t + 1), "renewable output must be >= 0".into());
        }
    }
    let mut ids: Vec<usize> = s.players.iter().map(|p| p.player_id).collect();
    ids.sort_unstable();
    if ids.windows(2).any(|w| w[0] == w[1]) {
        push("players".into(), "player ids must be unique".into());
    }
    for p in &s.players {
        for rule in p.violations() {
            push(format!("player {}", p.player_id), rule);
        }
    }
    if !(s.options.tolerance >= 0.0) {
        push("options".into(), "tolerance must be >= 0".into());
    }
    out
}

/// Net market supply per hour: renewables plus every discharge minus every
/// charge. With `player` given the sum is split into own and rival terms; the
/// result is the same total.
pub fn net_supply(state: &GameState, res: &ResProfile, player: Option<usize>) -> Result<Vec<f64>> {
    let horizon = res.len();
    state.check_horizon(horizon)?;
    match player {
        None => Ok((0..horizon)
            .map(|t| {
                state.schedules.iter().fold(res.values[t], |acc, s| {
                    acc + s.discharge[t] - s.charge[t]
                })
            })
            .collect()),
        Some(p) => {
            let own = state.schedules.get(p).ok_or_else(|| {
                Error::InvalidInput(format!("no player at position {p}"))
            })?;
            let (och, odis) = state.exogenous(p, horizon);
            Ok((0..horizon)
                .map(|t| res.values[t] - own.charge[t] + own.discharge[t] - och[t] + odis[t])
                .collect())
        }
    }
}
