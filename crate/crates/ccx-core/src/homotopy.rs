//! Contraction of the space onto a neighborhood of the exponential image,
//! and the discrete bicombing given by the stored segments.

use serde::{Deserialize, Serialize};

use crate::constants::ConstantTable;
use crate::convexity::theta_from_samples;
use crate::error::{CcxError, Result};
use crate::exec::{map_range, Exec};
use crate::metric::{FiniteMetricSpace, PointId};
use crate::path::DiscretePath;
use crate::products::subsample;
use crate::sample::rng;
use crate::system::GeodesicSystem;
use crate::TOL;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ContractionSchedule {
    /// Maximal 1-discrete subset, picked greedily: points of Y first, then the rest.
    pub net: Vec<PointId>,
    /// Position in `net` of `ι(p)` for every point `p`.
    pub iota: Vec<u32>,
    pub in_y: Vec<bool>,
    pub dist_to_image: Vec<f64>,
    /// Per net point: stored segment from the base, its length `T_v`, and `s_v`.
    pub segment: Vec<u32>,
    pub t: Vec<f64>,
    pub s: Vec<f64>,
    pub s_saturated: Vec<bool>,
    /// `l(n)` for `n = 0, 1, ...`; `None` marks an empty level.
    pub levels: Vec<Option<f64>>,
    pub ni: Vec<usize>,
    /// `l(n_i)`; `χ(t)` counts the entries `≤ t`.
    pub chi_breaks: Vec<f64>,
    pub step: f64,
    pub d5: f64,
    pub d6: f64,
}

/// Schedule from the exp image (points on the class representatives).
pub fn build_schedule(
    space: &FiniteMetricSpace,
    sys: &GeodesicSystem,
    image: &[PointId],
    table: &ConstantTable,
    exec: Exec,
) -> Result<ContractionSchedule> {
    if image.is_empty() {
        return Err(CcxError::Precondition("empty exponential image".into()));
    }
    let n = space.len();
    let dist_to_image = map_range(exec, n, |p| {
        image.iter().map(|&q| space.d(p as PointId, q)).fold(f64::INFINITY, f64::min)
    });
    let in_y: Vec<bool> = dist_to_image.iter().map(|&d| d <= table.d6 + TOL).collect();

    let order = (0..n as PointId).filter(|&p| in_y[p as usize]).chain((0..n as PointId).filter(|&p| !in_y[p as usize]));
    let mut net: Vec<PointId> = Vec::new();
    for p in order {
        if net.iter().all(|&q| space.d(p, q) >= 1.0 - TOL) {
            net.push(p);
        }
    }
    let mut pos = vec![u32::MAX; n];
    for (i, &p) in net.iter().enumerate() {
        pos[p as usize] = i as u32;
    }
    let iota = map_range(exec, n, |p| {
        if pos[p] != u32::MAX {
            return pos[p];
        }
        let mut best = (f64::INFINITY, u32::MAX);
        for (i, &q) in net.iter().enumerate() {
            if in_y[p] && !in_y[q as usize] {
                continue;
            }
            let d = space.d(p as PointId, q);
            if d < best.0 - TOL {
                best = (d, i as u32);
            }
        }
        best.1
    });

    let missing: Vec<PointId> = net.iter().copied().filter(|&v| sys.first_between(space.base, v).is_none()).collect();
    if !missing.is_empty() {
        return Err(CcxError::Coverage(format!("no stored segment from the base point to {missing:?}")));
    }
    let mut segment = Vec::with_capacity(net.len());
    let (mut ts, mut ss, mut sat) = (Vec::new(), Vec::new(), Vec::new());
    for &v in &net {
        let id = sys.between(space.base, v)[0];
        let g = &sys.segments[id as usize];
        let last = (0..g.len()).filter(|&i| dist_to_image[g.values[i] as usize] <= table.d5 + TOL).max().unwrap_or(0);
        segment.push(id);
        ts.push(g.domain_end());
        ss.push(g.param(last));
        sat.push(last + 1 == g.len());
    }

    let top = ss.iter().map(|&s| (s + TOL).floor() as usize).max().unwrap_or(0);
    let mut levels: Vec<Option<f64>> = vec![None; top + 1];
    for (&s, &t) in ss.iter().zip(&ts) {
        let lv = &mut levels[(s + TOL).floor() as usize];
        *lv = Some(lv.map_or(t, |x: f64| x.max(t)));
    }
    let (ni, chi_breaks) = select_subsequence(&levels);
    Ok(ContractionSchedule {
        net,
        iota,
        in_y,
        dist_to_image,
        segment,
        t: ts,
        s: ss,
        s_saturated: sat,
        levels,
        ni,
        chi_breaks,
        step: sys.step(),
        d5: table.d5,
        d6: table.d6,
    })
}

/// Greedy-minimal `n_1 < n_2 < ...` with `l(n_1) > 1`, `l(n_{i+1}) - l(n_i) > 1`
/// and `l(n_i) > l(n)` for every non-empty level `1 ≤ n < n_i`.
pub fn select_subsequence(levels: &[Option<f64>]) -> (Vec<usize>, Vec<f64>) {
    let mut ni = Vec::new();
    let mut br: Vec<f64> = Vec::new();
    let mut prefix_max = f64::NEG_INFINITY;
    for (n, lv) in levels.iter().enumerate().skip(1) {
        let Some(l) = *lv else { continue };
        let gap_ok = match br.last() {
            None => l > 1.0 + TOL,
            Some(&prev) => l - prev > 1.0 + TOL,
        };
        if gap_ok && l > prefix_max + TOL {
            ni.push(n);
            br.push(l);
        }
        prefix_max = prefix_max.max(l);
    }
    (ni, br)
}

impl ContractionSchedule {
    pub fn chi(&self, t: f64) -> f64 {
        self.chi_breaks.partition_point(|&b| b <= t + TOL) as f64
    }

    fn path<'a>(&self, sys: &'a GeodesicSystem, k: usize) -> &'a DiscretePath {
        &sys.segments[self.segment[k] as usize]
    }

    /// `φ` at net position `k`: `γ_v(χ(T_v))`.
    pub fn phi_net(&self, sys: &GeodesicSystem, k: usize) -> PointId {
        self.path(sys, k).at(self.chi(self.t[k]))
    }

    /// `φ(ι(v))` and the track `H(v, t) = γ_{ι(v)}(T - t + χ(t))` on the grid of `[0, T]`.
    pub fn phi_and_track(&self, sys: &GeodesicSystem, v: PointId) -> (PointId, Vec<PointId>) {
        let k = self.iota[v as usize] as usize;
        let g = self.path(sys, k);
        let big_t = self.t[k];
        let steps = (big_t / self.step + TOL).round() as usize;
        let track = (0..=steps)
            .map(|j| {
                let t = j as f64 * self.step;
                g.at(big_t - t + self.chi(t))
            })
            .collect();
        (self.phi_net(sys, k), track)
    }

    /// `H(v, t)` for a single `t ≤ T_{ι(v)}`.
    pub fn track_at(&self, sys: &GeodesicSystem, v: PointId, t: f64) -> PointId {
        let k = self.iota[v as usize] as usize;
        self.path(sys, k).at(self.t[k] - t + self.chi(t))
    }

    pub fn t_of(&self, v: PointId) -> f64 {
        self.t[self.iota[v as usize] as usize]
    }

    /// Largest `T_v` on the grid, the range of the time variable.
    pub fn max_time(&self) -> f64 {
        self.t.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Tally {
    pub checked: u64,
    pub violations: u64,
    #[serde(with = "crate::real")]
    pub worst_slack: f64,
}

impl Tally {
    fn new() -> Self {
        Tally { worst_slack: f64::NEG_INFINITY, ..Default::default() }
    }

    fn record(&mut self, value: f64, bound: f64) {
        self.checked += 1;
        self.worst_slack = self.worst_slack.max(value - bound);
        if value > bound + TOL {
            self.violations += 1;
        }
    }

    fn record_bool(&mut self, ok: bool) {
        self.checked += 1;
        if !ok {
            self.violations += 1;
        }
    }

    fn merge(mut self, o: Tally) -> Tally {
        self.checked += o.checked;
        self.violations += o.violations;
        self.worst_slack = self.worst_slack.max(o.worst_slack);
        self
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScheduleReport {
    pub net_size: usize,
    pub empty_levels: usize,
    pub saturated_s: usize,
    pub iota_within_2: Tally,
    pub endpoints: Tally,
    pub chi_below_identity: Tally,
    pub chi_lipschitz: Tally,
    pub subsequence_conditions: Tally,
    pub level_implication: Tally,
    pub phi_in_y: Tally,
    pub phi_modulus: Tally,
    pub t_bornologous: Tally,
    pub track_modulus: Tally,
}

impl ScheduleReport {
    pub fn passed(&self) -> bool {
        [
            &self.iota_within_2,
            &self.endpoints,
            &self.chi_below_identity,
            &self.chi_lipschitz,
            &self.subsequence_conditions,
            &self.level_implication,
            &self.phi_in_y,
            &self.phi_modulus,
            &self.t_bornologous,
            &self.track_modulus,
        ]
        .iter()
        .all(|t| t.passed())
    }
}

/// Replays the identities, the χ properties, the level implication and the
/// coarse moduli of `φ`, `v ↦ T_{ι(v)}` and `H`.
pub fn audit_schedule(
    space: &FiniteMetricSpace,
    sys: &GeodesicSystem,
    sch: &ContractionSchedule,
    table: &ConstantTable,
    pair_samples: usize,
    seed: u64,
    exec: Exec,
) -> ScheduleReport {
    let n = space.len();
    let mut iota_within_2 = Tally::new();
    for p in 0..n {
        iota_within_2.record(space.d(p as PointId, sch.net[sch.iota[p] as usize]), 2.0);
    }

    let mut endpoints = Tally::new();
    for &v in &sch.net {
        let (phi, track) = sch.phi_and_track(sys, v);
        endpoints.record_bool(track[0] == v && *track.last().unwrap() == phi);
    }

    let steps = (sch.max_time() / sch.step + TOL).round() as usize;
    let grid: Vec<f64> = (0..=steps).map(|j| j as f64 * sch.step).collect();
    let mut chi_below = Tally::new();
    for &t in &grid {
        chi_below.record(sch.chi(t), t);
    }
    let chi_lip = map_range(exec, grid.len(), |i| {
        let mut c = Tally::new();
        for j in 0..grid.len() {
            c.record((sch.chi(grid[i]) - sch.chi(grid[j])).abs(), (grid[i] - grid[j]).abs() + 1.0);
        }
        c
    })
    .into_iter()
    .fold(Tally::new(), Tally::merge);

    let mut subseq = Tally::new();
    for (i, &ni) in sch.ni.iter().enumerate() {
        let l = sch.chi_breaks[i];
        subseq.record_bool(if i == 0 { l > 1.0 } else { l - sch.chi_breaks[i - 1] > 1.0 });
        for m in 1..ni {
            if let Some(lm) = sch.levels[m] {
                subseq.record_bool(l > lm);
            }
        }
    }

    let mut implication = Tally::new();
    for k in 0..sch.net.len() {
        for (i, &b) in sch.chi_breaks.iter().enumerate() {
            if b <= sch.t[k] + TOL {
                implication.record_bool(sch.ni[i] as f64 <= sch.s[k] + TOL);
            }
        }
    }

    let mut phi_in_y = Tally::new();
    let phis: Vec<PointId> = (0..sch.net.len()).map(|k| sch.phi_net(sys, k)).collect();
    for &p in &phis {
        phi_in_y.record(sch.dist_to_image[p as usize], table.d6);
    }

    let net_pairs: Vec<(usize, usize)> = (0..sch.net.len())
        .flat_map(|a| ((a + 1)..sch.net.len()).map(move |b| (a, b)))
        .collect();
    let net_pairs = subsample(net_pairs, pair_samples, seed);
    let mut phi_mod = Tally::new();
    for &(a, b) in &net_pairs {
        let d = space.d(sch.net[a], sch.net[b]);
        phi_mod.record(space.d(phis[a], phis[b]), table.end_map_modulus(d));
    }

    let point_pairs: Vec<(PointId, PointId)> = {
        use rand::Rng;
        let mut r = rng(seed ^ 0x70);
        (0..pair_samples).map(|_| (r.gen_range(0..n) as PointId, r.gen_range(0..n) as PointId)).collect()
    };
    let mut t_born = Tally::new();
    for &(v, w) in &point_pairs {
        let d = space.d(v, w);
        t_born.record((sch.t_of(v) - sch.t_of(w)).abs(), table.theta.eval(d + 4.0) + table.theta.eval(0.0));
    }

    let track_mod = map_range(exec, point_pairs.len(), |i| {
        let (v, w) = point_pairs[i];
        let dd = space.d(v, w) + 4.0;
        let (_, hv) = sch.phi_and_track(sys, v);
        let (_, hw) = sch.phi_and_track(sys, w);
        let mut c = Tally::new();
        for (a, &pv) in hv.iter().enumerate() {
            for (b, &pw) in hw.iter().enumerate() {
                let dt = (a as f64 - b as f64).abs() * sch.step;
                c.record(space.d(pv, pw), table.homotopy_modulus(dd, dt));
            }
        }
        c
    })
    .into_iter()
    .fold(Tally::new(), Tally::merge);

    ScheduleReport {
        net_size: sch.net.len(),
        empty_levels: sch.levels.iter().skip(1).filter(|l| l.is_none()).count(),
        saturated_s: sch.s_saturated.iter().filter(|&&s| s).count(),
        iota_within_2,
        endpoints,
        chi_below_identity: chi_below,
        chi_lipschitz: chi_lip,
        subsequence_conditions: subseq,
        level_implication: implication,
        phi_in_y,
        phi_modulus: phi_mod,
        t_bornologous: t_born,
        track_modulus: track_mod,
    }
}

/// Homotopy tracks as CSV rows `(v, t, point)`.
pub fn write_tracks_csv<W: std::io::Write>(sch: &ContractionSchedule, sys: &GeodesicSystem, points: &[PointId], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["v", "t", "point"]).map_err(crate::products::csv_err)?;
    for &v in points {
        let (_, track) = sch.phi_and_track(sys, v);
        for (j, p) in track.iter().enumerate() {
            wr.write_record([v.to_string(), (j as f64 * sch.step).to_string(), p.to_string()])
                .map_err(crate::products::csv_err)?;
        }
    }
    wr.flush()?;
    Ok(())
}

/// One integer-grid path per ordered pair of points.
#[derive(Clone, Debug)]
pub struct Bicombing {
    pub n: usize,
    pub paths: Vec<Vec<PointId>>,
    /// Closed-form constants `(E(λA+1), E(λB+k)+C)`.
    pub constants: (f64, f64),
}

impl Bicombing {
    pub fn path(&self, x: PointId, y: PointId) -> &[PointId] {
        &self.paths[x as usize * self.n + y as usize]
    }

    /// Value at integer time `t`, constant past the end.
    pub fn at(&self, x: PointId, y: PointId, t: usize) -> PointId {
        let p = self.path(x, y);
        p[t.min(p.len() - 1)]
    }
}

/// Integer resampling of the first stored segment of every ordered pair.
pub fn extract_bicombing(space: &FiniteMetricSpace, sys: &GeodesicSystem, table: &ConstantTable) -> Result<Bicombing> {
    let constants = table
        .bicombing_constants()
        .ok_or_else(|| CcxError::Precondition("bicombing needs an affine θ majorant".into()))?;
    let n = space.len();
    let mut paths = Vec::with_capacity(n * n);
    let mut missing = Vec::new();
    for x in 0..n as PointId {
        for y in 0..n as PointId {
            match sys.first_between(x, y) {
                Some(g) => {
                    let last = (g.domain_end() - TOL).ceil().max(0.0) as usize;
                    paths.push((0..=last).map(|t| g.at(t as f64)).collect());
                }
                None => {
                    if missing.len() < 16 {
                        missing.push((x, y));
                    }
                    paths.push(vec![x]);
                }
            }
        }
    }
    if !missing.is_empty() {
        return Err(CcxError::Coverage(format!("no stored segment for pairs {missing:?}...")));
    }
    Ok(Bicombing { n, paths, constants })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BicombingReport {
    pub quadruples: u64,
    pub closed_form: (f64, f64),
    /// Smallest multiplicative constant that works with the closed-form additive one.
    pub k1_empirical: f64,
    /// Smallest additive constant that works with the closed-form multiplicative one.
    pub k2_empirical: f64,
    /// Least-maximum affine majorant of displacement against endpoint gap.
    pub affine_fit: (f64, f64),
    /// Quadruples above `k1 max(d(x,x'), d(y,y')) + k2`.
    pub violations: u64,
    /// Quadruples above `k1 (d(x,x') + d(y,y')) + k2`.
    pub sum_form_violations: u64,
    pub endpoint_failures: u64,
    pub witnesses: Vec<[PointId; 4]>,
}

impl BicombingReport {
    pub fn passed(&self) -> bool {
        self.violations == 0 && self.endpoint_failures == 0
    }
}

/// Boundedness of the bicombing on sampled quadruples `(x, y, x', y')`.
pub fn audit_bicombing(space: &FiniteMetricSpace, b: &Bicombing, samples: usize, seed: u64, exec: Exec) -> BicombingReport {
    use rand::Rng;
    let n = b.n;
    let mut r = rng(seed);
    let quads: Vec<[PointId; 4]> = (0..samples)
        .map(|_| std::array::from_fn(|_| r.gen_range(0..n) as PointId))
        .collect();
    let (k1, k2) = b.constants;
    let rows = map_range(exec, quads.len(), |i| {
        let [x, y, x2, y2] = quads[i];
        let (p, q) = (b.path(x, y), b.path(x2, y2));
        let len = p.len().max(q.len());
        let disp = (0..len).map(|t| space.d(b.at(x, y, t), b.at(x2, y2, t))).fold(0.0, f64::max);
        let (g0, g1) = (space.d(x, x2), space.d(y, y2));
        let ends_ok = p[0] == x && *p.last().unwrap() == y;
        (disp, g0.max(g1), g0 + g1, ends_ok)
    });
    let mut rep = BicombingReport {
        quadruples: quads.len() as u64,
        closed_form: b.constants,
        k1_empirical: 0.0,
        k2_empirical: 0.0,
        affine_fit: (0.0, 0.0),
        violations: 0,
        sum_form_violations: 0,
        endpoint_failures: 0,
        witnesses: Vec::new(),
    };
    let mut samples_fit = Vec::with_capacity(rows.len());
    for (i, &(disp, m, s, ok)) in rows.iter().enumerate() {
        if !ok {
            rep.endpoint_failures += 1;
        }
        if m > TOL {
            rep.k1_empirical = rep.k1_empirical.max((disp - k2) / m);
        }
        rep.k2_empirical = rep.k2_empirical.max(disp - k1 * m);
        if disp > k1 * m + k2 + TOL {
            rep.violations += 1;
            if rep.witnesses.len() < 16 {
                rep.witnesses.push(quads[i]);
            }
        }
        if disp > k1 * s + k2 + TOL {
            rep.sum_form_violations += 1;
        }
        samples_fit.push((m, disp));
    }
    rep.affine_fit = theta_from_samples(&mut samples_fit).1;
    rep
}
