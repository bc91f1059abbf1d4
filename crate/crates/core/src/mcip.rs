//! Module configuration integer programs.
//!
//! Every basic object owns one brick holding configuration variables `x_C`, module variables
//! `y_M` and slack columns. Global rows: `Σ x = m`, per group `Σ C_g x − Σ_{M∈g} y = 0`, plus
//! extra `≤` rows over configurations. Local rows: `Σ M_d y = B_d` and extra `≤` rows over
//! modules. The objective is the total configuration size.

use crate::nfold::{self, NFoldError, NFoldProgram, NFoldSolution, SolveOptions, SolveStats};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};

/// A module-size group. Layered groups occupy `layers.1` consecutive layers from `layers.0`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Group {
    pub size: i64,
    pub layers: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModuleDef<T> {
    /// Value per basic-object dimension.
    pub values: Vec<i64>,
    pub size: i64,
    pub group: usize,
    /// Eligible basic objects are those with the same key.
    pub key: u32,
    /// Per-object cap on copies, in addition to the generic caps.
    pub cap: Option<i64>,
    /// Coefficients in the extra local rows.
    pub local: Vec<i64>,
    pub tag: T,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasicObject {
    pub values: Vec<i64>,
    pub key: u32,
}

/// `Σ_C coeff[C]·x_C ≤ rhs`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlobalRow {
    pub coeff: Vec<i64>,
    pub rhs: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct McipSpec<T> {
    pub objects: Vec<BasicObject>,
    pub modules: Vec<ModuleDef<T>>,
    pub groups: Vec<Group>,
    /// Multiplicity per group.
    pub configs: Vec<Vec<u32>>,
    pub machines: i64,
    pub bound: i64,
    pub global_rows: Vec<GlobalRow>,
    /// Right-hand sides of the extra local `≤` rows (same for every brick).
    pub local_rhs: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum McipError {
    #[error("configuration count exceeds the cap of {0}; try a larger epsilon")]
    ConfigCap(usize),
    #[error("module count exceeds the cap of {0}; try a larger epsilon")]
    ModuleCap(usize),
    #[error(transparent)]
    Solver(#[from] NFoldError),
}

pub const DEFAULT_CONFIG_CAP: usize = 1_000_000;

impl<T> McipSpec<T> {
    pub fn config_size(&self, c: &[u32]) -> i64 {
        c.iter().zip(&self.groups).map(|(&k, g)| k as i64 * g.size).sum()
    }

    pub fn eligible(&self, object: usize, module: usize) -> bool {
        self.objects[object].key == self.modules[module].key
    }

    /// Upper bound on copies of `module` in the brick of `object`.
    pub fn module_cap(&self, object: usize, module: usize) -> i64 {
        if !self.eligible(object, module) {
            return 0;
        }
        let m = &self.modules[module];
        let mut cap = if m.size > 0 { self.machines * ((self.bound + m.size - 1) / m.size) } else { i64::MAX };
        for (d, &v) in m.values.iter().enumerate() {
            if v > 0 {
                cap = cap.min(self.objects[object].values[d] / v);
            }
        }
        if let Some(c) = m.cap {
            cap = cap.min(c);
        }
        cap.max(0)
    }
}

/// Positions of the variable kinds inside a brick.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub configs: usize,
    pub modules: usize,
    pub local_slacks: usize,
    pub global_slacks: usize,
}

impl Layout {
    pub fn width(&self) -> usize {
        self.configs + self.modules + self.local_slacks + self.global_slacks
    }
    pub fn module_offset(&self) -> usize {
        self.configs
    }
    pub fn local_offset(&self) -> usize {
        self.configs + self.modules
    }
    pub fn global_offset(&self) -> usize {
        self.configs + self.modules + self.local_slacks
    }
}

/// Builds the n-fold program. With `pin`, configuration variables and global slacks are
/// confined to the first brick, which leaves the feasible set of aggregated solutions unchanged.
pub fn assemble<T>(spec: &McipSpec<T>, pin: bool) -> (NFoldProgram, Layout) {
    let nc = spec.configs.len();
    let nm = spec.modules.len();
    let nl = spec.local_rhs.len();
    let ng = spec.global_rows.len();
    let layout = Layout { configs: nc, modules: nm, local_slacks: nl, global_slacks: ng };
    let t = layout.width();
    let n = spec.objects.len().max(1);
    let groups = spec.groups.len();
    let d = spec.modules.first().map(|m| m.values.len()).or_else(|| spec.objects.first().map(|o| o.values.len())).unwrap_or(0);

    let mut a1 = vec![vec![0i64; t]; 1 + groups + ng];
    for (c, conf) in spec.configs.iter().enumerate() {
        a1[0][c] = 1;
        for (g, &k) in conf.iter().enumerate() {
            a1[1 + g][c] = k as i64;
        }
        for (r, row) in spec.global_rows.iter().enumerate() {
            a1[1 + groups + r][c] = row.coeff[c];
        }
    }
    for (k, m) in spec.modules.iter().enumerate() {
        a1[1 + m.group][layout.module_offset() + k] = -1;
    }
    for r in 0..ng {
        a1[1 + groups + r][layout.global_offset() + r] = 1;
    }
    let mut a2 = vec![vec![0i64; t]; d + nl];
    for (k, m) in spec.modules.iter().enumerate() {
        for (dd, &v) in m.values.iter().enumerate() {
            a2[dd][layout.module_offset() + k] = v;
        }
        for (r, &v) in m.local.iter().enumerate() {
            a2[d + r][layout.module_offset() + k] = v;
        }
    }
    for r in 0..nl {
        a2[d + r][layout.local_offset() + r] = 1;
    }

    let mut w = vec![0i64; n * t];
    let lower = vec![0i64; n * t];
    let mut upper = vec![0i64; n * t];
    let mut b = vec![0i64; 1 + groups + ng + n * (d + nl)];
    b[0] = spec.machines;
    for (r, row) in spec.global_rows.iter().enumerate() {
        b[1 + groups + r] = row.rhs;
    }
    for q in 0..n {
        let base = q * t;
        let real = q < spec.objects.len();
        for (c, conf) in spec.configs.iter().enumerate() {
            w[base + c] = spec.config_size(conf);
            if !pin || q == 0 {
                upper[base + c] = spec.machines;
            }
        }
        if real {
            for k in 0..nm {
                upper[base + layout.module_offset() + k] = spec.module_cap(q, k);
            }
            for (dd, v) in spec.objects[q].values.iter().enumerate() {
                b[1 + groups + ng + q * (d + nl) + dd] = *v;
            }
        }
        for (r, &rhs) in spec.local_rhs.iter().enumerate() {
            upper[base + layout.local_offset() + r] = rhs.max(0);
            b[1 + groups + ng + q * (d + nl) + d + r] = rhs;
        }
        for (r, row) in spec.global_rows.iter().enumerate() {
            if !pin || q == 0 {
                upper[base + layout.global_offset() + r] = row.rhs.max(0);
            }
        }
    }
    let program = NFoldProgram { n, t, a1, a2, w, lower, upper, b };
    (program, layout)
}

/// Aggregated solution: machines per configuration and module copies per basic object.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decoded {
    pub config_counts: Vec<i64>,
    /// Per basic object: `(module, copies)` with positive copies, by module index.
    pub modules: Vec<Vec<(usize, i64)>>,
    pub objective: i64,
}

pub fn decode<T>(spec: &McipSpec<T>, layout: &Layout, sol: &NFoldSolution) -> Decoded {
    let t = layout.width();
    let n = spec.objects.len().max(1);
    let mut config_counts = vec![0i64; layout.configs];
    let mut modules = vec![Vec::new(); spec.objects.len()];
    for q in 0..n {
        let brick = &sol.x[q * t..(q + 1) * t];
        for c in 0..layout.configs {
            config_counts[c] += brick[c];
        }
        if q < spec.objects.len() {
            for k in 0..layout.modules {
                let v = brick[layout.module_offset() + k];
                if v > 0 {
                    modules[q].push((k, v));
                }
            }
        }
    }
    Decoded { config_counts, modules, objective: sol.objective }
}

/// Solves the MCIP; with `threshold`, any solution of objective at most the threshold is
/// accepted and larger optima are reported as `None`.
pub fn solve<T>(spec: &McipSpec<T>, threshold: Option<i64>, options: &SolveOptions) -> Result<(Option<Decoded>, SolveStats, NFoldProgram), McipError> {
    let (program, layout) = assemble(spec, true);
    let opts = SolveOptions { cutoff: threshold, ..*options };
    let (sol, stats) = nfold::solve(&program, &opts)?;
    let decoded = sol.map(|s| decode(spec, &layout, &s)).filter(|d| threshold.is_none_or(|th| d.objective <= th));
    if let Some(d) = &decoded {
        check_decoded(spec, d);
    }
    Ok((decoded, stats, program))
}

/// Asserts the aggregated MCIP constraints on a decoded solution.
pub fn check_decoded<T>(spec: &McipSpec<T>, d: &Decoded) {
    assert_eq!(d.config_counts.iter().sum::<i64>(), spec.machines, "machine count");
    let mut cover = vec![0i64; spec.groups.len()];
    for (c, &x) in d.config_counts.iter().enumerate() {
        for (g, &k) in spec.configs[c].iter().enumerate() {
            cover[g] += k as i64 * x;
        }
    }
    let mut used = vec![0i64; spec.groups.len()];
    for (obj, list) in d.modules.iter().enumerate() {
        let mut got = vec![0i64; spec.objects[obj].values.len()];
        for &(k, y) in list {
            assert!(spec.eligible(obj, k), "ineligible module selected");
            used[spec.modules[k].group] += y;
            for (dd, v) in spec.modules[k].values.iter().enumerate() {
                got[dd] += v * y;
            }
        }
        assert_eq!(got, spec.objects[obj].values, "demand of object {obj}");
    }
    assert_eq!(cover, used, "group coverage");
    let size: i64 = d.config_counts.iter().enumerate().map(|(c, &x)| x * spec.config_size(&spec.configs[c])).sum();
    assert_eq!(size, d.objective, "objective equals configuration size");
}

/// All multiplicity vectors over `sizes` with total size at most `bound`, in colexicographic
/// order (the last coordinate varies slowest).
pub fn enumerate_configurations(sizes: &[i64], bound: i64, cap: usize) -> Result<Vec<Vec<u32>>, McipError> {
    let mut out = Vec::new();
    let mut cur = vec![0u32; sizes.len()];
    fn rec(g: usize, room: i64, sizes: &[i64], cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>, cap: usize) -> Result<(), McipError> {
        if g == 0 {
            if out.len() >= cap {
                return Err(McipError::ConfigCap(cap));
            }
            out.push(cur.clone());
            return Ok(());
        }
        let i = g - 1;
        let max = if sizes[i] > 0 { room / sizes[i] } else { 0 };
        for k in 0..=max {
            cur[i] = k as u32;
            rec(i, room - k * sizes[i], sizes, cur, out, cap)?;
        }
        cur[i] = 0;
        Ok(())
    }
    if bound >= 0 {
        rec(sizes.len(), bound, sizes, &mut cur, &mut out, cap)?;
    }
    Ok(out)
}

/// Layered enumeration: sets of groups with pairwise disjoint layer ranges and total size at
/// most `bound`. Each group is `(first layer, layer count, size)`.
pub fn enumerate_layered(groups: &[Group], bound: i64, cap: usize) -> Result<Vec<Vec<u32>>, McipError> {
    let layers = groups.iter().filter_map(|g| g.layers.map(|(s, c)| s + c)).max().unwrap_or(0);
    let mut starting: Vec<Vec<usize>> = vec![Vec::new(); layers];
    for (i, g) in groups.iter().enumerate() {
        let (s, _) = g.layers.expect("layered group");
        starting[s].push(i);
    }
    let mut out = Vec::new();
    let mut cur = vec![0u32; groups.len()];
    #[allow(clippy::too_many_arguments)]
    fn rec(l: usize, room: i64, groups: &[Group], starting: &[Vec<usize>], cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>, cap: usize) -> Result<(), McipError> {
        if l >= starting.len() {
            if out.len() >= cap {
                return Err(McipError::ConfigCap(cap));
            }
            out.push(cur.clone());
            return Ok(());
        }
        rec(l + 1, room, groups, starting, cur, out, cap)?;
        for &g in &starting[l] {
            let grp = &groups[g];
            if grp.size <= room {
                cur[g] = 1;
                rec(l + grp.layers.unwrap().1.max(1), room - grp.size, groups, starting, cur, out, cap)?;
                cur[g] = 0;
            }
        }
        Ok(())
    }
    if bound >= 0 {
        rec(0, bound, groups, &starting, &mut cur, &mut out, cap)?;
    }
    Ok(out)
}

/// Modules of `key` after dropping those dominated inside their class. Modules with equal group,
/// size, local row and cap whose local row already limits them to one per machine are
/// interchangeable up to their values, so only componentwise minimal values are kept.
fn undominated_modules<T>(spec: &McipSpec<T>, key: u32) -> Vec<usize> {
    let mods: Vec<usize> = (0..spec.modules.len()).filter(|&k| spec.modules[k].key == key).collect();
    let single = |k: usize| {
        let m = &spec.modules[k];
        m.local.iter().zip(&spec.local_rhs).any(|(&v, &r)| v > 0 && 2 * v > r)
    };
    mods.iter()
        .copied()
        .filter(|&k| {
            if !single(k) {
                return true;
            }
            let m = &spec.modules[k];
            !mods.iter().any(|&o| {
                let other = &spec.modules[o];
                o != k
                    && other.group == m.group
                    && other.size == m.size
                    && other.local == m.local
                    && other.cap == m.cap
                    && other.values.iter().zip(&m.values).all(|(a, b)| a <= b)
                    && (other.values != m.values || o < k)
            })
        })
        .collect()
}

/// Configurations that can actually be filled: sums over basic objects of module multisets each
/// object could place on one machine (respecting its demands, its extra local rows and, for
/// layered groups, disjoint layers), bounded in total size. Any configuration used by a solution
/// of the MCIP is of this form, so restricting to them keeps the program exact.
pub fn realizable_configurations<T>(spec: &McipSpec<T>, cap: usize) -> Result<Vec<Vec<u32>>, McipError> {
    let ng = spec.groups.len();
    let masks: Vec<u128> = spec
        .groups
        .iter()
        .map(|g| match g.layers {
            Some((s, c)) => {
                assert!(s + c <= 128, "at most 128 layers supported");
                (((1u128 << c) - 1) << s) as u128
            }
            None => 0,
        })
        .collect();
    // Per distinct object, the reachable (group counts, layer mask) pairs.
    let mut per_object: BTreeMap<(u32, Vec<i64>), BTreeSet<(Vec<u32>, u128)>> = BTreeMap::new();
    for obj in &spec.objects {
        let key = (obj.key, obj.values.clone());
        if per_object.contains_key(&key) {
            continue;
        }
        let mods = undominated_modules(spec, obj.key);
        let mut found = BTreeSet::new();
        let mut cur = vec![0u32; ng];
        let mut rem = obj.values.clone();
        let mut local = spec.local_rhs.clone();
        // Records the current choice, then extends it with modules from index `i` on; the
        // recursion depth is the number of chosen modules.
        #[allow(clippy::too_many_arguments)]
        fn rec<T>(
            i: usize,
            spec: &McipSpec<T>,
            mods: &[usize],
            masks: &[u128],
            room: i64,
            mask: u128,
            cur: &mut Vec<u32>,
            rem: &mut Vec<i64>,
            local: &mut Vec<i64>,
            found: &mut BTreeSet<(Vec<u32>, u128)>,
            cap: usize,
        ) -> Result<(), McipError> {
            if found.insert((cur.clone(), mask)) && found.len() > cap {
                return Err(McipError::ConfigCap(cap));
            }
            for k in i..mods.len() {
                let m = &spec.modules[mods[k]];
                let gm = masks[m.group];
                let mut copies = 0;
                let (mut room, mut mask) = (room, mask);
                loop {
                    let fits = m.size <= room
                        && (gm == 0 || mask & gm == 0)
                        && m.values.iter().zip(rem.iter()).all(|(v, r)| v <= r)
                        && m.local.iter().zip(local.iter()).all(|(v, r)| v <= r)
                        && m.cap.is_none_or(|c| copies < c)
                        && (m.size > 0 || m.values.iter().any(|&v| v > 0));
                    if !fits {
                        break;
                    }
                    copies += 1;
                    room -= m.size;
                    mask |= gm;
                    cur[m.group] += 1;
                    for (r, v) in rem.iter_mut().zip(&m.values) {
                        *r -= v;
                    }
                    for (r, v) in local.iter_mut().zip(&m.local) {
                        *r -= v;
                    }
                    rec(k + 1, spec, mods, masks, room, mask, cur, rem, local, found, cap)?;
                }
                cur[m.group] -= copies as u32;
                for _ in 0..copies {
                    for (r, v) in rem.iter_mut().zip(&m.values) {
                        *r += v;
                    }
                    for (r, v) in local.iter_mut().zip(&m.local) {
                        *r += v;
                    }
                }
            }
            Ok(())
        }
        rec(0, spec, &mods, &masks, spec.bound, 0, &mut cur, &mut rem, &mut local, &mut found, cap)?;
        per_object.insert(key, found);
    }
    let mut all: BTreeSet<(Vec<u32>, u128)> = BTreeSet::new();
    all.insert((vec![0u32; ng], 0));
    for obj in &spec.objects {
        let options = &per_object[&(obj.key, obj.values.clone())];
        let mut next = all.clone();
        for (a, am) in &all {
            let asize = spec.config_size(a);
            for (v, vm) in options {
                if am & vm != 0 {
                    continue;
                }
                let size = asize + spec.config_size(v);
                if size > spec.bound {
                    continue;
                }
                let sum: Vec<u32> = a.iter().zip(v).map(|(x, y)| x + y).collect();
                next.insert((sum, am | vm));
                if next.len() > cap {
                    return Err(McipError::ConfigCap(cap));
                }
            }
        }
        all = next;
    }
    let mut configs: Vec<Vec<u32>> = all.into_iter().map(|(c, _)| c).collect::<BTreeSet<_>>().into_iter().collect();
    configs.sort_by(|a, b| a.iter().rev().cmp(b.iter().rev()));
    Ok(configs)
}
