//! Perfect interventions, parametric intervention families, and the
//! catalog `I_X` with its natural partial order.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// A perfect intervention `do(X_J = x_J)`. The empty map is the null
/// intervention.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Intervention {
    targets: BTreeMap<String, f64>,
}

impl Intervention {
    pub fn null() -> Intervention {
        Intervention::default()
    }

    pub fn new<K: Into<String>>(targets: impl IntoIterator<Item = (K, f64)>) -> Intervention {
        Intervention {
            targets: targets.into_iter().map(|(k, v)| (k.into(), v)).collect(),
        }
    }

    pub fn is_null(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn targets(&self) -> &BTreeMap<String, f64> {
        &self.targets
    }

    pub fn target_set(&self) -> BTreeSet<String> {
        self.targets.keys().cloned().collect()
    }

    pub fn get(&self, var: &str) -> Option<f64> {
        self.targets.get(var).copied()
    }

    /// `self ≤ other`: every target of `self` is a target of `other` with the
    /// same value. Values are compared exactly.
    pub fn leq(&self, other: &Intervention) -> bool {
        self.targets.iter().all(|(k, v)| other.targets.get(k) == Some(v))
    }

    /// Restriction to the targets in `keep`.
    pub fn restrict(&self, keep: impl Fn(&str) -> bool) -> Intervention {
        Intervention {
            targets: self
                .targets
                .iter()
                .filter(|(k, _)| keep(k))
                .map(|(k, v)| (k.clone(), *v))
                .collect(),
        }
    }

    pub fn rename(&self, map: &BTreeMap<String, String>) -> Intervention {
        Intervention {
            targets: self
                .targets
                .iter()
                .map(|(k, v)| (map.get(k).cloned().unwrap_or_else(|| k.clone()), *v))
                .collect(),
        }
    }
}

/// Free function form of [`Intervention::leq`].
pub fn leq(i: &Intervention, j: &Intervention) -> bool {
    i.leq(j)
}

/// Accepts `∅`, empty text, `do(A=1, B=2)` or `A=1, B=2`.
impl std::str::FromStr for Intervention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Intervention> {
        let s = s.trim();
        let body = match s.strip_prefix("do(").and_then(|r| r.strip_suffix(')')) {
            Some(inner) => inner.trim(),
            None if s == "∅" => "",
            None => s,
        };
        let mut targets = BTreeMap::new();
        for part in body.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (name, value) = part
                .split_once('=')
                .ok_or_else(|| Error::Validation(format!("expected `name=value` in intervention, found `{part}`")))?;
            let name = name.trim();
            let v: f64 = value
                .trim()
                .parse()
                .map_err(|_| Error::Validation(format!("`{}` is not a number in intervention", value.trim())))?;
            if name.is_empty() || !v.is_finite() || targets.insert(name.to_string(), v).is_some() {
                return Err(Error::Validation(format!("invalid or repeated target `{part}` in intervention")));
            }
        }
        Ok(Intervention { targets })
    }
}

impl fmt::Display for Intervention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.targets.is_empty() {
            return write!(f, "∅");
        }
        write!(f, "do(")?;
        for (k, (name, v)) in self.targets.iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{name}={v}")?;
        }
        write!(f, ")")
    }
}

/// Value range of one coordinate of an intervention family.
#[derive(Debug, Clone, PartialEq)]
pub enum ValueDomain {
    Finite(Vec<f64>),
    /// Closed interval; `None` bounds are infinite.
    Interval { low: Option<f64>, high: Option<f64> },
}

impl ValueDomain {
    pub fn reals() -> ValueDomain {
        ValueDomain::Interval { low: None, high: None }
    }

    pub fn interval(low: f64, high: f64) -> ValueDomain {
        ValueDomain::Interval {
            low: Some(low),
            high: Some(high),
        }
    }

    pub fn single(v: f64) -> ValueDomain {
        ValueDomain::Finite(vec![v])
    }

    pub fn contains(&self, v: f64) -> bool {
        match self {
            ValueDomain::Finite(vals) => vals.contains(&v),
            ValueDomain::Interval { low, high } => {
                v.is_finite() && low.is_none_or(|l| v >= l) && high.is_none_or(|h| v <= h)
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, ValueDomain::Finite(_))
    }

    pub fn is_bounded(&self) -> bool {
        match self {
            ValueDomain::Finite(_) => true,
            ValueDomain::Interval { low, high } => low.is_some() && high.is_some(),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            ValueDomain::Finite(v) if v.is_empty() => Err(Error::Validation("empty finite value domain".into())),
            ValueDomain::Finite(v) if v.iter().any(|x| !x.is_finite()) => {
                Err(Error::Validation("non-finite intervention value".into()))
            }
            ValueDomain::Interval {
                low: Some(l),
                high: Some(h),
            } if l > h || !l.is_finite() || !h.is_finite() => {
                Err(Error::Validation(format!("empty or non-finite interval [{l}, {h}]")))
            }
            _ => Ok(()),
        }
    }

    /// `points` evenly spaced values including both ends; a single point is
    /// the midpoint. `None` for unbounded intervals.
    fn grid(&self, points: usize) -> Option<Vec<f64>> {
        match self {
            ValueDomain::Finite(v) => Some(v.clone()),
            ValueDomain::Interval {
                low: Some(l),
                high: Some(h),
            } => Some(match points {
                0 => vec![],
                1 => vec![0.5 * (l + h)],
                n => (0..n).map(|k| l + (h - l) * k as f64 / (n - 1) as f64).collect(),
            }),
            _ => None,
        }
    }

    fn random(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            ValueDomain::Finite(ref v) => v[rng.gen_range(0..v.len())],
            ValueDomain::Interval {
                low: Some(l),
                high: Some(h),
            } => l + (h - l) * rng.gen::<f64>(),
            ValueDomain::Interval { low: Some(l), high: None } => l + rng.sample::<f64, _>(StandardNormal).abs(),
            ValueDomain::Interval { low: None, high: Some(h) } => h - rng.sample::<f64, _>(StandardNormal).abs(),
            ValueDomain::Interval { low: None, high: None } => rng.sample(StandardNormal),
        }
    }

    fn representative(&self) -> f64 {
        match *self {
            ValueDomain::Finite(ref v) => v[0],
            ValueDomain::Interval {
                low: Some(l),
                high: Some(h),
            } => 0.5 * (l + h),
            ValueDomain::Interval { low: Some(l), .. } => l,
            ValueDomain::Interval { high: Some(h), .. } => h,
            ValueDomain::Interval { .. } => 0.0,
        }
    }
}

/// A parametric family `{ do(X_J = v) : v ∈ D_1 × … × D_|J| }`.
#[derive(Debug, Clone, PartialEq)]
pub struct InterventionFamily {
    pub label: String,
    pub targets: Vec<String>,
    pub domains: Vec<ValueDomain>,
}

impl InterventionFamily {
    pub fn null(label: impl Into<String>) -> InterventionFamily {
        InterventionFamily {
            label: label.into(),
            targets: vec![],
            domains: vec![],
        }
    }

    /// The singleton family `{ i }`.
    pub fn single(label: impl Into<String>, i: &Intervention) -> InterventionFamily {
        InterventionFamily {
            label: label.into(),
            targets: i.targets().keys().cloned().collect(),
            domains: i.targets().values().map(|v| ValueDomain::single(*v)).collect(),
        }
    }

    pub fn new(
        label: impl Into<String>,
        targets: Vec<String>,
        domains: Vec<ValueDomain>,
    ) -> Result<InterventionFamily> {
        let f = InterventionFamily {
            label: label.into(),
            targets,
            domains,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        if self.targets.len() != self.domains.len() {
            return Err(Error::Validation(format!(
                "family `{}` has {} targets but {} value domains",
                self.label,
                self.targets.len(),
                self.domains.len()
            )));
        }
        let distinct: BTreeSet<_> = self.targets.iter().collect();
        if distinct.len() != self.targets.len() {
            return Err(Error::Validation(format!("family `{}` repeats a target", self.label)));
        }
        self.domains.iter().try_for_each(ValueDomain::validate)
    }

    pub fn is_null(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.domains.iter().all(ValueDomain::is_finite)
    }

    /// Number of members for finite families.
    pub fn size(&self) -> Option<usize> {
        self.domains.iter().try_fold(1usize, |acc, d| match d {
            ValueDomain::Finite(v) => acc.checked_mul(v.len()),
            _ => None,
        })
    }

    pub fn target_set(&self) -> BTreeSet<String> {
        self.targets.iter().cloned().collect()
    }

    pub fn contains(&self, i: &Intervention) -> bool {
        i.targets().len() == self.targets.len()
            && self
                .targets
                .iter()
                .zip(&self.domains)
                .all(|(t, d)| i.get(t).is_some_and(|v| d.contains(v)))
    }

    /// The member with the given coordinate values (in `targets` order).
    pub fn member(&self, values: &[f64]) -> Intervention {
        Intervention::new(self.targets.iter().cloned().zip(values.iter().copied()))
    }

    /// Coordinate values of `i` in `targets` order.
    pub fn values_of(&self, i: &Intervention) -> Option<Vec<f64>> {
        self.targets.iter().map(|t| i.get(t)).collect()
    }

    /// All members of a finite family, if there are at most `limit`.
    pub fn enumerate(&self, limit: usize) -> Option<Vec<Intervention>> {
        let size = self.size()?;
        if size > limit {
            return None;
        }
        let values: Vec<&Vec<f64>> = self
            .domains
            .iter()
            .map(|d| match d {
                ValueDomain::Finite(v) => v,
                _ => unreachable!(),
            })
            .collect();
        let mut out = Vec::with_capacity(size);
        let mut idx = vec![0usize; values.len()];
        for _ in 0..size {
            let point: Vec<f64> = idx.iter().zip(&values).map(|(&k, v)| v[k]).collect();
            out.push(self.member(&point));
            for (pos, k) in idx.iter_mut().enumerate().rev() {
                *k += 1;
                if *k < values[pos].len() {
                    break;
                }
                *k = 0;
            }
        }
        Some(out)
    }

    /// Members that are `≥ i`, as a family (coordinates targeted by `i` are
    /// pinned to `i`'s values). `None` if no member is `≥ i`.
    pub fn above(&self, i: &Intervention) -> Option<InterventionFamily> {
        let mut domains = self.domains.clone();
        for (t, v) in i.targets() {
            let pos = self.targets.iter().position(|x| x == t)?;
            if !domains[pos].contains(*v) {
                return None;
            }
            domains[pos] = ValueDomain::single(*v);
        }
        Some(InterventionFamily {
            label: self.label.clone(),
            targets: self.targets.clone(),
            domains,
        })
    }
}

/// The catalog `I_X`: a set of labelled families. Must contain the null
/// intervention.
#[derive(Debug, Clone, PartialEq)]
pub struct InterventionCatalog {
    families: Vec<InterventionFamily>,
}

/// Up to this many members a finite family is enumerated exhaustively.
pub const EXHAUSTIVE_LIMIT: usize = 1000;

impl InterventionCatalog {
    pub fn new(families: Vec<InterventionFamily>) -> Result<InterventionCatalog> {
        let c = InterventionCatalog::unchecked(families)?;
        if c.find_member(&Intervention::null()).is_none() {
            return Err(Error::Validation("intervention catalog must contain the null intervention".into()));
        }
        Ok(c)
    }

    /// Checks family validity and label/family uniqueness but not the
    /// presence of ∅.
    pub(crate) fn unchecked(families: Vec<InterventionFamily>) -> Result<InterventionCatalog> {
        for (k, f) in families.iter().enumerate() {
            f.validate()?;
            for g in &families[..k] {
                if g.label == f.label {
                    return Err(Error::Validation(format!("duplicate family label `{}`", f.label)));
                }
                if g.targets == f.targets && g.domains == f.domains {
                    return Err(Error::Validation(format!(
                        "families `{}` and `{}` are identical",
                        g.label, f.label
                    )));
                }
            }
        }
        Ok(InterventionCatalog { families })
    }

    /// A catalog of explicitly listed interventions, labelled by their
    /// display form. ∅ is added if missing.
    pub fn explicit(interventions: impl IntoIterator<Item = Intervention>) -> Result<InterventionCatalog> {
        let mut fams = vec![InterventionFamily::null("∅")];
        for i in interventions {
            if !i.is_null() {
                fams.push(InterventionFamily::single(i.to_string(), &i));
            }
        }
        InterventionCatalog::new(fams)
    }

    pub fn families(&self) -> &[InterventionFamily] {
        &self.families
    }

    pub fn family(&self, label: &str) -> Option<&InterventionFamily> {
        self.families.iter().find(|f| f.label == label)
    }

    /// First family (in catalog order) containing `i`.
    pub fn find_member(&self, i: &Intervention) -> Option<&InterventionFamily> {
        self.families.iter().find(|f| f.contains(i))
    }

    pub fn contains(&self, i: &Intervention) -> bool {
        self.find_member(i).is_some()
    }

    /// Every variable targeted by some family.
    pub fn targeted(&self) -> BTreeSet<String> {
        self.families.iter().flat_map(|f| f.targets.iter().cloned()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.families.iter().all(InterventionFamily::is_finite)
    }

    /// The sub-poset `{ j ∈ I : i ≤ j }`.
    pub fn above(&self, i: &Intervention) -> InterventionCatalog {
        let mut out: Vec<InterventionFamily> = Vec::new();
        for f in &self.families {
            if let Some(g) = f.above(i) {
                if !out.iter().any(|h| h.targets == g.targets && h.domains == g.domains) {
                    out.push(g);
                }
            }
        }
        InterventionCatalog { families: out }
    }

    pub fn rename(&self, map: &BTreeMap<String, String>) -> InterventionCatalog {
        InterventionCatalog {
            families: self
                .families
                .iter()
                .map(|f| InterventionFamily {
                    label: f.label.clone(),
                    targets: f
                        .targets
                        .iter()
                        .map(|t| map.get(t).cloned().unwrap_or_else(|| t.clone()))
                        .collect(),
                    domains: f.domains.clone(),
                })
                .collect(),
        }
    }
}

/// A finite witness set drawn from a catalog.
#[derive(Debug, Clone)]
pub struct ProbeSet {
    /// Probes in canonical order; `probes[0]` is ∅.
    pub probes: Vec<Probe>,
    /// Index pairs `(a, b)`, `a != b`, with `probes[a] ≤ probes[b]`.
    pub pairs: Vec<(usize, usize)>,
    /// True when every family was finite and enumerated completely.
    pub exhaustive: bool,
}

#[derive(Debug, Clone)]
pub struct Probe {
    pub intervention: Intervention,
    /// Label of the family that produced the probe.
    pub family: String,
}

impl ProbeSet {
    pub fn interventions(&self) -> impl Iterator<Item = &Intervention> {
        self.probes.iter().map(|p| &p.intervention)
    }

    /// Builds a probe set from explicit interventions (deduplicated, order
    /// kept) and computes the comparable pairs.
    pub fn from_probes(probes: Vec<Probe>, exhaustive: bool) -> ProbeSet {
        let mut unique: Vec<Probe> = Vec::with_capacity(probes.len());
        for p in probes {
            if !unique.iter().any(|q| q.intervention == p.intervention) {
                unique.push(p);
            }
        }
        let mut pairs = Vec::new();
        for (a, pa) in unique.iter().enumerate() {
            for (b, pb) in unique.iter().enumerate() {
                if a != b && pa.intervention.leq(&pb.intervention) {
                    pairs.push((a, b));
                }
            }
        }
        ProbeSet {
            probes: unique,
            pairs,
            exhaustive,
        }
    }
}

/// Generates a deterministic finite probe set for `catalog`.
///
/// Finite families with at most [`EXHAUSTIVE_LIMIT`] members are enumerated.
/// Other families get a grid over their bounded axes (`grid_points` per
/// axis, skipped if any axis is unbounded) plus `random_points` random
/// members. Every probe that restricts to a member of another family also
/// contributes that restriction, so comparable pairs exist between
/// continuous families.
pub fn probe_catalog(
    catalog: &InterventionCatalog,
    grid_points: usize,
    random_points: usize,
    seed: u64,
) -> Result<ProbeSet> {
    if catalog.families().is_empty() {
        return Err(Error::Validation("cannot probe an empty catalog".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probes = vec![Probe {
        intervention: Intervention::null(),
        family: catalog
            .find_member(&Intervention::null())
            .map(|f| f.label.clone())
            .unwrap_or_default(),
    }];
    let mut exhaustive = true;
    for fam in catalog.families() {
        let start = probes.len();
        let push = |probes: &mut Vec<Probe>, i: Intervention| {
            probes.push(Probe {
                intervention: i,
                family: fam.label.clone(),
            })
        };
        if let Some(all) = fam.enumerate(EXHAUSTIVE_LIMIT) {
            all.into_iter().for_each(|i| push(&mut probes, i));
            continue;
        }
        exhaustive = false;
        let axes: Option<Vec<Vec<f64>>> = fam.domains.iter().map(|d| d.grid(grid_points)).collect();
        if let Some(axes) = axes {
            let total: usize = axes.iter().map(Vec::len).product();
            if total <= EXHAUSTIVE_LIMIT {
                let mut idx = vec![0usize; axes.len()];
                for _ in 0..total {
                    let point: Vec<f64> = idx.iter().zip(&axes).map(|(&k, a)| a[k]).collect();
                    push(&mut probes, fam.member(&point));
                    for (pos, k) in idx.iter_mut().enumerate().rev() {
                        *k += 1;
                        if *k < axes[pos].len() {
                            break;
                        }
                        *k = 0;
                    }
                }
            }
        }
        for _ in 0..random_points {
            let point: Vec<f64> = fam.domains.iter().map(|d| d.random(&mut rng)).collect();
            push(&mut probes, fam.member(&point));
        }
        if probes.len() == start {
            let point: Vec<f64> = fam.domains.iter().map(ValueDomain::representative).collect();
            push(&mut probes, fam.member(&point));
        }
    }

    // Restriction closure: add i|_J for every family J that contains it.
    let mut extra = Vec::new();
    for p in &probes {
        for fam in catalog.families() {
            let set = fam.target_set();
            let r = p.intervention.restrict(|t| set.contains(t));
            if r.targets().len() == set.len() && fam.contains(&r) {
                extra.push(Probe {
                    intervention: r,
                    family: fam.label.clone(),
                });
            }
        }
    }
    probes.extend(extra);
    Ok(ProbeSet::from_probes(probes, exhaustive))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn intervention_text_round_trips() {
        for i in [
            Intervention::null(),
            Intervention::new([("X1", 0.0), ("X2", -1.5)]),
            Intervention::new([("Y", 1e-7)]),
        ] {
            assert_eq!(i.to_string().parse::<Intervention>().unwrap(), i);
        }
        assert_eq!("A=1, B=2".parse::<Intervention>().unwrap(), Intervention::new([("A", 1.0), ("B", 2.0)]));
        assert_eq!("".parse::<Intervention>().unwrap(), Intervention::null());
        assert!("do(A=1, A=2)".parse::<Intervention>().is_err());
        assert!("do(A)".parse::<Intervention>().is_err());
        assert!("A=x".parse::<Intervention>().is_err());
    }

    fn do1(k: &str, v: f64) -> Intervention {
        Intervention::new([(k, v)])
    }

    #[test]
    fn order_examples() {
        let a = do1("X1", 0.0);
        let b = Intervention::new([("X1", 0.0), ("X2", 0.0)]);
        assert!(a.leq(&b));
        assert!(!b.leq(&a));
        let c = do1("X2", 0.0);
        assert!(!a.leq(&c) && !c.leq(&a));
        let d = do1("X1", 1.0);
        assert!(!a.leq(&d) && !d.leq(&a));
        assert!(Intervention::null().leq(&a));
    }

    fn example1() -> InterventionCatalog {
        InterventionCatalog::explicit([
            do1("B1", 0.0),
            do1("B2", 0.0),
            Intervention::new([("B1", 0.0), ("B2", 0.0)]),
        ])
        .unwrap()
    }

    #[test]
    fn finite_catalog_is_enumerated_exactly() {
        let ps = probe_catalog(&example1(), 3, 5, 1).unwrap();
        assert!(ps.exhaustive);
        assert_eq!(ps.probes.len(), 4);
        let idx = |i: &Intervention| ps.probes.iter().position(|p| &p.intervention == i).unwrap();
        let both = idx(&Intervention::new([("B1", 0.0), ("B2", 0.0)]));
        assert!(ps.pairs.contains(&(idx(&do1("B1", 0.0)), both)));
        for k in 1..4 {
            assert!(ps.pairs.contains(&(0, k)));
        }
    }

    #[test]
    fn bounded_grid_counts() {
        let fam = InterventionFamily::new(
            "W",
            vec!["W1".into(), "W2".into()],
            vec![ValueDomain::interval(-1.0, 1.0), ValueDomain::interval(-1.0, 1.0)],
        )
        .unwrap();
        let cat = InterventionCatalog::new(vec![InterventionFamily::null("null"), fam.clone()]).unwrap();
        let ps = probe_catalog(&cat, 3, 0, 7).unwrap();
        assert!(!ps.exhaustive);
        assert_eq!(ps.probes.len(), 10);
        let ps = probe_catalog(&cat, 3, 4, 7).unwrap();
        assert_eq!(ps.probes.len(), 14);
        for p in &ps.probes[1..] {
            assert!(fam.contains(&p.intervention));
        }
    }

    #[test]
    fn unbounded_axes_get_random_points_and_restrictions() {
        let w = InterventionFamily::new("W", vec!["W1".into()], vec![ValueDomain::reals()]).unwrap();
        let wz = InterventionFamily::new(
            "WZ",
            vec!["W1".into(), "Z1".into()],
            vec![ValueDomain::reals(), ValueDomain::reals()],
        )
        .unwrap();
        let cat = InterventionCatalog::new(vec![InterventionFamily::null("null"), w, wz]).unwrap();
        let ps = probe_catalog(&cat, 3, 2, 11).unwrap();
        // ∅, 2 W probes, 2 WZ probes, and the 2 W-restrictions of the WZ probes
        assert_eq!(ps.probes.len(), 7);
        let cross = ps
            .pairs
            .iter()
            .filter(|(a, b)| ps.probes[*a].family == "W" && ps.probes[*b].family == "WZ")
            .count();
        assert_eq!(cross, 2);
        let again = probe_catalog(&cat, 3, 2, 11).unwrap();
        assert_eq!(
            ps.interventions().collect::<Vec<_>>(),
            again.interventions().collect::<Vec<_>>()
        );
    }

    #[test]
    fn catalog_validation() {
        assert!(InterventionCatalog::new(vec![]).is_err());
        assert!(InterventionCatalog::new(vec![InterventionFamily::single("a", &do1("X", 1.0))]).is_err());
        let dup = InterventionCatalog::new(vec![InterventionFamily::null("a"), InterventionFamily::null("b")]);
        assert!(dup.is_err());
        assert!(InterventionFamily::new("f", vec!["X".into()], vec![]).is_err());
    }

    #[test]
    fn above_pins_values() {
        let cat = example1();
        let up = cat.above(&do1("B1", 0.0));
        assert_eq!(up.families().len(), 2);
        assert!(up.contains(&do1("B1", 0.0)));
        assert!(up.contains(&Intervention::new([("B1", 0.0), ("B2", 0.0)])));
        assert!(!up.contains(&Intervention::null()));
    }

    fn arb_intervention() -> impl Strategy<Value = Intervention> {
        prop::collection::btree_map(
            prop::sample::select(vec!["A", "B", "C", "D"]).prop_map(String::from),
            prop::sample::select(vec![0.0, 1.0, -2.5]),
            0..4,
        )
        .prop_map(|m| Intervention { targets: m })
    }

    proptest! {
        #[test]
        fn leq_is_a_partial_order(i in arb_intervention(), j in arb_intervention(), k in arb_intervention()) {
            prop_assert!(i.leq(&i));
            if i.leq(&j) && j.leq(&i) {
                prop_assert_eq!(&i, &j);
            }
            if i.leq(&j) && j.leq(&k) {
                prop_assert!(i.leq(&k));
            }
            prop_assert!(Intervention::null().leq(&i));
        }

        #[test]
        fn probes_belong_to_their_family(seed in any::<u64>(), grid in 0usize..4, random in 0usize..4) {
            let cat = InterventionCatalog::new(vec![
                InterventionFamily::null("null"),
                InterventionFamily::new("a", vec!["A".into()], vec![ValueDomain::interval(0.0, 2.0)]).unwrap(),
                InterventionFamily::new("b", vec!["A".into(), "B".into()],
                    vec![ValueDomain::Finite(vec![1.0, 2.0]), ValueDomain::Interval { low: Some(0.0), high: None }]).unwrap(),
            ]).unwrap();
            let ps = probe_catalog(&cat, grid, random, seed).unwrap();
            prop_assert!(ps.probes[0].intervention.is_null());
            for fam in cat.families() {
                prop_assert!(ps.probes.iter().any(|p| p.family == fam.label));
            }
            for p in &ps.probes {
                prop_assert!(cat.family(&p.family).unwrap().contains(&p.intervention));
            }
        }
    }
}
