//! Joint selectivity estimation: a chain of pair copulas over adjacent
//! attributes approximates the joint CDF of a conjunctive range query.
//!
//! A query constrains a subset of attributes; the chain runs over those
//! attributes in schema order. Probability of all ranges jointly is built
//! from (a) two-corner / four-corner inclusion-exclusion of pair copulas
//! and (b) conditional CDFs computed recursively while the conditioning
//! span shrinks from either end. All sub-span probabilities and copula
//! corner values are memoized per query, keeping a call at O(n^2) entries.

use alloc::vec::Vec;

use crate::copula::{gumbel_cdf, ThetaMatrix};
use crate::marginal::MarginalCdf;
use crate::table::{encode_predicate_value, ColumnMeta, EncodeError, Predicate};
use crate::EPS_DEN;

/// The fitted single-table estimator: one marginal CDF per attribute plus
/// pairwise copula parameters. Immutable after fit; estimation allocates
/// only a per-call memo, so concurrent use needs no locking.
#[derive(Debug, Clone)]
pub struct DVineModel {
    marginals: Vec<MarginalCdf>,
    thetas: ThetaMatrix,
    row_count: u64,
}

impl DVineModel {
    pub fn new(marginals: Vec<MarginalCdf>, thetas: ThetaMatrix, row_count: u64) -> Self {
        assert_eq!(marginals.len(), thetas.n(), "theta matrix size must match attribute count");
        assert!(row_count > 0, "model requires a non-empty table");
        DVineModel { marginals, thetas, row_count }
    }

    pub fn marginals(&self) -> &[MarginalCdf] {
        &self.marginals
    }

    pub fn marginal(&self, attr: usize) -> &MarginalCdf {
        &self.marginals[attr]
    }

    pub fn thetas(&self) -> &ThetaMatrix {
        &self.thetas
    }

    pub fn thetas_mut(&mut self) -> &mut ThetaMatrix {
        &mut self.thetas
    }

    pub fn attr_count(&self) -> usize {
        self.marginals.len()
    }

    pub fn row_count(&self) -> u64 {
        self.row_count
    }

    /// Smallest selectivity the estimator will emit for a satisfiable
    /// query: half a row.
    pub fn s_min(&self) -> f64 {
        1.0 / (2.0 * self.row_count as f64)
    }

    /// Swap in a refit marginal (partial update path).
    pub fn replace_marginal(&mut self, attr: usize, m: MarginalCdf) {
        self.marginals[attr] = m;
    }

    pub fn set_row_count(&mut self, row_count: u64) {
        assert!(row_count > 0, "model requires a non-empty table");
        self.row_count = row_count;
    }

    /// Per-attribute CDF endpoints of the query, `(0, 1)` for attributes
    /// the query leaves unconstrained. This is the feature view used by
    /// the compensation network.
    pub fn cdf_bounds(&self, q: &QueryBounds) -> Vec<(f64, f64)> {
        let mut out = alloc::vec![(0.0, 1.0); self.marginals.len()];
        for r in &q.ranges {
            let m = &self.marginals[r.attr];
            out[r.attr] = (m.eval_cdf(r.lb), m.eval_cdf(r.ub));
        }
        out
    }

    /// Independence baseline: the product of marginal CDF differences.
    pub fn avi_estimate(&self, q: &QueryBounds) -> f64 {
        if q.empty {
            return 0.0;
        }
        let mut p = 1.0;
        for r in &q.ranges {
            let m = &self.marginals[r.attr];
            p *= (m.eval_cdf(r.ub) - m.eval_cdf(r.lb)).max(0.0);
        }
        p.min(1.0)
    }

    /// Estimate the selectivity of a conjunctive range query.
    ///
    /// Returns exactly 0 for unsatisfiable queries; otherwise the joint
    /// probability of all ranges, floored at [`Self::s_min`] and capped
    /// at 1.
    pub fn estimate(&self, q: &QueryBounds) -> f64 {
        if q.empty {
            return 0.0;
        }
        if q.ranges.is_empty() {
            return 1.0;
        }
        let mut eval = QueryEval::new(self, q);
        let raw = eval.prob(0, q.ranges.len() - 1);
        raw.clamp(self.s_min(), 1.0)
    }
}

/// One attribute's intersected query range, in encoded value space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttrRange {
    pub attr: usize,
    pub lb: f64,
    pub ub: f64,
}

/// A query projected onto the model: constrained attributes in schema
/// order, each with a single closed interval.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryBounds {
    /// Ascending by attribute index; unconstrained attributes absent.
    pub ranges: Vec<AttrRange>,
    /// Some attribute's predicates intersected to an empty interval;
    /// the query matches nothing.
    pub empty: bool,
}

/// Intersect a conjunction of predicates into per-attribute intervals.
/// Predicate order is irrelevant; attributes keep their schema positions.
pub fn project_query(columns: &[ColumnMeta], predicates: &[Predicate]) -> Result<QueryBounds, EncodeError> {
    let mut ranges: Vec<AttrRange> = Vec::new();
    for p in predicates {
        if p.column >= columns.len() {
            return Err(EncodeError::UnknownColumn(alloc::format!("#{}", p.column)));
        }
        let (lb, ub) = encode_predicate_value(&columns[p.column], p.op, &p.literal)?;
        match ranges.iter_mut().find(|r| r.attr == p.column) {
            Some(r) => {
                r.lb = r.lb.max(lb);
                r.ub = r.ub.min(ub);
            }
            None => ranges.push(AttrRange { attr: p.column, lb, ub }),
        }
    }
    ranges.sort_unstable_by_key(|r| r.attr);
    let empty = ranges.iter().any(|r| r.lb > r.ub);
    Ok(QueryBounds { ranges, empty })
}

/// Per-query evaluation state: CDF endpoints of every constrained
/// attribute plus memo tables for sub-span probabilities and conditional
/// copula corner values.
struct QueryEval<'a> {
    thetas: &'a ThetaMatrix,
    attrs: Vec<usize>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    /// `prob[s*n+e]`: joint probability of constrained attrs `s..=e`.
    prob: Vec<Option<f64>>,
    /// `corner[(s*n+e)*4 + xu*2 + yu]`: conditional copula value for the
    /// span `s..=e` with bound sides `xu` (attr s) and `yu` (attr e).
    corner: Vec<Option<f64>>,
}

impl<'a> QueryEval<'a> {
    fn new(model: &'a DVineModel, q: &QueryBounds) -> Self {
        let n = q.ranges.len();
        let mut attrs = Vec::with_capacity(n);
        let mut lo = Vec::with_capacity(n);
        let mut hi = Vec::with_capacity(n);
        for r in &q.ranges {
            let m = model.marginal(r.attr);
            attrs.push(r.attr);
            lo.push(m.eval_cdf(r.lb));
            hi.push(m.eval_cdf(r.ub));
        }
        QueryEval {
            thetas: &model.thetas,
            attrs,
            lo,
            hi,
            prob: alloc::vec![None; n * n],
            corner: alloc::vec![None; n * n * 4],
        }
    }

    fn theta(&self, i: usize, j: usize) -> f64 {
        self.thetas.get(self.attrs[i], self.attrs[j])
    }

    /// Marginal probability of constrained attribute `k`'s range.
    fn width(&self, k: usize) -> f64 {
        (self.hi[k] - self.lo[k]).max(0.0)
    }

    /// Joint probability of the ranges on constrained attrs `s..=e`.
    fn prob(&mut self, s: usize, e: usize) -> f64 {
        if s > e {
            return 1.0;
        }
        let n = self.attrs.len();
        if let Some(v) = self.prob[s * n + e] {
            return v;
        }
        let raw = if s == e {
            self.width(s)
        } else if e == s + 1 {
            let t = self.theta(s, e);
            gumbel_cdf(self.hi[s], self.hi[e], t) - gumbel_cdf(self.lo[s], self.hi[e], t)
                - gumbel_cdf(self.hi[s], self.lo[e], t)
                + gumbel_cdf(self.lo[s], self.lo[e], t)
        } else {
            // four corners of (attr s, attr e), signs (+,-,+,-), scaled by
            // the middle block's own probability
            let sum = self.corner(s, e, false, false) - self.corner(s, e, false, true)
                + self.corner(s, e, true, true)
                - self.corner(s, e, true, false);
            sum * self.prob(s + 1, e - 1)
        };
        let v = raw.clamp(0.0, 1.0);
        self.prob[s * n + e] = Some(v);
        v
    }

    fn bound(&self, k: usize, upper: bool) -> f64 {
        if upper {
            self.hi[k]
        } else {
            self.lo[k]
        }
    }

    /// Conditional copula value for span `s..=e` (length >= 3): the pair
    /// copula of attrs (s, e) applied to their CDFs conditioned on the
    /// middle attributes' ranges, evaluated at bound side `xu` of attr s
    /// and `yu` of attr e.
    fn corner(&mut self, s: usize, e: usize, xu: bool, yu: bool) -> f64 {
        debug_assert!(e - s >= 2);
        let n = self.attrs.len();
        let key = (s * n + e) * 4 + (xu as usize) * 2 + (yu as usize);
        if let Some(v) = self.corner[key] {
            return v;
        }
        let fx = self.bound(s, xu);
        let fy = self.bound(e, yu);
        let (u, v) = if e - s == 2 {
            // single conditioning attribute: two-corner copula differences
            let m = s + 1;
            let pm = self.prob(m, m);
            if pm < EPS_DEN {
                (fx, fy)
            } else {
                let tx = self.theta(s, m);
                let ty = self.theta(m, e);
                let u = (gumbel_cdf(fx, self.hi[m], tx) - gumbel_cdf(fx, self.lo[m], tx)) / pm;
                let v = (gumbel_cdf(self.hi[m], fy, ty) - gumbel_cdf(self.lo[m], fy, ty)) / pm;
                (u, v)
            }
        } else {
            // shrink the conditioning span from the right for attr s's
            // conditional CDF, from the left for attr e's
            let pmid = self.prob(s + 1, e - 1);
            if pmid < EPS_DEN {
                (fx, fy)
            } else {
                let u = (self.corner(s, e - 1, xu, true) - self.corner(s, e - 1, xu, false))
                    * self.prob(s + 1, e - 2)
                    / pmid;
                let v = (self.corner(s + 1, e, true, yu) - self.corner(s + 1, e, false, yu))
                    * self.prob(s + 2, e - 1)
                    / pmid;
                (u, v)
            }
        };
        let out = gumbel_cdf(u.clamp(0.0, 1.0), v.clamp(0.0, 1.0), self.theta(s, e));
        self.corner[key] = Some(out);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::copula::THETA_MAX;
    use crate::marginal::MarginalCdf;
    use crate::table::{ColumnKind, Literal, PredicateOp};
    use alloc::string::ToString;
    use alloc::vec;
    use alloc::vec::Vec;

    /// Uniform[0,1] marginal: CDF(x) = x, so query bounds are copula
    /// coordinates directly and the model's joint law IS the vine.
    fn uniform() -> MarginalCdf {
        MarginalCdf::from_parts(vec![0.0, 1.0], vec![0.0, 1.0], vec![1.0, 1.0]).unwrap()
    }

    fn uniform_model(thetas: ThetaMatrix) -> DVineModel {
        let n = thetas.n();
        DVineModel::new((0..n).map(|_| uniform()).collect(), thetas, 1_000_000)
    }

    fn query(bounds: &[(f64, f64)]) -> QueryBounds {
        QueryBounds {
            ranges: bounds
                .iter()
                .enumerate()
                .map(|(attr, &(lb, ub))| AttrRange { attr, lb, ub })
                .collect(),
            empty: false,
        }
    }

    fn theta(n: usize, entries: &[(usize, usize, f64)]) -> ThetaMatrix {
        let mut m = ThetaMatrix::identity(n);
        for &(i, j, t) in entries {
            m.set(i, j, t);
        }
        m
    }

    #[test]
    fn single_attribute_is_marginal_difference() {
        let model = uniform_model(ThetaMatrix::identity(3));
        let q = QueryBounds {
            ranges: vec![AttrRange { attr: 1, lb: 0.25, ub: 0.75 }],
            empty: false,
        };
        assert!((model.estimate(&q) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn pair_rectangle_matches_frozen_copula_mass() {
        // Frozen with an independent implementation:
        //   C(.6,.9)-C(.1,.9)-C(.6,.2)+C(.1,.2) at theta=2
        let model = uniform_model(theta(2, &[(0, 1, 2.0)]));
        let got = model.estimate(&query(&[(0.1, 0.6), (0.2, 0.9)]));
        assert!((got - 0.36928514389823686).abs() < 1e-14, "got {got}");
    }

    #[test]
    fn pair_anchored_at_origin_is_a_single_corner() {
        let model = uniform_model(theta(2, &[(0, 1, 2.0)]));
        let got = model.estimate(&query(&[(0.0, 0.5), (0.0, 0.5)]));
        assert!((got - 0.37521422724648179).abs() < 1e-14, "got {got}");
    }

    // The chain traces below were frozen from an independent transcription
    // of the recursion (uniform marginals, so CDF interval == value
    // interval) before this module was written.
    #[test]
    fn three_attribute_chain_matches_frozen_trace() {
        let model = uniform_model(theta(3, &[(0, 1, 2.0), (0, 2, 1.7), (1, 2, 3.0)]));
        let got = model.estimate(&query(&[(0.1, 0.6), (0.2, 0.9), (0.3, 0.7)]));
        assert!((got - 0.2236016154858578).abs() < 1e-13, "got {got}");
    }

    #[test]
    fn four_attribute_chain_matches_frozen_trace() {
        let model = uniform_model(theta(
            4,
            &[(0, 1, 2.5), (0, 2, 1.8), (0, 3, 1.3), (1, 2, 3.2), (1, 3, 1.6), (2, 3, 2.1)],
        ));
        let got = model.estimate(&query(&[(0.2, 0.4), (0.3, 0.6), (0.1, 0.5), (0.25, 0.55)]));
        assert!((got - 0.03609524815069687).abs() < 1e-13, "got {got}");
    }

    #[test]
    fn five_attribute_chain_matches_frozen_trace() {
        let model = uniform_model(theta(
            5,
            &[
                (0, 1, 1.4),
                (0, 3, 2.2),
                (0, 4, 1.1),
                (1, 2, 4.0),
                (1, 4, 1.9),
                (2, 3, 2.8),
                (2, 4, 1.2),
                (3, 4, 3.5),
            ],
        ));
        let q = query(&[(0.05, 0.8), (0.0, 1.0), (0.45, 0.5), (0.3, 0.95), (0.6, 0.75)]);
        let got = model.estimate(&q);
        assert!((got - 0.006647743784260606).abs() < 1e-13, "got {got}");
    }

    #[test]
    fn independence_thetas_reduce_to_avi() {
        let model = uniform_model(ThetaMatrix::identity(6));
        let q = query(&[
            (0.1, 0.9),
            (0.0, 0.6),
            (0.3, 0.35),
            (0.2, 1.0),
            (0.05, 0.95),
            (0.5, 0.8),
        ]);
        let est = model.estimate(&q);
        let avi = model.avi_estimate(&q);
        assert!((est - avi).abs() <= 1e-9, "estimate {est} vs avi {avi}");
    }

    #[test]
    fn full_range_query_is_certain() {
        let model = uniform_model(theta(
            4,
            &[(0, 1, 2.0), (1, 2, 3.0), (2, 3, 1.5), (0, 2, 1.2), (0, 3, 1.1), (1, 3, 2.2)],
        ));
        let got = model.estimate(&query(&[(0.0, 1.0); 4]));
        assert!((got - 1.0).abs() <= 1e-6, "got {got}");
    }

    #[test]
    fn collapsed_middle_range_floors_at_s_min() {
        // point range on the middle attribute: joint mass vanishes but the
        // query is satisfiable, so the floor applies instead of exact zero
        let model = uniform_model(theta(3, &[(0, 1, 2.0), (0, 2, 1.6), (1, 2, 2.5)]));
        let got = model.estimate(&query(&[(0.2, 0.7), (0.5, 0.5), (0.3, 0.9)]));
        assert_eq!(got, model.s_min());
    }

    #[test]
    fn empty_query_bounds_short_circuit_to_zero() {
        let model = uniform_model(ThetaMatrix::identity(2));
        let q = QueryBounds {
            ranges: vec![AttrRange { attr: 0, lb: 0.7, ub: 0.3 }],
            empty: true,
        };
        assert_eq!(model.estimate(&q), 0.0);
        assert_eq!(model.avi_estimate(&q), 0.0);
    }

    #[test]
    fn unconstrained_middle_attribute_drops_out() {
        // full-range middle attr: conditioning is vacuous, so the chain
        // must collapse to the outer pair's rectangle mass
        let model = uniform_model(theta(3, &[(0, 1, 3.0), (0, 2, 2.0), (1, 2, 4.0)]));
        let with_mid = model.estimate(&query(&[(0.0, 0.5), (0.0, 1.0), (0.0, 0.5)]));
        assert!((with_mid - 0.37521422724648179).abs() < 1e-13, "got {with_mid}");
    }

    fn test_columns() -> Vec<ColumnMeta> {
        vec![
            ColumnMeta {
                name: "age".to_string(),
                kind: ColumnKind::Continuous,
                distinct_count: 100,
                domain_lo: 0.0,
                domain_hi: 100.0,
                encoding: vec![],
            },
            ColumnMeta {
                name: "city".to_string(),
                kind: ColumnKind::Categorical,
                distinct_count: 3,
                domain_lo: 0.0,
                domain_hi: 3.0,
                encoding: vec!["ann".to_string(), "bar".to_string(), "cy".to_string()],
            },
        ]
    }

    #[test]
    fn projection_intersects_and_orders_predicates() {
        let cols = test_columns();
        let preds = vec![
            Predicate { column: 1, op: PredicateOp::Eq, literal: Literal::Label("bar".to_string()) },
            Predicate { column: 0, op: PredicateOp::Ge, literal: Literal::Number(10.0) },
            Predicate { column: 0, op: PredicateOp::Le, literal: Literal::Number(60.0) },
        ];
        let q = project_query(&cols, &preds).unwrap();
        assert!(!q.empty);
        assert_eq!(q.ranges.len(), 2);
        assert_eq!(q.ranges[0].attr, 0);
        assert_eq!((q.ranges[0].lb, q.ranges[0].ub), (10.0, 60.0));
        assert_eq!(q.ranges[1].attr, 1);
        assert_eq!(q.ranges[1].lb, 1.0);

        // same predicates, shuffled: projection canonicalizes
        let shuffled = vec![preds[2].clone(), preds[0].clone(), preds[1].clone()];
        assert_eq!(project_query(&cols, &shuffled).unwrap(), q);
    }

    #[test]
    fn contradictory_predicates_project_to_empty() {
        let cols = test_columns();
        let preds = vec![
            Predicate { column: 0, op: PredicateOp::Ge, literal: Literal::Number(50.0) },
            Predicate { column: 0, op: PredicateOp::Le, literal: Literal::Number(30.0) },
        ];
        let q = project_query(&cols, &preds).unwrap();
        assert!(q.empty);
    }

    #[test]
    fn projection_reports_unknown_columns() {
        let cols = test_columns();
        let preds =
            vec![Predicate { column: 9, op: PredicateOp::Ge, literal: Literal::Number(1.0) }];
        assert!(matches!(project_query(&cols, &preds), Err(EncodeError::UnknownColumn(_))));
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn arb_theta() -> impl Strategy<Value = f64> {
            prop_oneof![Just(1.0), 1.0f64..THETA_MAX]
        }

        fn arb_ranges(n: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
            proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), n).prop_map(|v| {
                v.into_iter()
                    .map(|(a, b)| if a <= b { (a, b) } else { (b, a) })
                    .collect()
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn estimate_is_floored_or_zero(
                n in 2usize..6,
                seed in 0u64..1000,
            ) {
                use rand::{Rng, SeedableRng};
                let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
                let mut th = ThetaMatrix::identity(n);
                for i in 0..n {
                    for j in i + 1..n {
                        th.set(i, j, 1.0 + rng.gen::<f64>() * (THETA_MAX - 1.0));
                    }
                }
                let model = uniform_model(th);
                let bounds: Vec<(f64, f64)> = (0..n)
                    .map(|_| {
                        let a = rng.gen::<f64>();
                        let b = rng.gen::<f64>();
                        if a <= b { (a, b) } else { (b, a) }
                    })
                    .collect();
                let est = model.estimate(&query(&bounds));
                prop_assert!(est >= model.s_min() && est <= 1.0, "estimate {est} out of range");
            }

            #[test]
            fn independence_reduction_holds_for_any_ranges(bounds in arb_ranges(5)) {
                let model = uniform_model(ThetaMatrix::identity(5));
                let q = query(&bounds);
                let est = model.estimate(&q);
                let avi = model.avi_estimate(&q);
                prop_assert!((est - avi.max(model.s_min())).abs() <= 1e-9,
                    "estimate {est} vs floored avi {avi}");
            }

            #[test]
            fn pair_estimate_grows_under_widening(
                t in arb_theta(),
                lb in 0.05f64..0.9,
                w in 0.0f64..0.5,
                grow in 0.0f64..0.1,
            ) {
                let model = uniform_model(theta(2, &[(0, 1, t)]));
                let ub = (lb + w).min(1.0);
                let base = model.estimate(&query(&[(lb, ub), (0.2, 0.8)]));
                let wider = model.estimate(&query(&[((lb - grow).max(0.0), (ub + grow).min(1.0)), (0.2, 0.8)]));
                prop_assert!(wider + 1e-12 >= base, "widened {wider} < base {base}");
            }
        }
    }
}
