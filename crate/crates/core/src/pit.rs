//! PIT construction and conformal rank p-values.
//!
//! Converts (prediction, outcome) pairs into probability integral transforms,
//! maintains the running order statistics of every PIT seen so far, and turns
//! the rank of each new PIT into a jittered p-value that is Uniform(0,1)
//! whenever the PIT stream is i.i.d. from *any* fixed continuous law — the
//! distribution-free property the downstream betting layer relies on.

use std::cmp::Ordering;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::seeds::splitmix64;

/// A probability integral transform value in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(transparent)]
pub struct PitValue<R>(R);

impl<R: Real> PitValue<R> {
    /// Validates that `u` is finite and within `[0, 1]`.
    pub fn new(u: R) -> Result<Self> {
        if !u.is_finite() || u < R::zero() || u > R::one() {
            return Err(Error::InvalidInput {
                field: "u",
                reason: format!("{u} is not in [0, 1]"),
            });
        }
        Ok(Self(u))
    }

    /// Clamps tiny floating excursions outside `[0, 1]` instead of failing.
    pub(crate) fn clamped(u: R) -> Self {
        Self(u.max(R::zero()).min(R::one()))
    }

    pub fn value(self) -> R {
        self.0
    }
}

/// Standard normal CDF, `Φ(z) = erfc(−z/√2) / 2`.
///
/// Absolute error is below 1e−15 for `f64` over |z| ≤ 8.
pub fn standard_normal_cdf<R: Real>(z: R) -> R {
    let sqrt2 = R::from_f64(std::f64::consts::SQRT_2);
    (-z / sqrt2).erfc() / R::from_f64(2.0)
}

/// PIT of an outcome under a Gaussian predictive distribution:
/// `u = Φ((y − mu) / sigma)`.
pub fn pit_from_gaussian<R: Real>(y: R, mu: R, sigma: R) -> Result<PitValue<R>> {
    if !y.is_finite() {
        return Err(Error::InvalidInput {
            field: "y",
            reason: format!("{y} is not finite"),
        });
    }
    if !mu.is_finite() {
        return Err(Error::InvalidInput {
            field: "mu",
            reason: format!("{mu} is not finite"),
        });
    }
    if !sigma.is_finite() || sigma <= R::zero() {
        return Err(Error::InvalidInput {
            field: "sigma",
            reason: format!("{sigma} is not a positive finite stddev"),
        });
    }
    let z = (y - mu) / sigma;
    Ok(PitValue::clamped(standard_normal_cdf(z)))
}

const NIL: u32 = u32::MAX;

#[derive(Debug, Clone)]
struct Node<R> {
    key: R,
    priority: u64,
    /// How many inserted values share this exact key.
    multiplicity: u64,
    /// Total values in this subtree, multiplicities included.
    subtree: u64,
    left: u32,
    right: u32,
}

/// Ordered multiset of PIT values with O(log n) insertion and rank queries.
///
/// Backed by an arena-allocated treap keyed on the PIT value; exact duplicates
/// share a node and are counted by multiplicity, so atom-heavy streams stay
/// balanced. Treap priorities come from a deterministic counter hash, keeping
/// the structure reproducible run to run.
#[derive(Debug, Clone)]
pub struct RankTracker<R> {
    nodes: Vec<Node<R>>,
    root: u32,
    count: u64,
    salt: u64,
}

impl<R: Real> RankTracker<R> {
    pub fn new() -> Self {
        Self::with_salt(0x5256_9A92_17E3_0C4D)
    }

    /// A tracker whose treap priorities derive from `salt`. The salt affects
    /// only the tree shape, never ranks.
    pub fn with_salt(salt: u64) -> Self {
        Self {
            nodes: Vec::new(),
            root: NIL,
            count: 0,
            salt,
        }
    }

    /// Number of values inserted so far.
    pub fn len(&self) -> u64 {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// Inserts `u` and returns `(rank, time)` where `time` is the new count
    /// and `rank` counts strictly smaller stored values plus a uniformly
    /// random position among exact ties (the new value included). With no
    /// ties this is exactly `#{s ≤ t : U_s ≤ U_t}`.
    pub fn insert_and_rank<G: Rng + ?Sized>(
        &mut self,
        u: PitValue<R>,
        tie_rng: &mut G,
    ) -> (u64, u64) {
        let key = u.value();
        self.root = self.insert_node(self.root, key);
        self.count += 1;
        let below = self.count_less(key);
        let ties = self.count_equal(key);
        debug_assert!(ties >= 1);
        let offset = if ties == 1 {
            1
        } else {
            tie_rng.random_range(1..=ties)
        };
        (below + offset, self.count)
    }

    /// Number of stored values strictly smaller than `key`.
    pub fn count_less(&self, key: R) -> u64 {
        let mut acc = 0;
        let mut at = self.root;
        while at != NIL {
            let node = &self.nodes[at as usize];
            match cmp_keys(key, node.key) {
                Ordering::Less => at = node.left,
                Ordering::Equal => {
                    acc += self.subtree_size(node.left);
                    break;
                }
                Ordering::Greater => {
                    acc += self.subtree_size(node.left) + node.multiplicity;
                    at = node.right;
                }
            }
        }
        acc
    }

    /// Number of stored values exactly equal to `key`.
    pub fn count_equal(&self, key: R) -> u64 {
        let mut at = self.root;
        while at != NIL {
            let node = &self.nodes[at as usize];
            match cmp_keys(key, node.key) {
                Ordering::Less => at = node.left,
                Ordering::Equal => return node.multiplicity,
                Ordering::Greater => at = node.right,
            }
        }
        0
    }

    fn subtree_size(&self, at: u32) -> u64 {
        if at == NIL {
            0
        } else {
            self.nodes[at as usize].subtree
        }
    }

    fn refresh(&mut self, at: u32) {
        let (left, right, mult) = {
            let n = &self.nodes[at as usize];
            (n.left, n.right, n.multiplicity)
        };
        self.nodes[at as usize].subtree =
            mult + self.subtree_size(left) + self.subtree_size(right);
    }

    fn rotate_right(&mut self, y: u32) -> u32 {
        let x = self.nodes[y as usize].left;
        self.nodes[y as usize].left = self.nodes[x as usize].right;
        self.nodes[x as usize].right = y;
        self.refresh(y);
        self.refresh(x);
        x
    }

    fn rotate_left(&mut self, y: u32) -> u32 {
        let x = self.nodes[y as usize].right;
        self.nodes[y as usize].right = self.nodes[x as usize].left;
        self.nodes[x as usize].left = y;
        self.refresh(y);
        self.refresh(x);
        x
    }

    fn insert_node(&mut self, at: u32, key: R) -> u32 {
        if at == NIL {
            let idx = self.nodes.len() as u32;
            let priority = splitmix64(self.salt.wrapping_add(u64::from(idx)));
            self.nodes.push(Node {
                key,
                priority,
                multiplicity: 1,
                subtree: 1,
                left: NIL,
                right: NIL,
            });
            return idx;
        }
        let i = at as usize;
        match cmp_keys(key, self.nodes[i].key) {
            Ordering::Equal => {
                self.nodes[i].multiplicity += 1;
                self.nodes[i].subtree += 1;
                at
            }
            Ordering::Less => {
                let child = self.insert_node(self.nodes[i].left, key);
                self.nodes[i].left = child;
                if self.nodes[child as usize].priority > self.nodes[i].priority {
                    self.rotate_right(at)
                } else {
                    self.refresh(at);
                    at
                }
            }
            Ordering::Greater => {
                let child = self.insert_node(self.nodes[i].right, key);
                self.nodes[i].right = child;
                if self.nodes[child as usize].priority > self.nodes[i].priority {
                    self.rotate_left(at)
                } else {
                    self.refresh(at);
                    at
                }
            }
        }
    }
}

impl<R: Real> Default for RankTracker<R> {
    fn default() -> Self {
        Self::new()
    }
}

fn cmp_keys<R: Real>(a: R, b: R) -> Ordering {
    // PitValue construction excludes NaN.
    a.partial_cmp(&b).expect("rank keys must not be NaN")
}

/// A jittered conformal p-value `(rank − 1 + jitter) / time`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConformalPValue<R> {
    pub p: R,
    pub rank: u64,
    pub time: u64,
    pub jitter: R,
}

/// Jitters the discrete rank into a p-value in `[0, 1)`. Under i.i.d.
/// continuous inputs the result is Uniform(0,1).
pub fn conformal_pvalue<R: Real, G: Rng + ?Sized>(
    rank: u64,
    time: u64,
    jitter_rng: &mut G,
) -> Result<ConformalPValue<R>> {
    if time < 1 || rank < 1 || rank > time {
        return Err(Error::ContractViolation(format!(
            "rank {rank} out of range 1..={time}"
        )));
    }
    let jitter = R::from_f64(jitter_rng.random::<f64>());
    let mut p = (R::from_f64((rank - 1) as f64) + jitter) / R::from_f64(time as f64);
    if p >= R::one() {
        // Unreachable in exact arithmetic; guards the half-open contract
        // against rounding at extreme stream lengths.
        p = R::one() - R::epsilon();
    }
    Ok(ConformalPValue {
        p,
        rank,
        time,
        jitter,
    })
}
