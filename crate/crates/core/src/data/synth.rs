//! Deterministic synthetic corpus generation.
//!
//! Every gloss is a distinct tuple of phoneme class choices; examples of a
//! gloss realize that tuple geometrically on the 27-joint skeleton and
//! differ only by Gaussian coordinate noise. Hierarchy-dependent labels
//! (the Handshape children, and Major Location under the two location
//! children) are never sampled independently: they are read from the
//! spec's maps, which is what makes the re-derivation oracle possible.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{joint, SkeletonGraph};
use crate::taxonomy::{build_taxonomy, type_id, PhonemeLabels, PhonemeTaxonomy, TYPE_COUNT};

use super::rng::{example_rng, spec_rng, splitmix64};
use super::{LabeledExample, PoseSequence};

/// Child-type values implied by one active Handshape class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HandshapeChildren {
    pub spread: u32,
    pub flexion: u32,
    pub thumb_position: u32,
    pub selected_fingers: u32,
    pub spread_change: u32,
}

/// Full description of a synthetic corpus; a corpus is regenerable from
/// its spec alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisSpec {
    pub seed: u64,
    /// Total example count; example i receives gloss (i mod gloss_count)+1,
    /// so per-gloss counts differ by at most one.
    pub examples: usize,
    pub gloss_count: usize,
    pub frames: usize,
    pub noise_sigma: f64,
    /// Hash of the taxonomy this corpus was generated against.
    #[serde(default)]
    pub taxonomy_hash: String,
    /// Active class subsets per type, indexed by curriculum position
    /// (16 entries, each sorted, each within [1, K_i]).
    pub active_classes: Vec<Vec<u32>>,
    /// Handshape class -> implied child-type values.
    pub handshape_map: BTreeMap<u32, HandshapeChildren>,
    /// Minor Location class -> its Major Location parent value.
    pub location_map: BTreeMap<u32, u32>,
    /// Second Minor Location class -> its Major Location parent value.
    pub second_location_map: BTreeMap<u32, u32>,
}

impl SynthesisSpec {
    /// Desk-scale reference spec: 2,750 examples, 20 glosses, 32 frames,
    /// sigma 0.01, at most 4 active classes per type.
    pub fn desk_default(seed: u64) -> Self {
        Self::build(seed, 2750, 20, 32, 0.01, 4)
    }

    /// Construct a spec with the given sizes. Active subsets are the first
    /// min(K_i, active_limit) classes of each type; maps assign child
    /// values round-robin across the active parent classes.
    pub fn build(
        seed: u64,
        examples: usize,
        gloss_count: usize,
        frames: usize,
        noise_sigma: f64,
        active_limit: u32,
    ) -> Self {
        let taxonomy = build_taxonomy();
        let active: Vec<Vec<u32>> = taxonomy
            .types()
            .iter()
            .map(|t| (1..=t.cardinality.min(active_limit.max(1))).collect())
            .collect();
        let pick = |type_pos: usize, j: usize| -> u32 {
            let set = &active[type_pos - 1];
            set[j % set.len()]
        };
        let hs_active = active[type_id::HANDSHAPE - 1].clone();
        let handshape_map = hs_active
            .iter()
            .enumerate()
            .map(|(j, &h)| {
                (
                    h,
                    HandshapeChildren {
                        spread: pick(type_id::SPREAD, j),
                        flexion: pick(type_id::FLEXION, j),
                        thumb_position: pick(type_id::THUMB_POSITION, j),
                        selected_fingers: pick(type_id::SELECTED_FINGERS, j),
                        spread_change: pick(type_id::SPREAD_CHANGE, j),
                    },
                )
            })
            .collect();
        let location_map = active[type_id::MINOR_LOCATION - 1]
            .iter()
            .enumerate()
            .map(|(j, &m)| (m, pick(type_id::MAJOR_LOCATION, j)))
            .collect();
        let second_location_map = active[type_id::SECOND_MINOR_LOCATION - 1]
            .iter()
            .enumerate()
            .map(|(j, &s)| (s, pick(type_id::MAJOR_LOCATION, j)))
            .collect();
        SynthesisSpec {
            seed,
            examples,
            gloss_count,
            frames,
            noise_sigma,
            taxonomy_hash: taxonomy.hash(),
            active_classes: active,
            handshape_map,
            location_map,
            second_location_map,
        }
    }

    /// Check internal consistency against the taxonomy: active subsets in
    /// range, maps total over the active classes, map values active, and
    /// every active Major Location reachable from both location children.
    pub fn validate(&self, taxonomy: &PhonemeTaxonomy) -> Result<()> {
        if self.gloss_count == 0 || self.frames == 0 {
            return Err(Error::Validation(
                "gloss count and frame count must be positive".into(),
            ));
        }
        if !self.noise_sigma.is_finite() || self.noise_sigma < 0.0 {
            return Err(Error::Validation(format!(
                "noise sigma {} must be a finite non-negative number",
                self.noise_sigma
            )));
        }
        if !self.taxonomy_hash.is_empty() && self.taxonomy_hash != taxonomy.hash() {
            return Err(Error::Validation(format!(
                "corpus taxonomy hash {} does not match this build's {}",
                self.taxonomy_hash,
                taxonomy.hash()
            )));
        }
        if self.active_classes.len() != TYPE_COUNT {
            return Err(Error::Validation(format!(
                "active class list has {} entries, expected {TYPE_COUNT}",
                self.active_classes.len()
            )));
        }
        for (ty, set) in taxonomy.types().iter().zip(&self.active_classes) {
            if set.is_empty() {
                return Err(Error::Validation(format!(
                    "no active classes for {}",
                    ty.name
                )));
            }
            if set.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Validation(format!(
                    "active classes for {} must be sorted and unique",
                    ty.name
                )));
            }
            if set.iter().any(|&c| c < 1 || c > ty.cardinality) {
                return Err(Error::Validation(format!(
                    "active class outside [1, {}] for {}",
                    ty.cardinality, ty.name
                )));
            }
        }
        let active = |pos: usize| &self.active_classes[pos - 1];
        let check_map_total = |name: &str, keys: Vec<u32>, expected: &[u32]| -> Result<()> {
            if keys != expected {
                return Err(Error::Validation(format!(
                    "{name} must be total over the active classes: keys {keys:?}, active {expected:?}"
                )));
            }
            Ok(())
        };
        check_map_total(
            "handshape_map",
            self.handshape_map.keys().copied().collect(),
            active(type_id::HANDSHAPE),
        )?;
        check_map_total(
            "location_map",
            self.location_map.keys().copied().collect(),
            active(type_id::MINOR_LOCATION),
        )?;
        check_map_total(
            "second_location_map",
            self.second_location_map.keys().copied().collect(),
            active(type_id::SECOND_MINOR_LOCATION),
        )?;
        for (h, children) in &self.handshape_map {
            let pairs = [
                (type_id::SPREAD, children.spread, "spread"),
                (type_id::FLEXION, children.flexion, "flexion"),
                (type_id::THUMB_POSITION, children.thumb_position, "thumb_position"),
                (type_id::SELECTED_FINGERS, children.selected_fingers, "selected_fingers"),
                (type_id::SPREAD_CHANGE, children.spread_change, "spread_change"),
            ];
            for (pos, value, field) in pairs {
                if !active(pos).contains(&value) {
                    return Err(Error::Validation(format!(
                        "handshape_map[{h}].{field} = {value} is not an active class"
                    )));
                }
            }
        }
        for (map, name) in [
            (&self.location_map, "location_map"),
            (&self.second_location_map, "second_location_map"),
        ] {
            for (&k, &v) in map {
                if !active(type_id::MAJOR_LOCATION).contains(&v) {
                    return Err(Error::Validation(format!(
                        "{name}[{k}] = {v} is not an active Major Location class"
                    )));
                }
            }
        }
        for &major in active(type_id::MAJOR_LOCATION) {
            if !self.location_map.values().any(|&v| v == major) {
                return Err(Error::Validation(format!(
                    "no Minor Location class maps to active Major Location {major}"
                )));
            }
            if !self.second_location_map.values().any(|&v| v == major) {
                return Err(Error::Validation(format!(
                    "no Second Minor Location class maps to active Major Location {major}"
                )));
            }
        }
        Ok(())
    }

    /// The per-gloss label tuples: the label vector shared by every
    /// example of each gloss. Deterministic in the spec seed.
    pub fn gloss_tuples(&self, taxonomy: &PhonemeTaxonomy) -> Result<Vec<PhonemeLabels>> {
        self.validate(taxonomy)?;
        let g = self.gloss_count;
        let mut rng = spec_rng(self.seed);
        for attempt in 0..64u32 {
            let tuples = self.sample_tuples(g, &mut rng);
            let mut seen = std::collections::BTreeSet::new();
            if tuples.iter().all(|t| seen.insert(*t)) {
                return Ok(tuples);
            }
            let _ = attempt;
        }
        Err(Error::Validation(format!(
            "could not find {g} distinct label tuples; activate more classes or reduce gloss count"
        )))
    }

    fn sample_tuples(&self, g: usize, rng: &mut ChaCha8Rng) -> Vec<PhonemeLabels> {
        // Balanced assignment: each independently chosen type cycles
        // through shuffled copies of its active set, so class counts per
        // type differ by at most one across glosses.
        let balanced = |rng: &mut ChaCha8Rng, set: &[u32]| -> Vec<u32> {
            let mut seq = Vec::with_capacity(g + set.len());
            while seq.len() < g {
                let mut block = set.to_vec();
                block.shuffle(rng);
                seq.extend(block);
            }
            seq.truncate(g);
            seq
        };
        let active = |pos: usize| &self.active_classes[pos - 1];
        let minor = balanced(rng, active(type_id::MINOR_LOCATION));
        let contact = balanced(rng, active(type_id::CONTACT));
        let thumb_contact = balanced(rng, active(type_id::THUMB_CONTACT));
        let sign_type = balanced(rng, active(type_id::SIGN_TYPE));
        let repeated = balanced(rng, active(type_id::REPEATED_MOVEMENT));
        let path = balanced(rng, active(type_id::PATH_MOVEMENT));
        let wrist = balanced(rng, active(type_id::WRIST_TWIST));
        let handshape = balanced(rng, active(type_id::HANDSHAPE));
        let nondom = balanced(rng, active(type_id::NONDOMINANT_HANDSHAPE));

        (0..g)
            .map(|i| {
                let mut labels: PhonemeLabels = [0; TYPE_COUNT];
                let major = self.location_map[&minor[i]];
                let second_candidates: Vec<u32> = self
                    .second_location_map
                    .iter()
                    .filter(|&(_, &v)| v == major)
                    .map(|(&k, _)| k)
                    .collect();
                let second = second_candidates[rng.gen_range(0..second_candidates.len())];
                let children = &self.handshape_map[&handshape[i]];
                labels[type_id::MAJOR_LOCATION - 1] = major;
                labels[type_id::MINOR_LOCATION - 1] = minor[i];
                labels[type_id::SECOND_MINOR_LOCATION - 1] = second;
                labels[type_id::CONTACT - 1] = contact[i];
                labels[type_id::THUMB_CONTACT - 1] = thumb_contact[i];
                labels[type_id::SIGN_TYPE - 1] = sign_type[i];
                labels[type_id::REPEATED_MOVEMENT - 1] = repeated[i];
                labels[type_id::PATH_MOVEMENT - 1] = path[i];
                labels[type_id::WRIST_TWIST - 1] = wrist[i];
                labels[type_id::SPREAD - 1] = children.spread;
                labels[type_id::FLEXION - 1] = children.flexion;
                labels[type_id::THUMB_POSITION - 1] = children.thumb_position;
                labels[type_id::SELECTED_FINGERS - 1] = children.selected_fingers;
                labels[type_id::SPREAD_CHANGE - 1] = children.spread_change;
                labels[type_id::NONDOMINANT_HANDSHAPE - 1] = nondom[i];
                labels[type_id::HANDSHAPE - 1] = handshape[i];
                labels
            })
            .collect()
    }
}

/// Generate the corpus described by `spec` over the default 27-joint
/// skeleton. Deterministic in the spec seed.
pub fn synthesize(spec: &SynthesisSpec, graph: &SkeletonGraph) -> Result<Vec<LabeledExample>> {
    let taxonomy = build_taxonomy();
    spec.validate(&taxonomy)?;
    if graph.joints() != JOINTS {
        return Err(Error::Validation(format!(
            "the synthesizer targets the {JOINTS}-joint preset, got {} joints",
            graph.joints()
        )));
    }
    let tuples = spec.gloss_tuples(&taxonomy)?;
    let mut examples = Vec::with_capacity(spec.examples);
    for i in 0..spec.examples {
        let gloss = (i % spec.gloss_count) as u32 + 1;
        let labels = tuples[gloss as usize - 1];
        let mut rng = example_rng(spec.seed, i);
        let pose = realize_pose(&labels, spec.frames, spec.noise_sigma, &mut rng);
        examples.push(LabeledExample {
            id: format!("ex{i:05}"),
            pose,
            gloss,
            phonemes: labels,
        });
    }
    Ok(examples)
}

// ---- geometry ----

const JOINTS: usize = 27;

// Body joint base positions (x, y) in the unit square, y down.
const NOSE: (f64, f64) = (0.50, 0.14);
const NECK: (f64, f64) = (0.50, 0.28);
const R_SHOULDER: (f64, f64) = (0.40, 0.30);
const R_ELBOW: (f64, f64) = (0.36, 0.46);
const L_SHOULDER: (f64, f64) = (0.60, 0.30);
const L_ELBOW: (f64, f64) = (0.64, 0.46);
const TORSO: (f64, f64) = (0.50, 0.55);

/// Static body-core joints used as contact anchors (elbows track the
/// wrists, so they are excluded).
const CORE: [(f64, f64); 5] = [NOSE, NECK, R_SHOULDER, L_SHOULDER, TORSO];

const REST_RIGHT: (f64, f64) = (0.40, 0.72);
const REST_LEFT: (f64, f64) = (0.60, 0.72);

/// Acting regions of the five Major Location classes.
const REGIONS: [(f64, f64); 5] = [
    (0.50, 0.13), // head
    (0.50, 0.30), // chin / neck
    (0.47, 0.47), // chest
    (0.42, 0.64), // low neutral space
    (0.22, 0.42), // side space
];

const PATH_AMPLITUDE: f64 = 0.065;
const HAND_LENGTH: f64 = 0.075;
const MIN_CLEARANCE: f64 = 0.04;

fn add(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    (a.0 + b.0, a.1 + b.1)
}

fn sub(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    (a.0 - b.0, a.1 - b.1)
}

fn scale(a: (f64, f64), s: f64) -> (f64, f64) {
    (a.0 * s, a.1 * s)
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

fn rotate(p: (f64, f64), theta: f64) -> (f64, f64) {
    let (s, c) = theta.sin_cos();
    (c * p.0 - s * p.1, s * p.0 + c * p.1)
}

fn mirror_x(p: (f64, f64)) -> (f64, f64) {
    (1.0 - p.0, p.1)
}

/// Low-discrepancy class offset: golden-angle direction, fixed radius.
/// Spreads any subset of classes as far apart as possible.
fn class_offset(class: u32, radius: f64) -> (f64, f64) {
    let phi = 0.618_033_988_749_894_9_f64;
    let angle = std::f64::consts::TAU * ((class as f64 - 1.0) * phi).fract();
    (radius * angle.cos(), radius * angle.sin())
}

/// The eight parameterized trajectories, u in [0, 1], centered at origin.
fn path_point(class: u32, u: f64) -> (f64, f64) {
    let a = PATH_AMPLITUDE;
    let tau = std::f64::consts::TAU;
    match class {
        1 => (a * (2.0 * u - 1.0), 0.3 * a * (2.0 * u - 1.0)), // line
        2 => (
            a * (std::f64::consts::PI * u).cos(),
            -0.7 * a * (std::f64::consts::PI * u).sin(),
        ), // arc
        3 => (0.75 * a * (tau * u).cos(), 0.75 * a * (tau * u).sin()), // circle
        4 => {
            // zigzag: triangle wave in y while sweeping x
            let t = (3.0 * u).fract();
            let tri = if t < 0.5 { 4.0 * t - 1.0 } else { 3.0 - 4.0 * t };
            (a * (2.0 * u - 1.0), 0.7 * a * tri)
        }
        5 => (0.85 * a * (tau * u).sin(), 0.55 * a * (2.0 * tau * u).sin()), // figure eight
        6 => {
            let r = 0.8 * a * u;
            (r * (2.0 * tau * u).cos(), r * (2.0 * tau * u).sin()) // spiral
        }
        7 => {
            // corner: down, then across
            if u <= 0.5 {
                (-0.5 * a, 0.6 * a - 2.4 * a * u)
            } else {
                (-0.5 * a + 2.4 * a * (u - 0.5), -0.6 * a)
            }
        }
        8 => (
            a * (2.0 * u - 1.0),
            0.5 * a * (3.0 * std::f64::consts::PI * u).sin(),
        ), // wave
        _ => (0.0, 0.0),
    }
}

/// Local hand-joint offsets for one handshape class: wrist at the origin,
/// then thumb tip and base/tip pairs for four fingers. Curl and splay are
/// hashed from the class index, so every class in [1, 58] realizes a
/// distinct silhouette.
fn hand_offsets(handshape: u32, thumb_contact: u32) -> [(f64, f64); 9] {
    let h = splitmix64((handshape as u64).wrapping_mul(0x9e37_79b9) ^ 0x5eed);
    let byte = |i: u32| ((h >> (8 * i)) & 0xff) as f64 / 255.0;
    let splay = 0.7 + 0.5 * byte(5);
    let finger_angles = [-36.0f64, -12.0, 12.0, 36.0];
    let dir = |deg: f64| {
        let rad = deg.to_radians() * splay;
        (rad.sin(), -rad.cos())
    };
    let mut joints = [(0.0, 0.0); 9];
    // thumb tip
    let thumb_curl = byte(0);
    joints[0] = scale(dir(-78.0 / splay), 0.055 * (1.0 - 0.5 * thumb_curl));
    for (f, &deg) in finger_angles.iter().enumerate() {
        let curl = 0.1 + 0.8 * byte(1 + f as u32);
        let d = dir(deg);
        let base = scale(d, 0.5 * HAND_LENGTH);
        let tip_len = 0.5 * HAND_LENGTH + 0.5 * HAND_LENGTH * (1.0 - 0.9 * curl);
        joints[1 + 2 * f] = base;
        joints[2 + 2 * f] = scale(d, tip_len);
    }
    match thumb_contact {
        2 => joints[0] = joints[2], // touch index tip
        3 => joints[0] = joints[4], // touch middle tip
        _ => {}
    }
    joints
}

fn realize_pose(
    labels: &PhonemeLabels,
    frames: usize,
    sigma: f64,
    rng: &mut ChaCha8Rng,
) -> PoseSequence {
    let get = |pos: usize| labels[pos - 1];
    let major = get(type_id::MAJOR_LOCATION);
    let minor = get(type_id::MINOR_LOCATION);
    let second = get(type_id::SECOND_MINOR_LOCATION);
    let contact = get(type_id::CONTACT);
    let thumb_contact = get(type_id::THUMB_CONTACT);
    let sign_type = get(type_id::SIGN_TYPE);
    let repeated = get(type_id::REPEATED_MOVEMENT);
    let path = get(type_id::PATH_MOVEMENT);
    let wrist_twist = get(type_id::WRIST_TWIST);
    let handshape = get(type_id::HANDSHAPE);
    let nondom = get(type_id::NONDOMINANT_HANDSHAPE);

    let t_count = frames;
    let center = add(REGIONS[major as usize - 1], class_offset(minor, 0.045));

    // Dominant wrist trajectory.
    let phase = |t: usize| -> f64 {
        let u = if t_count > 1 {
            t as f64 / (t_count - 1) as f64
        } else {
            0.0
        };
        let w = if repeated == 2 { 2.0 * u } else { u };
        if w > 1.0 {
            w - 1.0
        } else {
            w
        }
    };
    let mut dom: Vec<(f64, f64)> = (0..t_count)
        .map(|t| add(center, path_point(path, phase(t))))
        .collect();

    // Contact: dip to touch the body-core joint nearest the acting
    // region, or keep the whole trajectory clear of every core joint.
    let closest_core = |traj: &[(f64, f64)]| -> (usize, (f64, f64), f64) {
        let mut best = (0usize, CORE[0], f64::INFINITY);
        for (t, p) in traj.iter().enumerate() {
            for c in CORE {
                let d = dist(*p, c);
                if d < best.2 {
                    best = (t, c, d);
                }
            }
        }
        best
    };
    if contact == 2 {
        let anchor = *CORE
            .iter()
            .min_by(|a, b| dist(**a, center).total_cmp(&dist(**b, center)))
            .unwrap();
        let (t_star, d_star) = dom
            .iter()
            .enumerate()
            .map(|(t, p)| (t, dist(*p, anchor)))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .unwrap();
        let _ = d_star;
        let shift = sub(anchor, dom[t_star]);
        let w = (t_count as f64 / 10.0).max(1.0);
        for (t, p) in dom.iter_mut().enumerate() {
            let g = (-(((t as f64 - t_star as f64) / w).powi(2))).exp();
            *p = add(*p, scale(shift, g));
        }
    } else {
        let mut guard = 0;
        loop {
            let (t_min, joint, d_min) = closest_core(&dom);
            if d_min >= MIN_CLEARANCE || guard >= 8 {
                break;
            }
            let dir = if d_min > 1e-12 {
                scale(sub(dom[t_min], joint), 1.0 / d_min)
            } else {
                (0.0, 1.0)
            };
            let push = scale(dir, MIN_CLEARANCE - d_min + 1e-6);
            for p in dom.iter_mut() {
                *p = add(*p, push);
            }
            guard += 1;
        }
    }

    // Nondominant wrist trajectory by Sign Type.
    let second_off = class_offset(second, 0.022);
    let nondom_center = if sign_type == 1 {
        add(REST_LEFT, second_off)
    } else {
        add(mirror_x(center), second_off)
    };
    let nd: Vec<(f64, f64)> = (0..t_count)
        .map(|t| {
            let v = phase(t);
            match sign_type {
                1 | 4 => nondom_center,
                2 => {
                    let p = path_point(path, v);
                    add(nondom_center, (-p.0, p.1))
                }
                3 => {
                    let p = path_point(path, (v + 0.5).fract());
                    add(nondom_center, (-p.0, p.1))
                }
                5 => add(nondom_center, path_point(path, v)),
                _ => {
                    let tau = std::f64::consts::TAU;
                    add(
                        nondom_center,
                        (
                            0.5 * PATH_AMPLITUDE * (tau * v).cos(),
                            0.5 * PATH_AMPLITUDE * (tau * v).sin(),
                        ),
                    )
                }
            }
        })
        .collect();

    let dom_hand = hand_offsets(handshape, thumb_contact);
    let nd_hand = hand_offsets(nondom, 1);

    let mut pose = PoseSequence::zeros(t_count, JOINTS);
    let normal = StandardNormal;
    for t in 0..t_count {
        let u = if t_count > 1 {
            t as f64 / (t_count - 1) as f64
        } else {
            0.0
        };
        let theta = if wrist_twist == 2 {
            0.9 * (2.0 * std::f64::consts::TAU * u).sin()
        } else {
            0.0
        };
        let mut place = |index: usize, p: (f64, f64)| {
            pose.set(t, index, 0, p.0);
            pose.set(t, index, 1, p.1);
            pose.set(t, index, 2, 1.0);
        };
        place(joint::NOSE, NOSE);
        place(joint::NECK, NECK);
        place(joint::R_SHOULDER, R_SHOULDER);
        place(joint::R_ELBOW, add(R_ELBOW, scale(sub(dom[t], REST_RIGHT), 0.35)));
        place(joint::L_SHOULDER, L_SHOULDER);
        place(joint::L_ELBOW, add(L_ELBOW, scale(sub(nd[t], REST_LEFT), 0.35)));
        place(joint::TORSO, TORSO);
        place(joint::R_WRIST, dom[t]);
        for (j, off) in dom_hand.iter().enumerate() {
            place(joint::R_WRIST + 1 + j, add(dom[t], rotate(*off, theta)));
        }
        place(joint::L_WRIST, nd[t]);
        for (j, off) in nd_hand.iter().enumerate() {
            place(joint::L_WRIST + 1 + j, add(nd[t], (-off.0, off.1)));
        }
    }
    if sigma > 0.0 {
        for t in 0..t_count {
            for v in 0..JOINTS {
                for c in 0..2 {
                    let n: f64 = normal.sample(rng);
                    let i = pose.index(t, v, c);
                    pose.values[i] += sigma * n;
                }
            }
        }
    }
    pose
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_graph, UPPER_BODY_27};

    fn small_spec(seed: u64) -> SynthesisSpec {
        let mut spec = SynthesisSpec::desk_default(seed);
        spec.examples = 60;
        spec
    }

    #[test]
    fn desk_default_is_valid() {
        let tax = build_taxonomy();
        SynthesisSpec::desk_default(42).validate(&tax).unwrap();
    }

    #[test]
    fn generation_is_bitwise_deterministic() {
        let graph = build_graph(UPPER_BODY_27).unwrap();
        let a = synthesize(&small_spec(42), &graph).unwrap();
        let b = synthesize(&small_spec(42), &graph).unwrap();
        assert_eq!(a.len(), 60);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.id, y.id);
            assert_eq!(x.gloss, y.gloss);
            assert_eq!(x.phonemes, y.phonemes);
            assert_eq!(x.pose.values, y.pose.values);
        }
        let c = synthesize(&small_spec(43), &graph).unwrap();
        assert!(a.iter().zip(&c).any(|(x, y)| x.pose.values != y.pose.values));
    }

    #[test]
    fn zero_noise_is_also_deterministic() {
        let graph = build_graph(UPPER_BODY_27).unwrap();
        let mut spec = small_spec(7);
        spec.noise_sigma = 0.0;
        let a = synthesize(&spec, &graph).unwrap();
        let b = synthesize(&spec, &graph).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.pose.values, y.pose.values);
        }
    }

    #[test]
    fn every_example_passes_label_validation() {
        let tax = build_taxonomy();
        let graph = build_graph(UPPER_BODY_27).unwrap();
        let examples = synthesize(&small_spec(42), &graph).unwrap();
        for ex in &examples {
            assert_eq!(tax.validate_labels(&ex.phonemes), None, "example {}", ex.id);
            ex.pose.validate().unwrap_or_else(|e| panic!("{}: {e}", ex.id));
        }
    }

    #[test]
    fn child_labels_re_derive_from_maps() {
        let spec = small_spec(42);
        let graph = build_graph(UPPER_BODY_27).unwrap();
        let examples = synthesize(&spec, &graph).unwrap();
        let mut mismatches = 0;
        for ex in &examples {
            let hs = ex.phonemes[type_id::HANDSHAPE - 1];
            let children = &spec.handshape_map[&hs];
            let expect = [
                (type_id::SPREAD, children.spread),
                (type_id::FLEXION, children.flexion),
                (type_id::THUMB_POSITION, children.thumb_position),
                (type_id::SELECTED_FINGERS, children.selected_fingers),
                (type_id::SPREAD_CHANGE, children.spread_change),
            ];
            for (pos, v) in expect {
                if ex.phonemes[pos - 1] != v {
                    mismatches += 1;
                }
            }
            let minor = ex.phonemes[type_id::MINOR_LOCATION - 1];
            let second = ex.phonemes[type_id::SECOND_MINOR_LOCATION - 1];
            let major = ex.phonemes[type_id::MAJOR_LOCATION - 1];
            if spec.location_map[&minor] != major || spec.second_location_map[&second] != major {
                mismatches += 1;
            }
        }
        assert_eq!(mismatches, 0);
    }

    #[test]
    fn glosses_round_robin_and_tuples_distinct() {
        let spec = small_spec(42);
        let graph = build_graph(UPPER_BODY_27).unwrap();
        let examples = synthesize(&spec, &graph).unwrap();
        let mut counts = vec![0usize; spec.gloss_count];
        for (i, ex) in examples.iter().enumerate() {
            assert_eq!(ex.gloss as usize, i % spec.gloss_count + 1);
            counts[ex.gloss as usize - 1] += 1;
        }
        assert!(counts.iter().max().unwrap() - counts.iter().min().unwrap() <= 1);

        let tuples = spec.gloss_tuples(&build_taxonomy()).unwrap();
        let unique: std::collections::BTreeSet<_> = tuples.iter().collect();
        assert_eq!(unique.len(), spec.gloss_count);

        // Labels are a pure function of gloss.
        for ex in &examples {
            assert_eq!(ex.phonemes, tuples[ex.gloss as usize - 1]);
        }
    }

    #[test]
    fn contact_classes_shape_wrist_body_distance() {
        let mut spec = small_spec(42);
        spec.noise_sigma = 0.0;
        let graph = build_graph(UPPER_BODY_27).unwrap();
        let examples = synthesize(&spec, &graph).unwrap();
        for ex in examples {
            let min_d = (0..ex.pose.frames)
                .map(|t| {
                    let w = (ex.pose.get(t, joint::R_WRIST, 0), ex.pose.get(t, joint::R_WRIST, 1));
                    CORE.iter()
                        .map(move |b| dist(w, *b))
                        .fold(f64::INFINITY, f64::min)
                })
                .fold(f64::INFINITY, f64::min);
            if ex.phonemes[type_id::CONTACT - 1] == 2 {
                assert!(min_d < 1e-9, "{}: contact sign has clearance {min_d}", ex.id);
            } else {
                assert!(
                    min_d > MIN_CLEARANCE * 0.9,
                    "{}: non-contact sign touches the body ({min_d})",
                    ex.id
                );
            }
        }
    }

    #[test]
    fn inconsistent_spec_is_rejected() {
        let tax = build_taxonomy();
        let mut spec = small_spec(1);
        spec.location_map.insert(1, 5); // 5 is not an active Major Location
        assert!(matches!(spec.validate(&tax), Err(Error::Validation(_))));

        let mut spec = small_spec(1);
        spec.handshape_map.remove(&2);
        assert!(matches!(spec.validate(&tax), Err(Error::Validation(_))));

        let mut spec = small_spec(1);
        spec.active_classes[type_id::HANDSHAPE - 1] = vec![1, 99];
        assert!(matches!(spec.validate(&tax), Err(Error::Validation(_))));

        let spec = small_spec(1);
        let tiny = crate::model::SkeletonGraph::from_edges(2, &[(1, 2)]).unwrap();
        assert!(matches!(
            synthesize(&spec, &tiny),
            Err(Error::Validation(_))
        ));
    }
}
