//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use handsup::geometry::{Capsule, Torus, Vec3};
use handsup::render::{hand_primitives, Shape};
use handsup::scenegen::{animate_sequence, sample_scenario, FramePose, GenerationConfig, Scenario, HAND_BONES};

/// Distance from `p` to the rim surface, found by projecting onto the
/// center circle rather than through the closed form.
pub fn rim_distance(p: &Vec3, t: &Torus) -> f64 {
    let d = p - t.center;
    let along = d.dot(&t.axis);
    let radial = d - t.axis * along;
    let circle_point = if radial.norm() > 1e-12 {
        t.center + radial.normalize() * t.major_radius
    } else {
        // On the axis every circle point is equally close.
        let any = if t.axis.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
        t.center + (any - t.axis * any.dot(&t.axis)).normalize() * t.major_radius
    };
    (p - circle_point).norm() - t.minor_radius
}

/// Points on the surface of the capsule around `[a, b]`: rings along the
/// axis plus a hemisphere at each end.
pub fn capsule_surface(a: &Vec3, b: &Vec3, radius: f64, along: usize, around: usize) -> Vec<Vec3> {
    let axis = b - a;
    let len = axis.norm();
    let w = axis / len;
    let helper = if w.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let u = (helper - w * helper.dot(&w)).normalize();
    let v = w.cross(&u);
    let mut out = Vec::with_capacity(along * around + 2 * around * (around / 4 + 1));
    let dir = |phi: f64| u * phi.cos() + v * phi.sin();
    for i in 0..along {
        let s = i as f64 / (along - 1) as f64;
        for k in 0..around {
            let phi = std::f64::consts::TAU * k as f64 / around as f64;
            out.push(a + axis * s + dir(phi) * radius);
        }
    }
    let rings = around / 4 + 1;
    for (end, sign) in [(a, -1.0), (b, 1.0)] {
        for j in 1..=rings {
            let theta = std::f64::consts::FRAC_PI_2 * j as f64 / rings as f64;
            for k in 0..around {
                let phi = std::f64::consts::TAU * k as f64 / around as f64;
                out.push(end + (dir(phi) * theta.cos() + w * (sign * theta.sin())) * radius);
            }
        }
    }
    out
}

/// Smallest rim distance over sampled surface points of `capsules`.
/// Capsules that provably stay at or beyond `cutoff` are skipped, so the
/// result is exact only below `cutoff` (above it, the returned value is
/// just some bound `>= cutoff`).
pub fn capsules_surface_distance(capsules: &[Capsule], t: &Torus, cutoff: f64, along: usize, around: usize) -> f64 {
    let mut best = f64::INFINITY;
    for c in capsules {
        let len = (c.b - c.a).norm();
        // Rim distance is 1-Lipschitz, so every surface point is at least this far.
        let lower = rim_distance(&c.a, t).min(rim_distance(&c.b, t)) - len / 2.0 - c.radius;
        if lower >= best {
            continue;
        }
        if lower >= cutoff {
            best = lower;
            continue;
        }
        for p in capsule_surface(&c.a, &c.b, c.radius, along, around) {
            best = best.min(rim_distance(&p, t));
        }
    }
    best
}

/// [`capsules_surface_distance`] for a hand modeled as capsules of one
/// `radius` around its bones.
pub fn hand_surface_distance(hand: &[Vec3; 21], t: &Torus, radius: f64, cutoff: f64, along: usize, around: usize) -> f64 {
    let caps: Vec<Capsule> = HAND_BONES.iter().map(|&(i, j)| Capsule { a: hand[i], b: hand[j], radius }).collect();
    capsules_surface_distance(&caps, t, cutoff, along, around)
}

/// The palm and finger capsules the renderer draws for `hand`.
pub fn rendered_hand_capsules(sc: &Scenario, hand: &[Vec3; 21]) -> Vec<Capsule> {
    hand_primitives(sc, hand)
        .into_iter()
        .filter_map(|p| match p.shape {
            Shape::Capsule(c) => Some(c),
            _ => None,
        })
        .collect()
}

/// `(scenario, pose)` for every frame of every sequence in `cfg`.
pub fn frames(cfg: &GenerationConfig) -> Vec<(Scenario, FramePose)> {
    (0..cfg.num_sequences)
        .flat_map(|i| {
            let sc = sample_scenario(cfg, i).unwrap();
            animate_sequence(&sc, cfg).into_iter().map(move |p| (sc.clone(), p))
        })
        .collect()
}

/// Area under the ROC curve by comparing every positive with every
/// negative, as an exact fraction `(2 * wins + ties, 2 * P * N)`.
pub fn brute_auc(scores: &[f64], labels: &[bool]) -> Option<(u64, u64)> {
    let (mut twice, mut pos, mut neg) = (0u64, 0u64, 0u64);
    for (i, &li) in labels.iter().enumerate() {
        if li {
            pos += 1;
        } else {
            neg += 1;
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj {
                continue;
            }
            twice += match scores[i].partial_cmp(&scores[j]).unwrap() {
                std::cmp::Ordering::Greater => 2,
                std::cmp::Ordering::Equal => 1,
                std::cmp::Ordering::Less => 0,
            };
        }
    }
    (pos > 0 && neg > 0).then_some((twice, 2 * pos * neg))
}
