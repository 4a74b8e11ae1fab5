//! Generation config and its plain-text key/value file format.
//!
//! ```text
//! # handsup generation config
//! sequence_prefix = syn
//! num_sequences = 60
//! seed = 7
//! sequence_seconds = 2
//! fps = 15
//! image_size = 64
//! cross_reach_rate = 0
//! behavior.two_handed = 0.45
//! lighting.daylight = 0.5
//! vehicles = suv_large,suv_medium,sedan
//! drivers = drv00,drv01
//! profile.name = synthetic
//! profile.blur_sigma = 0
//! profile.noise_std = 0
//! profile.color_gain = 1,1,1
//! profile.vignette_strength = 0
//! profile.motion_blur_frames = 0
//! targeted = both_hands_off*3,one_handed_right+cross*1
//! ```
//!
//! Keys may appear in any order; the canonical form written by
//! [`GenerationConfig::to_text`] is what gets hashed.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::render::{DomainKind, DomainProfile};

macro_rules! named_enum {
    ($(#[$m:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum $name { $($variant),+ }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = String;
            fn from_str(s: &str) -> std::result::Result<Self, String> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(format!("unknown {} `{}`", stringify!($name).to_lowercase(), other)),
                }
            }
        }

        impl serde::Serialize for $name {
            fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                s.serialize_str(self.as_str())
            }
        }

        impl<'de> serde::Deserialize<'de> for $name {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}
pub(crate) use named_enum;

named_enum!(
    Behavior {
        TwoHanded => "two_handed",
        OneHandedLeft => "one_handed_left",
        OneHandedRight => "one_handed_right",
        Texting => "texting",
        TurningAround => "turning_around",
        FallingAsleep => "falling_asleep",
        BothHandsOff => "both_hands_off",
    }
);

named_enum!(
    Lighting {
        Daylight => "daylight",
        Evening => "evening",
        Night => "night",
    }
);

/// A sequence whose behavior is forced instead of sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TargetedSequence {
    pub behavior: Behavior,
    pub cross_reach: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationConfig {
    /// Prefix of generated sequence ids, e.g. `syn` gives `syn0007`.
    pub sequence_prefix: String,
    /// Total sequence count, including the targeted tail.
    pub num_sequences: usize,
    pub behavior_weights: BTreeMap<Behavior, f64>,
    pub lighting_weights: BTreeMap<Lighting, f64>,
    pub vehicle_set: Vec<String>,
    pub driver_set: Vec<String>,
    pub sequence_seconds: u32,
    pub fps: u32,
    pub seed: u64,
    pub image_size: u32,
    /// Probability that a sampled one-handed-right sequence grips the
    /// opposite side of the rim.
    pub cross_reach_rate: f64,
    pub profile: DomainProfile,
    /// Forced behaviors for the last `targeted.len()` sequence indices.
    pub targeted: Vec<TargetedSequence>,
}

fn weights<K: Ord + Copy>(pairs: &[(K, f64)]) -> BTreeMap<K, f64> {
    pairs.iter().copied().collect()
}

impl GenerationConfig {
    /// Source-domain pool at desk scale: ten built-in drivers, three vehicles.
    pub fn desk_synthetic() -> Self {
        use Behavior::*;
        Self {
            sequence_prefix: "syn".into(),
            num_sequences: 60,
            behavior_weights: weights(&[
                (TwoHanded, 0.36),
                (OneHandedLeft, 0.12),
                (OneHandedRight, 0.22),
                (Texting, 0.1),
                (TurningAround, 0.08),
                (FallingAsleep, 0.12),
            ]),
            lighting_weights: weights(&[
                (Lighting::Daylight, 0.5),
                (Lighting::Evening, 0.3),
                (Lighting::Night, 0.2),
            ]),
            vehicle_set: vec!["suv_large".into(), "suv_medium".into(), "sedan".into()],
            driver_set: (0..10).map(|i| format!("drv{i:02}")).collect(),
            sequence_seconds: 2,
            fps: 15,
            seed: 7,
            image_size: 64,
            cross_reach_rate: 0.0,
            profile: DomainProfile::synthetic(),
            targeted: Vec::new(),
        }
    }

    /// Target-domain stand-in: disjoint drivers and vehicles, shifted profile.
    pub fn desk_pseudo_real() -> Self {
        use Behavior::*;
        Self {
            sequence_prefix: "real".into(),
            num_sequences: 96,
            behavior_weights: weights(&[
                (TwoHanded, 0.3),
                (OneHandedLeft, 0.22),
                (OneHandedRight, 0.2),
                (Texting, 0.1),
                (TurningAround, 0.06),
                (FallingAsleep, 0.06),
                (BothHandsOff, 0.06),
            ]),
            lighting_weights: weights(&[
                (Lighting::Daylight, 0.5),
                (Lighting::Evening, 0.3),
                (Lighting::Night, 0.2),
            ]),
            vehicle_set: vec!["minivan".into(), "hatchback".into(), "pickup".into()],
            driver_set: (0..24).map(|i| format!("real{i:02}")).collect(),
            sequence_seconds: 2,
            fps: 15,
            seed: 1001,
            image_size: 64,
            cross_reach_rate: 0.1,
            profile: DomainProfile::pseudo_real(),
            targeted: Vec::new(),
        }
    }

    /// Full-size settings: 10 s sequences, 256 px frames, 146 sequences.
    pub fn paper_scale(mut self) -> Self {
        self.sequence_seconds = 10;
        self.image_size = 256;
        if self.profile.kind == DomainKind::Synthetic {
            self.num_sequences = 146;
        }
        self
    }

    pub fn frames_per_sequence(&self) -> usize {
        (self.sequence_seconds * self.fps) as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.num_sequences == 0 {
            return bad("num_sequences must be >= 1".into());
        }
        if self.targeted.len() > self.num_sequences {
            return bad("more targeted sequences than num_sequences".into());
        }
        if self.sequence_seconds == 0 || self.fps == 0 {
            return bad("sequence_seconds and fps must be >= 1".into());
        }
        if self.image_size < 16 {
            return bad("image_size must be >= 16".into());
        }
        if !(0.0..=1.0).contains(&self.cross_reach_rate) {
            return bad("cross_reach_rate must be in [0, 1]".into());
        }
        check_simplex("behavior", self.behavior_weights.values())?;
        check_simplex("lighting", self.lighting_weights.values())?;
        self.profile.validate()?;
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("# handsup generation config\n");
        let mut kv = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        kv("sequence_prefix", self.sequence_prefix.clone());
        kv("num_sequences", self.num_sequences.to_string());
        kv("seed", self.seed.to_string());
        kv("sequence_seconds", self.sequence_seconds.to_string());
        kv("fps", self.fps.to_string());
        kv("image_size", self.image_size.to_string());
        kv("cross_reach_rate", self.cross_reach_rate.to_string());
        for (b, w) in &self.behavior_weights {
            kv(&format!("behavior.{b}"), w.to_string());
        }
        for (l, w) in &self.lighting_weights {
            kv(&format!("lighting.{l}"), w.to_string());
        }
        kv("vehicles", self.vehicle_set.join(","));
        kv("drivers", self.driver_set.join(","));
        let p = &self.profile;
        kv("profile.name", p.kind.to_string());
        kv("profile.blur_sigma", p.blur_sigma.to_string());
        kv("profile.noise_std", p.noise_std.to_string());
        kv(
            "profile.color_gain",
            p.color_gain.iter().map(|g| g.to_string()).collect::<Vec<_>>().join(","),
        );
        kv("profile.vignette_strength", p.vignette_strength.to_string());
        kv("profile.motion_blur_frames", p.motion_blur_frames.to_string());
        kv("targeted", encode_targeted(&self.targeted));
        s
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut cfg = Self::desk_synthetic();
        cfg.behavior_weights.clear();
        cfg.lighting_weights.clear();
        cfg.targeted.clear();
        cfg.cross_reach_rate = 0.0;
        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |m: String| Error::parse(origin, line_no, m);
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| err("expected `key = value`".into()))?;
            let num = |v: &str| v.parse::<f64>().map_err(|e| err(format!("{key}: {e}")));
            let int = |v: &str| v.parse::<u64>().map_err(|e| err(format!("{key}: {e}")));
            let list = |v: &str| -> Vec<String> {
                v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
            };
            match key {
                "sequence_prefix" => cfg.sequence_prefix = value.to_string(),
                "num_sequences" => cfg.num_sequences = int(value)? as usize,
                "seed" => cfg.seed = int(value)?,
                "sequence_seconds" => cfg.sequence_seconds = int(value)? as u32,
                "fps" => cfg.fps = int(value)? as u32,
                "image_size" => cfg.image_size = int(value)? as u32,
                "cross_reach_rate" => cfg.cross_reach_rate = num(value)?,
                "vehicles" => cfg.vehicle_set = list(value),
                "drivers" => cfg.driver_set = list(value),
                "profile.name" => cfg.profile.kind = value.parse().map_err(err)?,
                "profile.blur_sigma" => cfg.profile.blur_sigma = num(value)?,
                "profile.noise_std" => cfg.profile.noise_std = num(value)?,
                "profile.color_gain" => {
                    let g: Vec<f64> = list(value).iter().map(|v| num(v)).collect::<Result<_>>()?;
                    if g.len() != 3 {
                        return Err(err("profile.color_gain needs 3 values".into()));
                    }
                    cfg.profile.color_gain = [g[0], g[1], g[2]];
                }
                "profile.vignette_strength" => cfg.profile.vignette_strength = num(value)?,
                "profile.motion_blur_frames" => cfg.profile.motion_blur_frames = int(value)? as u32,
                "targeted" => cfg.targeted = decode_targeted(value).map_err(err)?,
                k => {
                    if let Some(b) = k.strip_prefix("behavior.") {
                        cfg.behavior_weights.insert(b.parse().map_err(err)?, num(value)?);
                    } else if let Some(l) = k.strip_prefix("lighting.") {
                        cfg.lighting_weights.insert(l.parse().map_err(err)?, num(value)?);
                    } else {
                        return Err(err(format!("unknown key `{k}`")));
                    }
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    /// Provenance hash: first 16 hex digits of SHA-256 over the canonical text.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn sequence_id(&self, index: usize) -> String {
        format!("{}{index:04}", self.sequence_prefix)
    }

    /// Forced behavior for `index`, if it falls in the targeted tail.
    pub fn targeted_at(&self, index: usize) -> Option<TargetedSequence> {
        let start = self.num_sequences - self.targeted.len();
        index.checked_sub(start).and_then(|i| self.targeted.get(i)).copied()
    }
}

fn check_simplex<'a>(axis: &str, w: impl Iterator<Item = &'a f64>) -> Result<()> {
    let mut sum = 0.0;
    for &x in w {
        if !(x >= 0.0 && x.is_finite()) {
            return Err(Error::InvalidConfig(format!("{axis} weight {x} is not a probability")));
        }
        sum += x;
    }
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!("{axis} weights sum to {sum}, not 1")));
    }
    Ok(())
}

fn encode_targeted(t: &[TargetedSequence]) -> String {
    let mut runs: Vec<(TargetedSequence, usize)> = Vec::new();
    for &s in t {
        match runs.last_mut() {
            Some((last, n)) if *last == s => *n += 1,
            _ => runs.push((s, 1)),
        }
    }
    runs.iter()
        .map(|(s, n)| format!("{}{}*{n}", s.behavior, if s.cross_reach { "+cross" } else { "" }))
        .collect::<Vec<_>>()
        .join(",")
}

fn decode_targeted(v: &str) -> std::result::Result<Vec<TargetedSequence>, String> {
    let mut out = Vec::new();
    for item in v.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (name, count) = item.split_once('*').ok_or_else(|| format!("targeted entry `{item}` lacks `*count`"))?;
        let count: usize = count.parse().map_err(|e| format!("targeted count: {e}"))?;
        let (name, cross_reach) = match name.strip_suffix("+cross") {
            Some(n) => (n, true),
            None => (name, false),
        };
        let behavior = name.parse()?;
        out.extend(std::iter::repeat_n(TargetedSequence { behavior, cross_reach }, count));
    }
    Ok(out)
}
