//! Named modulation schemes: a space-time code plus the joint constellations
//! of its decoding groups.

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::codebook::{assemble, coding_gain_fast_ostbc, coding_gain_fast_qo, Codebook, DecodingGroup};
use crate::constellation::{builtin_sphere, load_sphere, psk, qo_pairwise, sphere_to_joint, theorem1_theta, SphericalCode};
use crate::error::{DstmError, Result};
use crate::scalar::Real;
use crate::stbc::StbcKind;

/// Rotation of the pairwise set: a number in radians or `"theorem1"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ThetaSpec {
    Radians(f64),
    Named(String),
}

impl ThetaSpec {
    pub fn resolve(&self, m: usize) -> Result<f64> {
        match self {
            ThetaSpec::Radians(v) if v.is_finite() => Ok(*v),
            ThetaSpec::Radians(v) => Err(DstmError::InvalidParameter(format!("rotation {v} is not finite"))),
            ThetaSpec::Named(s) if s == "theorem1" => Ok(theorem1_theta(m)),
            ThetaSpec::Named(s) => s
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| DstmError::InvalidParameter(format!("rotation `{s}`: expected radians or `theorem1`"))),
        }
    }
}

impl std::str::FromStr for ThetaSpec {
    type Err = DstmError;

    fn from_str(s: &str) -> Result<Self> {
        let spec = match s.parse::<f64>() {
            Ok(v) => ThetaSpec::Radians(v),
            Err(_) => ThetaSpec::Named(s.to_owned()),
        };
        spec.resolve(2)?;
        Ok(spec)
    }
}

/// User-facing description of a scheme, as found in config files and flags.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SchemeSpec {
    pub scheme: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<ThetaSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sphere: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psk: Option<usize>,
}

/// Where a spherical code comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum SphereSource {
    Builtin(usize, usize),
    File(PathBuf),
}

impl SphereSource {
    pub fn parse(s: &str) -> Result<Self> {
        match s.strip_prefix("builtin:") {
            Some(rest) => {
                let (d, n) = rest
                    .split_once('x')
                    .and_then(|(d, n)| Some((d.parse().ok()?, n.parse().ok()?)))
                    .ok_or_else(|| DstmError::InvalidParameter(format!("sphere `{s}`: expected builtin:<d>x<n>")))?;
                Ok(SphereSource::Builtin(d, n))
            }
            None => Ok(SphereSource::File(PathBuf::from(s))),
        }
    }

    pub fn load(&self) -> Result<SphericalCode> {
        match self {
            SphereSource::Builtin(d, n) => builtin_sphere(*d, *n),
            SphereSource::File(p) => load_sphere(p),
        }
    }

    fn tag(&self) -> String {
        match self {
            SphereSource::Builtin(d, n) => format!("{d}x{n}"),
            SphereSource::File(p) => p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "file".to_owned()),
        }
    }
}

/// A fully resolved scheme.
#[derive(Clone, Debug, PartialEq)]
pub enum Scheme {
    /// Rate-3/4 orthogonal code, two groups of three real slots on a 3-D spherical code.
    O4Sphere { source: SphereSource, code: SphericalCode },
    /// Four-antenna quasi-orthogonal code with the rotated pairwise set.
    Qo4 { m: usize, theta: f64 },
    /// Rate-3/4 orthogonal code, one PSK symbol per complex slot.
    O4Psk { n: usize },
    /// Rate-1/2 square orthogonal code, one PSK symbol per complex slot.
    O4HalfPsk { n: usize },
    /// Eight-antenna orthogonal code, two groups of four real slots on a 4-D spherical code.
    O8Sphere { source: SphereSource, code: SphericalCode },
    /// Eight-antenna quasi-orthogonal code, three pairwise groups.
    Qo8 { m: usize, theta: f64 },
    /// Eight-antenna orthogonal code, one PSK symbol per complex slot.
    O8Psk { n: usize },
}

pub const SCHEME_NAMES: [&str; 7] = ["o4", "qo4", "o4-psk", "o4-half-psk", "o8", "qo8", "o8-psk"];

impl Scheme {
    pub fn from_spec(spec: &SchemeSpec) -> Result<Self> {
        let name = spec.scheme.as_str();
        if !SCHEME_NAMES.contains(&name) {
            return Err(DstmError::UnknownScheme(format!(
                "`{name}` (expected one of {})",
                SCHEME_NAMES.join(", ")
            )));
        }
        let is_qo = matches!(name, "qo4" | "qo8");
        let is_sphere = matches!(name, "o4" | "o8");
        let is_psk = name.ends_with("-psk");
        let reject = |field: &str| DstmError::InvalidParameter(format!("`{field}` does not apply to scheme {name}"));
        if !is_qo && spec.m.is_some() {
            return Err(reject("m"));
        }
        if !is_qo && spec.theta.is_some() {
            return Err(reject("theta"));
        }
        if !is_sphere && spec.sphere.is_some() {
            return Err(reject("sphere"));
        }
        if !is_psk && spec.psk.is_some() {
            return Err(reject("psk"));
        }

        let sphere = |d: usize, default: &str| -> Result<(SphereSource, SphericalCode)> {
            let source = SphereSource::parse(spec.sphere.as_deref().unwrap_or(default))?;
            let code = source.load()?;
            if code.dim() != d {
                return Err(DstmError::InvalidParameter(format!(
                    "scheme {name} needs a {d}-dimensional spherical code, got dimension {}",
                    code.dim()
                )));
            }
            Ok((source, code))
        };
        let qo = |n_groups: usize| -> Result<(usize, f64)> {
            let m = spec.m.unwrap_or(8);
            let theta = spec.theta.clone().unwrap_or(ThetaSpec::Named("theorem1".into())).resolve(m)?;
            qo_pairwise::<f64>(m, theta, n_groups)?;
            Ok((m, theta))
        };
        let psk_order = |default: usize| -> Result<usize> {
            let n = spec.psk.unwrap_or(default);
            if n < 2 || !n.is_power_of_two() {
                return Err(DstmError::NotPowerOfTwo(n));
            }
            Ok(n)
        };

        Ok(match name {
            "o4" => {
                let (source, code) = sphere(3, "builtin:3x16")?;
                Scheme::O4Sphere { source, code }
            }
            "qo4" => {
                let (m, theta) = qo(2)?;
                Scheme::Qo4 { m, theta }
            }
            "o4-psk" => Scheme::O4Psk { n: psk_order(4)? },
            "o4-half-psk" => Scheme::O4HalfPsk { n: psk_order(16)? },
            "o8" => {
                let (source, code) = sphere(4, "builtin:4x64")?;
                Scheme::O8Sphere { source, code }
            }
            "qo8" => {
                let (m, theta) = qo(3)?;
                Scheme::Qo8 { m, theta }
            }
            "o8-psk" => Scheme::O8Psk { n: psk_order(8)? },
            _ => unreachable!(),
        })
    }

    /// Parses a spec given only by name, with default parameters.
    pub fn named(name: &str) -> Result<Self> {
        Self::from_spec(&SchemeSpec {
            scheme: name.to_owned(),
            ..Default::default()
        })
    }

    pub fn kind(&self) -> StbcKind {
        match self {
            Scheme::O4Sphere { .. } | Scheme::O4Psk { .. } => StbcKind::Ostbc4,
            Scheme::Qo4 { .. } => StbcKind::Qostbc4,
            Scheme::O4HalfPsk { .. } => StbcKind::HalfRate4,
            Scheme::O8Sphere { .. } | Scheme::O8Psk { .. } => StbcKind::Ostbc8,
            Scheme::Qo8 { .. } => StbcKind::Qostbc8,
        }
    }

    pub fn n_tx(&self) -> usize {
        self.kind().n_tx()
    }

    /// Slot lists of the decoding groups, `2k` and `2k+1` being the real and
    /// imaginary parts of symbol `k`.
    pub fn group_slots(&self) -> Vec<Vec<usize>> {
        match self {
            Scheme::O4Sphere { .. } => vec![vec![0, 1, 2], vec![3, 4, 5]],
            Scheme::O8Sphere { .. } => vec![vec![0, 1, 2, 3], vec![4, 5, 6, 7]],
            Scheme::Qo4 { .. } => vec![vec![0, 1, 6, 7], vec![2, 3, 4, 5]],
            Scheme::Qo8 { .. } => vec![vec![0, 1, 6, 7], vec![2, 3, 8, 9], vec![4, 5, 10, 11]],
            Scheme::O4Psk { .. } | Scheme::O4HalfPsk { .. } | Scheme::O8Psk { .. } => {
                (0..self.kind().n_sym()).map(|k| vec![2 * k, 2 * k + 1]).collect()
            }
        }
    }

    pub fn decoder_count(&self) -> usize {
        self.group_slots().len()
    }

    /// Points in each group's constellation.
    pub fn search_space(&self) -> usize {
        match self {
            Scheme::O4Sphere { code, .. } | Scheme::O8Sphere { code, .. } => code.len(),
            Scheme::Qo4 { m, .. } | Scheme::Qo8 { m, .. } => 2 * m,
            Scheme::O4Psk { n } | Scheme::O4HalfPsk { n } | Scheme::O8Psk { n } => *n,
        }
    }

    pub fn codebook_size(&self) -> usize {
        self.search_space().pow(self.decoder_count() as u32)
    }

    pub fn spectral_efficiency(&self) -> f64 {
        (self.codebook_size() as f64).log2() / self.n_tx() as f64
    }

    fn group_power(&self) -> f64 {
        1.0 / self.decoder_count() as f64
    }

    pub fn build<T: Real>(&self) -> Result<Codebook<T>> {
        let power = T::lit(self.group_power());
        let set = match self {
            Scheme::O4Sphere { code, .. } | Scheme::O8Sphere { code, .. } => sphere_to_joint(code, power)?,
            Scheme::Qo4 { m, theta } | Scheme::Qo8 { m, theta } => {
                qo_pairwise::<T>(*m, T::lit(*theta), self.decoder_count())?.to_joint()?
            }
            Scheme::O4Psk { n } | Scheme::O4HalfPsk { n } | Scheme::O8Psk { n } => psk(*n, power)?,
        };
        let groups = self
            .group_slots()
            .into_iter()
            .map(|slots| DecodingGroup::new(slots, set.clone()))
            .collect::<Result<Vec<_>>>()?;
        assemble(self.kind().dispersion()?, groups)
    }

    /// Coding gain from the closed forms, without enumerating codeword pairs.
    pub fn fast_coding_gain(&self) -> Result<f64> {
        let power = self.group_power();
        let n_tx = self.n_tx();
        Ok(match self {
            Scheme::O4Sphere { code, .. } | Scheme::O8Sphere { code, .. } => {
                coding_gain_fast_ostbc(&sphere_to_joint(code, power)?, n_tx)
            }
            Scheme::Qo4 { m, theta } | Scheme::Qo8 { m, theta } => {
                coding_gain_fast_qo(&qo_pairwise(*m, *theta, self.decoder_count())?, n_tx)
            }
            Scheme::O4Psk { n } | Scheme::O4HalfPsk { n } | Scheme::O8Psk { n } => {
                coding_gain_fast_ostbc(&psk(*n, power)?, n_tx)
            }
        })
    }

    /// Short ASCII identifier, used in CSV rows and file names.
    pub fn label(&self) -> String {
        match self {
            Scheme::O4Sphere { source, .. } => format!("o4-sphere{}", source.tag()),
            Scheme::O8Sphere { source, .. } => format!("o8-sphere{}", source.tag()),
            Scheme::Qo4 { m, theta } => qo_label("qo4", *m, *theta),
            Scheme::Qo8 { m, theta } => qo_label("qo8", *m, *theta),
            Scheme::O4Psk { n } => format!("o4-psk{n}"),
            Scheme::O4HalfPsk { n } => format!("o4-half-psk{n}"),
            Scheme::O8Psk { n } => format!("o8-psk{n}"),
        }
    }

    /// Every codebook the tool ships defaults for.
    pub fn shipped() -> Vec<Scheme> {
        let spec = |scheme: &str, m: Option<usize>, sphere: Option<&str>, psk: Option<usize>| SchemeSpec {
            scheme: scheme.into(),
            m,
            theta: None,
            sphere: sphere.map(Into::into),
            psk,
        };
        [
            spec("qo4", Some(4), None, None),
            spec("qo4", Some(8), None, None),
            spec("o4", None, Some("builtin:3x16"), None),
            spec("o4", None, Some("builtin:3x8"), None),
            spec("o4-psk", None, None, Some(4)),
            spec("o4-half-psk", None, None, Some(16)),
            spec("qo8", Some(8), None, None),
            spec("o8", None, Some("builtin:4x64"), None),
            spec("o8-psk", None, None, Some(8)),
        ]
        .iter()
        .map(|s| Scheme::from_spec(s).expect("shipped schemes are valid"))
        .collect()
    }
}

fn qo_label(base: &str, m: usize, theta: f64) -> String {
    if theta == theorem1_theta::<f64>(m) {
        format!("{base}-m{m}")
    } else {
        format!("{base}-m{m}-t{theta}")
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}
