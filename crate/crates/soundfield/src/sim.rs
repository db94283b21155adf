//! Ground-truth generation: free-field Green's functions, an image-source
//! shoebox simulator, microphone array layouts and measurement noise.
//!
//! Everything is single-frequency. The time convention is e^{−jωt}, so
//! e^{+jkd} is an outgoing wave.

use crate::error::{Error, Result};
use crate::specfun::fibonacci_directions;
use crate::Point3;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::Path;

/// Rectangular room with a uniform real wall reflection magnitude.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoomSpec {
    /// Interior size along x, y, z in metres.
    pub dimensions: [f64; 3],
    /// Wall reflection magnitude, identical for all six walls, in [0, 1).
    pub reflection: f64,
    /// Speed of sound in metres per second.
    pub sound_speed: f64,
}

impl RoomSpec {
    pub fn new(dimensions: [f64; 3], reflection: f64, sound_speed: f64) -> Result<Self> {
        let room = RoomSpec {
            dimensions,
            reflection,
            sound_speed,
        };
        room.validate()?;
        Ok(room)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.dimensions.iter().all(|&d| d.is_finite() && d > 0.0) {
            return Err(Error::domain("room dimensions must be positive"));
        }
        if !(0.0..1.0).contains(&self.reflection) {
            return Err(Error::domain(format!(
                "wall reflection must lie in [0, 1), got {}",
                self.reflection
            )));
        }
        if !(self.sound_speed.is_finite() && self.sound_speed > 0.0) {
            return Err(Error::domain("sound speed must be positive"));
        }
        Ok(())
    }

    pub fn volume(&self) -> f64 {
        self.dimensions.iter().product()
    }

    pub fn surface_area(&self) -> f64 {
        let [lx, ly, lz] = self.dimensions;
        2.0 * (lx * ly + ly * lz + lz * lx)
    }

    fn contains_strictly(&self, p: &Point3) -> bool {
        (0..3).all(|a| p[a] > 0.0 && p[a] < self.dimensions[a])
    }
}

/// Source-free region the estimators reconstruct over.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum RegionSpec {
    Ball { center: [f64; 3], radius: f64 },
    Box { center: [f64; 3], half_extents: [f64; 3] },
}

impl RegionSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            RegionSpec::Ball { radius, center } => {
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::domain("region radius must be positive"));
                }
                if !center.iter().all(|c| c.is_finite()) {
                    return Err(Error::domain("region center must be finite"));
                }
            }
            RegionSpec::Box {
                half_extents,
                center,
            } => {
                if !half_extents.iter().all(|&h| h.is_finite() && h > 0.0) {
                    return Err(Error::domain("region half extents must be positive"));
                }
                if !center.iter().all(|c| c.is_finite()) {
                    return Err(Error::domain("region center must be finite"));
                }
            }
        }
        Ok(())
    }

    pub fn center(&self) -> Point3 {
        match self {
            RegionSpec::Ball { center, .. } | RegionSpec::Box { center, .. } => {
                Point3::new(center[0], center[1], center[2])
            }
        }
    }

    /// Radius of the smallest origin-centred ball containing the region,
    /// measured from the region center. Truncation rules key off this.
    pub fn circumscribing_radius(&self) -> f64 {
        match self {
            RegionSpec::Ball { radius, .. } => *radius,
            RegionSpec::Box { half_extents, .. } => {
                let he = half_extents;
                (he[0] * he[0] + he[1] * he[1] + he[2] * he[2]).sqrt()
            }
        }
    }

    pub fn contains(&self, p: &Point3) -> bool {
        match self {
            RegionSpec::Ball { radius, .. } => (p - self.center()).norm() <= *radius,
            RegionSpec::Box { half_extents, .. } => {
                let d = p - self.center();
                (0..3).all(|a| d[a].abs() <= half_extents[a])
            }
        }
    }

    /// Uniform sample from the region interior.
    pub fn sample_interior<R: Rng>(&self, rng: &mut R) -> Point3 {
        match self {
            RegionSpec::Ball { radius, .. } => loop {
                let c: [f64; 3] = [
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                ];
                let v = Point3::new(c[0], c[1], c[2]);
                if v.norm() <= 1.0 {
                    return self.center() + v * *radius;
                }
            },
            RegionSpec::Box { half_extents, .. } => {
                let c = self.center();
                Point3::new(
                    c[0] + rng.random_range(-half_extents[0]..half_extents[0]),
                    c[1] + rng.random_range(-half_extents[1]..half_extents[1]),
                    c[2] + rng.random_range(-half_extents[2]..half_extents[2]),
                )
            }
        }
    }
}

/// Pressure measurements at scattered positions, all at one wavenumber.
#[derive(Clone, Debug)]
pub struct ObservationSet {
    wavenumber: f64,
    positions: Vec<Point3>,
    pressures: Vec<Complex64>,
}

impl ObservationSet {
    pub fn new(wavenumber: f64, positions: Vec<Point3>, pressures: Vec<Complex64>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::domain("observation set needs at least one microphone"));
        }
        if positions.len() != pressures.len() {
            return Err(Error::domain(format!(
                "{} positions but {} pressures",
                positions.len(),
                pressures.len()
            )));
        }
        if !(wavenumber.is_finite() && wavenumber > 0.0) {
            return Err(Error::domain("wavenumber must be positive"));
        }
        if let Some((i, j)) = find_coincident_pair(&positions) {
            return Err(Error::DegenerateInput(format!(
                "microphones {i} and {j} coincide"
            )));
        }
        Ok(ObservationSet {
            wavenumber,
            positions,
            pressures,
        })
    }

    pub fn wavenumber(&self) -> f64 {
        self.wavenumber
    }

    pub fn positions(&self) -> &[Point3] {
        &self.positions
    }

    pub fn pressures(&self) -> &[Complex64] {
        &self.pressures
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = ObservationFile::from(self);
        let text = serde_json::to_string_pretty(&file).map_err(|e| Error::Config {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: ObservationFile = serde_json::from_str(&text).map_err(|e| Error::Config {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        file.try_into()
    }
}

/// On-disk form of an observation set: positions as [x, y, z] triples and
/// pressures as [re, im] pairs.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObservationFile {
    wavenumber: f64,
    positions: Vec<[f64; 3]>,
    pressures: Vec<[f64; 2]>,
}

impl From<&ObservationSet> for ObservationFile {
    fn from(obs: &ObservationSet) -> Self {
        ObservationFile {
            wavenumber: obs.wavenumber,
            positions: obs.positions.iter().map(|p| [p.x, p.y, p.z]).collect(),
            pressures: obs.pressures.iter().map(|p| [p.re, p.im]).collect(),
        }
    }
}

impl TryFrom<ObservationFile> for ObservationSet {
    type Error = Error;

    fn try_from(file: ObservationFile) -> Result<Self> {
        ObservationSet::new(
            file.wavenumber,
            file.positions
                .iter()
                .map(|p| Point3::new(p[0], p[1], p[2]))
                .collect(),
            file.pressures
                .iter()
                .map(|p| Complex64::new(p[0], p[1]))
                .collect(),
        )
    }
}

/// Finds two positions closer than 1e-9 m, if any, via a hash grid so
/// large sets stay linear.
fn find_coincident_pair(positions: &[Point3]) -> Option<(usize, usize)> {
    const CELL: f64 = 1e-9;
    let key = |p: &Point3| {
        (
            (p.x / CELL).floor() as i64,
            (p.y / CELL).floor() as i64,
            (p.z / CELL).floor() as i64,
        )
    };
    let mut grid: std::collections::HashMap<(i64, i64, i64), Vec<usize>> =
        std::collections::HashMap::with_capacity(positions.len());
    for (j, p) in positions.iter().enumerate() {
        let (cx, cy, cz) = key(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(cell) = grid.get(&(cx + dx, cy + dy, cz + dz)) {
                        for &i in cell {
                            if (positions[i] - p).norm() <= 1e-9 {
                                return Some((i, j));
                            }
                        }
                    }
                }
            }
        }
        grid.entry((cx, cy, cz)).or_default().push(j);
    }
    None
}

/// Free-field Green's function e^{jkd}/(4πd) with d = ‖r − r_src‖.
pub fn green_free_field(r: &Point3, r_src: &Point3, k: f64) -> Result<Complex64> {
    if !(k.is_finite() && k > 0.0) {
        return Err(Error::domain("wavenumber must be positive"));
    }
    let d = (r - r_src).norm();
    if d < 1e-9 {
        return Err(Error::Singularity(d));
    }
    Ok(Complex64::from_polar(1.0 / (4.0 * PI * d), k * d))
}

/// Image coordinate along one axis. Even indices translate the source,
/// odd indices mirror it; |index| is the number of wall reflections.
fn image_coordinate(index: i64, length: f64, source: f64) -> f64 {
    if index % 2 == 0 {
        index as f64 * length + source
    } else {
        (index + 1) as f64 * length - source
    }
}

/// Image-source shoebox transfer function at wavenumber `k`: for each
/// microphone, the sum over every image with per-axis index magnitude at
/// most `max_order` of ρ^(reflection count) times the free-field Green's
/// function. Deterministic, including under parallel evaluation.
pub fn shoebox_atf(
    room: &RoomSpec,
    src: &Point3,
    mics: &[Point3],
    k: f64,
    max_order: usize,
) -> Result<Vec<Complex64>> {
    room.validate()?;
    if !room.contains_strictly(src) {
        return Err(Error::domain("source must lie strictly inside the room"));
    }
    for (i, m) in mics.iter().enumerate() {
        if !room.contains_strictly(m) {
            return Err(Error::domain(format!(
                "microphone {i} lies on or outside a wall"
            )));
        }
    }
    let n = max_order as i64;
    let [lx, ly, lz] = room.dimensions;
    let rho = room.reflection;

    mics.par_iter()
        .map(|mic| {
            let mut sum = Complex64::new(0.0, 0.0);
            for ix in -n..=n {
                let img_x = image_coordinate(ix, lx, src.x);
                for iy in -n..=n {
                    let img_y = image_coordinate(iy, ly, src.y);
                    for iz in -n..=n {
                        let img_z = image_coordinate(iz, lz, src.z);
                        let image = Point3::new(img_x, img_y, img_z);
                        let reflections = (ix.abs() + iy.abs() + iz.abs()) as i32;
                        let weight = rho.powi(reflections);
                        sum += weight * green_free_field(mic, &image, k)?;
                    }
                }
            }
            Ok(sum)
        })
        .collect()
}

/// Smallest image order whose residual energy estimate ρ^o·(o+1)² drops
/// below 1e-3, capped at 25.
pub fn default_max_order(reflection: f64) -> usize {
    if reflection <= 0.0 {
        return 0;
    }
    for order in 0..=25usize {
        let growth = ((order + 1) * (order + 1)) as f64;
        if reflection.powi(order as i32) * growth < 1e-3 {
            return order;
        }
    }
    25
}

/// Uniform wall reflection magnitude reproducing a target reverberation
/// time, by inverting Eyring's formula: ᾱ = 1 − exp(−0.161·V/(S·t60)),
/// ρ = √(1 − ᾱ).
pub fn t60_to_reflection(dimensions: [f64; 3], t60: f64) -> Result<f64> {
    if !dimensions.iter().all(|&d| d.is_finite() && d > 0.0) {
        return Err(Error::domain("room dimensions must be positive"));
    }
    if !(t60.is_finite() && t60 > 0.0) {
        return Err(Error::domain("reverberation time must be positive"));
    }
    let [lx, ly, lz] = dimensions;
    let volume = lx * ly * lz;
    let surface = 2.0 * (lx * ly + ly * lz + lz * lx);
    let exponent = 0.161 * volume / (surface * t60);
    let absorption = 1.0 - (-exponent).exp();
    if absorption >= 1.0 {
        return Err(Error::Infeasible(format!(
            "t60 = {t60} s requires more than total absorption for this room"
        )));
    }
    Ok((1.0 - absorption).sqrt())
}

/// Microphone array layout.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ArraySpec {
    /// Points on two concentric spheres, spread by the Fibonacci lattice.
    DualSphere {
        center: [f64; 3],
        radii: [f64; 2],
        counts: [usize; 2],
    },
    /// Regular grid over an axis-aligned box.
    Grid {
        center: [f64; 3],
        half_extents: [f64; 3],
        counts: [usize; 3],
    },
    /// Uniform random draws from a region.
    RandomInRegion { region: RegionSpec, count: usize },
}

impl ArraySpec {
    pub fn count(&self) -> usize {
        match self {
            ArraySpec::DualSphere { counts, .. } => counts[0] + counts[1],
            ArraySpec::Grid { counts, .. } => counts[0] * counts[1] * counts[2],
            ArraySpec::RandomInRegion { count, .. } => *count,
        }
    }
}

/// Concrete microphone positions for an array layout. Deterministic for a
/// given seed; only `random_in_region` consumes the seed.
pub fn make_array(spec: &ArraySpec, seed: u64) -> Result<Vec<Point3>> {
    match spec {
        ArraySpec::DualSphere {
            center,
            radii,
            counts,
        } => {
            if counts[0] == 0 || counts[1] == 0 {
                return Err(Error::domain("each sphere needs at least one microphone"));
            }
            if !radii.iter().all(|&r| r.is_finite() && r > 0.0) {
                return Err(Error::domain("sphere radii must be positive"));
            }
            let c = Point3::new(center[0], center[1], center[2]);
            let mut out = Vec::with_capacity(counts[0] + counts[1]);
            for (&radius, &count) in radii.iter().zip(counts) {
                for dir in fibonacci_directions(count)? {
                    out.push(c + dir.as_vector() * radius);
                }
            }
            Ok(out)
        }
        ArraySpec::Grid {
            center,
            half_extents,
            counts,
        } => {
            if counts.iter().any(|&c| c == 0) {
                return Err(Error::domain("grid counts must be positive"));
            }
            if !half_extents.iter().all(|&h| h.is_finite() && h > 0.0) {
                return Err(Error::domain("grid half extents must be positive"));
            }
            let axis = |a: usize, i: usize| {
                if counts[a] == 1 {
                    center[a]
                } else {
                    center[a] - half_extents[a]
                        + 2.0 * half_extents[a] * i as f64 / (counts[a] - 1) as f64
                }
            };
            let mut out = Vec::with_capacity(counts[0] * counts[1] * counts[2]);
            for ix in 0..counts[0] {
                for iy in 0..counts[1] {
                    for iz in 0..counts[2] {
                        out.push(Point3::new(axis(0, ix), axis(1, iy), axis(2, iz)));
                    }
                }
            }
            Ok(out)
        }
        ArraySpec::RandomInRegion { region, count } => {
            if *count == 0 {
                return Err(Error::domain("array needs at least one microphone"));
            }
            region.validate()?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok((0..*count).map(|_| region.sample_interior(&mut rng)).collect())
        }
    }
}

/// Adds circular complex Gaussian noise at the requested signal-to-noise
/// ratio (in dB, averaged over microphones). `f64::INFINITY` means no
/// noise. Deterministic per seed.
pub fn add_noise(obs: &ObservationSet, snr_db: f64, seed: u64) -> Result<ObservationSet> {
    if snr_db == f64::INFINITY {
        return Ok(obs.clone());
    }
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(Error::domain("signal-to-noise ratio must be finite or +inf"));
    }
    let signal_power =
        obs.pressures.iter().map(|p| p.norm_sqr()).sum::<f64>() / obs.len() as f64;
    if signal_power == 0.0 {
        return Err(Error::DegenerateInput(
            "cannot scale noise against an all-zero observation".into(),
        ));
    }
    let noise_power = signal_power * 10f64.powf(-snr_db / 10.0);
    let component_sigma = (noise_power / 2.0).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pressures = obs
        .pressures
        .iter()
        .map(|p| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            p + Complex64::new(re * component_sigma, im * component_sigma)
        })
        .collect();
    ObservationSet::new(obs.wavenumber, obs.positions.clone(), pressures)
}

/// Room wall description for scene files: either a reflection magnitude or
/// a reverberation time, exactly one of the two.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneRoom {
    pub dimensions: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reflection: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t60: Option<f64>,
    #[serde(default = "default_sound_speed")]
    pub sound_speed: f64,
}

fn default_sound_speed() -> f64 {
    crate::SPEED_OF_SOUND
}

/// Complete single-source measurement scenario: room, source, microphone
/// array, frequencies and noise level. Serialized as JSON; unknown keys
/// are rejected.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub room: SceneRoom,
    pub source: [f64; 3],
    pub array: ArraySpec,
    pub frequencies_hz: Vec<f64>,
    /// Omitted or null means noiseless.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
    pub seed: u64,
    /// Image-source truncation; omitted means the default order rule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_order: Option<usize>,
}

impl SceneSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let scene: SceneSpec = serde_json::from_str(&text).map_err(|e| Error::Config {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Config {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.room_spec()?;
        if self.frequencies_hz.is_empty() {
            return Err(Error::domain("scene needs at least one frequency"));
        }
        if !self.frequencies_hz.iter().all(|&f| f.is_finite() && f > 0.0) {
            return Err(Error::domain("frequencies must be positive"));
        }
        Ok(())
    }

    /// Resolves the wall description into a concrete room.
    pub fn room_spec(&self) -> Result<RoomSpec> {
        let reflection = match (self.room.reflection, self.room.t60) {
            (Some(rho), None) => rho,
            (None, Some(t60)) => t60_to_reflection(self.room.dimensions, t60)?,
            (Some(_), Some(_)) => {
                return Err(Error::domain(
                    "room specifies both reflection and t60; pick one",
                ))
            }
            (None, None) => {
                return Err(Error::domain("room needs either reflection or t60"))
            }
        };
        RoomSpec::new(self.room.dimensions, reflection, self.room.sound_speed)
    }

    /// Simulates the scene: one observation set per listed frequency, in
    /// listing order. Noise seeds are derived per frequency, so dropping
    /// or reordering frequencies does not change the others.
    pub fn simulate(&self) -> Result<Vec<ObservationSet>> {
        self.validate()?;
        let room = self.room_spec()?;
        let mics = make_array(&self.array, self.seed)?;
        let src = Point3::new(self.source[0], self.source[1], self.source[2]);
        let max_order = self
            .max_order
            .unwrap_or_else(|| default_max_order(room.reflection));
        self.frequencies_hz
            .iter()
            .enumerate()
            .map(|(i, &f)| {
                let k = 2.0 * PI * f / room.sound_speed;
                let pressures = shoebox_atf(&room, &src, &mics, k, max_order)?;
                let obs = ObservationSet::new(k, mics.clone(), pressures)?;
                match self.snr_db {
                    Some(snr) => add_noise(&obs, snr, per_frequency_seed(self.seed, i)),
                    None => Ok(obs),
                }
            })
            .collect()
    }
}

/// Splitmix-style seed derivation, so each frequency gets an independent
/// noise stream from the one scene seed.
pub fn per_frequency_seed(seed: u64, index: usize) -> u64 {
    let mut z = seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
