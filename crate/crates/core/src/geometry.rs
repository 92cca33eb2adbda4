//! Scenario geometry and seeded Rician channel generation.
//!
//! Every link is `sqrt(path_loss) * rician` with a planar-wave LOS response of a
//! uniform rectangular array on the RIS side. Direct AP-user links are Rayleigh
//! by default and are blocked independently per (AP, user) pair.

use nalgebra::{DMatrix, DVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::C64;

pub type Point = [f64; 3];

/// How a set of single-antenna nodes (APs or users) is placed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Placement {
    /// Pinned positions, identical in every realization.
    Fixed { points: Vec<Point> },
    /// `count` nodes drawn uniformly in `x` × `y` at a fixed height, redrawn per realization.
    UniformRect {
        count: usize,
        x: [f64; 2],
        y: [f64; 2],
        height: f64,
    },
    /// `count` nodes equally spaced on a horizontal circle around `center`.
    Circle {
        count: usize,
        center: Point,
        radius: f64,
    },
}

impl Placement {
    pub fn count(&self) -> usize {
        match self {
            Placement::Fixed { points } => points.len(),
            Placement::UniformRect { count, .. } | Placement::Circle { count, .. } => *count,
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> Vec<Point> {
        match self {
            Placement::Fixed { points } => points.clone(),
            Placement::UniformRect {
                count,
                x,
                y,
                height,
            } => (0..*count)
                .map(|_| {
                    let px = x[0] + (x[1] - x[0]) * rng.random::<f64>();
                    let py = y[0] + (y[1] - y[0]) * rng.random::<f64>();
                    [px, py, *height]
                })
                .collect(),
            Placement::Circle {
                count,
                center,
                radius,
            } => (0..*count)
                .map(|k| {
                    let a = 2.0 * PI * k as f64 / *count as f64;
                    [center[0] + radius * a.cos(), center[1] + radius * a.sin(), center[2]]
                })
                .collect(),
        }
    }

    fn validate(&self, what: &str) -> Result<()> {
        if self.count() == 0 {
            return Err(Error::config(format!("{what}: count must be positive")));
        }
        let finite = |p: &Point| p.iter().all(|v| v.is_finite());
        match self {
            Placement::Fixed { points } if !points.iter().all(finite) => {
                Err(Error::config(format!("{what}: non-finite position")))
            }
            Placement::UniformRect { x, y, height, .. }
                if !(x[0] <= x[1] && y[0] <= y[1] && height.is_finite()) =>
            {
                Err(Error::config(format!("{what}: empty placement rectangle")))
            }
            Placement::Circle { radius, .. } if !(*radius >= 0.0) => {
                Err(Error::config(format!("{what}: negative circle radius")))
            }
            _ => Ok(()),
        }
    }
}

/// LOS response model on the RIS side.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LosModel {
    /// Planar-wave response of a half-wavelength uniform rectangular array.
    #[default]
    Ura,
    /// Every element sees the same phase (testing fallback).
    AllOnes,
}

/// Deployment, propagation and power parameters of one simulated scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub aps: Placement,
    pub users: Placement,
    pub ris_positions: Vec<Point>,
    /// Elements per RIS.
    pub elements: usize,
    /// Rows of each RIS array; `None` picks the most square factorization of `elements`.
    pub ris_rows: Option<usize>,
    pub wavelength: f64,
    pub los: LosModel,
    pub c0_db: f64,
    pub d0: f64,
    pub alpha_ar: f64,
    pub alpha_ru: f64,
    pub alpha_au: f64,
    pub kappa_ar_db: f64,
    pub kappa_ru_db: f64,
    pub kappa_au_db: f64,
    pub p_au_block: f64,
    pub p_dbm: f64,
    pub n0_dbm: f64,
}

/// Side length of the square deployment area.
pub const AREA_SIDE: f64 = 120.0;
pub const AP_HEIGHT: f64 = 5.0;
pub const USER_HEIGHT: f64 = 1.65;

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            aps: Placement::UniformRect {
                count: 8,
                x: [0.0, AREA_SIDE],
                y: [-AREA_SIDE / 2.0, AREA_SIDE / 2.0],
                height: AP_HEIGHT,
            },
            users: Placement::UniformRect {
                count: 1,
                x: [0.0, AREA_SIDE],
                y: [-AREA_SIDE / 2.0, AREA_SIDE / 2.0],
                height: USER_HEIGHT,
            },
            ris_positions: vec![
                [40.0, 3.0, 10.0],
                [80.0, 3.0, 10.0],
                [40.0, -3.0, 10.0],
                [80.0, -3.0, 10.0],
            ],
            elements: 12,
            ris_rows: None,
            wavelength: 0.1,
            los: LosModel::Ura,
            c0_db: -30.0,
            d0: 1.0,
            alpha_ar: 1.0,
            alpha_ru: 1.5,
            alpha_au: 3.5,
            kappa_ar_db: 10.0,
            kappa_ru_db: 5.0,
            kappa_au_db: f64::NEG_INFINITY,
            p_au_block: 0.2,
            p_dbm: 0.0,
            n0_dbm: -80.0,
        }
    }
}

impl ScenarioConfig {
    pub fn num_aps(&self) -> usize {
        self.aps.count()
    }

    pub fn num_users(&self) -> usize {
        self.users.count()
    }

    pub fn num_ris(&self) -> usize {
        self.ris_positions.len()
    }

    /// Total number of reflecting elements `I = L·N`.
    pub fn num_phases(&self) -> usize {
        self.num_ris() * self.elements
    }

    /// Normalized SNR `P = 10^((p_dbm - n0_dbm)/10)` (transmit power over unit noise).
    pub fn snr_linear(&self) -> f64 {
        db_to_linear(self.p_dbm - self.n0_dbm)
    }

    pub fn array_geometry(&self) -> ArrayGeometry {
        let rows = self
            .ris_rows
            .unwrap_or_else(|| most_square_rows(self.elements));
        ArrayGeometry::new(rows, self.elements / rows.max(1), self.wavelength)
    }

    pub fn validate(&self) -> Result<()> {
        self.aps.validate("aps")?;
        self.users.validate("users")?;
        if self.elements == 0 && !self.ris_positions.is_empty() {
            return Err(Error::config("elements per RIS must be at least 1"));
        }
        if let Some(rows) = self.ris_rows {
            if rows == 0 || self.elements % rows != 0 {
                return Err(Error::config(format!(
                    "ris_rows = {rows} does not divide elements = {}",
                    self.elements
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.p_au_block) {
            return Err(Error::config("p_au_block must lie in [0, 1]"));
        }
        if !(self.wavelength > 0.0 && self.wavelength.is_finite()) {
            return Err(Error::config("wavelength must be positive"));
        }
        if !(self.d0 > 0.0) {
            return Err(Error::config("d0 must be positive"));
        }
        let p = self.snr_linear();
        if !(p.is_finite() && p > 0.0) {
            return Err(Error::config("normalized SNR must be finite and positive"));
        }
        for (name, k) in [
            ("kappa_ar_db", self.kappa_ar_db),
            ("kappa_ru_db", self.kappa_ru_db),
            ("kappa_au_db", self.kappa_au_db),
        ] {
            if k.is_nan() {
                return Err(Error::config(format!("{name} is NaN")));
            }
        }
        for (name, a) in [
            ("alpha_ar", self.alpha_ar),
            ("alpha_ru", self.alpha_ru),
            ("alpha_au", self.alpha_au),
            ("c0_db", self.c0_db),
        ] {
            if !a.is_finite() {
                return Err(Error::config(format!("{name} must be finite")));
            }
        }
        if self.ris_positions.iter().any(|p| !p.iter().all(|v| v.is_finite())) {
            return Err(Error::config("non-finite RIS position"));
        }
        Ok(())
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

fn most_square_rows(n: usize) -> usize {
    (1..=n)
        .take_while(|r| r * r <= n)
        .filter(|r| n % r == 0)
        .last()
        .unwrap_or(1)
}

/// Uniform rectangular array: `rows × cols` elements with spacing `spacing`,
/// spanned by the horizontal axis `u` and vertical axis `v` (array plane `x-z`).
#[derive(Clone, Debug, PartialEq)]
pub struct ArrayGeometry {
    pub rows: usize,
    pub cols: usize,
    pub spacing: f64,
    pub wavelength: f64,
    pub axis_u: Vector3<f64>,
    pub axis_v: Vector3<f64>,
}

impl ArrayGeometry {
    /// Half-wavelength array in the `x-z` plane (normal along `y`).
    pub fn new(rows: usize, cols: usize, wavelength: f64) -> Self {
        ArrayGeometry {
            rows,
            cols,
            spacing: wavelength / 2.0,
            wavelength,
            axis_u: Vector3::x(),
            axis_v: Vector3::z(),
        }
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Offset of element `n` from the array centre; elements run column-fastest.
    pub fn element_offset(&self, n: usize) -> Vector3<f64> {
        let r = (n / self.cols) as f64 - (self.rows as f64 - 1.0) / 2.0;
        let c = (n % self.cols) as f64 - (self.cols as f64 - 1.0) / 2.0;
        self.axis_u * (c * self.spacing) + self.axis_v * (r * self.spacing)
    }
}

/// Linear power gain `10^(c0/10) (d/d0)^-alpha`.
pub fn path_loss(d: f64, alpha: f64, c0_db: f64, d0: f64) -> Result<f64> {
    if !(d > 0.0) || !(d0 > 0.0) {
        return Err(Error::domain(format!(
            "path loss needs positive distances (d = {d}, d0 = {d0})"
        )));
    }
    Ok(db_to_linear(c0_db) * (d / d0).powf(-alpha))
}

/// Planar-wave response of the array centred at `array_pos` towards `remote_pos`:
/// entry `n` is `exp(j 2π (offset_n · u) / λ)` with `u` the unit direction.
pub fn los_response(
    array_pos: &Point,
    remote_pos: &Point,
    geom: &ArrayGeometry,
) -> Result<DVector<C64>> {
    let dir = Vector3::from(*remote_pos) - Vector3::from(*array_pos);
    let dist = dir.norm();
    if !(dist > 0.0) {
        return Err(Error::domain("LOS response needs distinct positions"));
    }
    let u = dir / dist;
    let k = 2.0 * PI / geom.wavelength;
    Ok(DVector::from_fn(geom.len(), |n, _| {
        C64::from_polar(1.0, k * geom.element_offset(n).dot(&u))
    }))
}

/// Draws `sqrt(βκ/(1+κ))·los + sqrt(β/(1+κ))·h` with `h ~ CN(0, I)`.
///
/// Always consumes exactly `2·los.len()` normal draws.
pub fn rician_sample<R: Rng>(
    beta: f64,
    kappa: f64,
    los: &DVector<C64>,
    rng: &mut R,
) -> Result<DVector<C64>> {
    if !(beta >= 0.0) || !(kappa >= 0.0) {
        return Err(Error::domain(format!(
            "Rician sample needs beta >= 0 and kappa >= 0 (beta = {beta}, kappa = {kappa})"
        )));
    }
    let (a_los, a_nlos) = if kappa.is_infinite() {
        (beta.sqrt(), 0.0)
    } else {
        ((beta * kappa / (1.0 + kappa)).sqrt(), (beta / (1.0 + kappa)).sqrt())
    };
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Ok(DVector::from_fn(los.len(), |n, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        los[n] * a_los + C64::new(re * s, im * s) * a_nlos
    }))
}

/// Derives the seed of sub-stream `index` from `master` (SplitMix64 finalizer).
pub fn split_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One draw of every channel block plus the geometry it was drawn for.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelRealization {
    /// `G_AR,l`: `N × M`, column `m` is the AP `m` to RIS `l` channel.
    pub g_ar: Vec<DMatrix<C64>>,
    /// Per RIS `l`: `K × N`, row `k` is `g_RU,lk^H`.
    pub g_ru: Vec<DMatrix<C64>>,
    /// `K × M`, row `k` is `g_AU,k` (zero where blocked).
    pub g_au: DMatrix<C64>,
    /// `M × K`; 1 where the direct link is unblocked.
    pub rho: DMatrix<u8>,
    pub ap_positions: Vec<Point>,
    pub user_positions: Vec<Point>,
    pub ris_positions: Vec<Point>,
    pub seed: u64,
}

impl ChannelRealization {
    /// Builds a realization from raw channel blocks (no geometry), checking shapes.
    pub fn from_channels(
        g_ar: Vec<DMatrix<C64>>,
        g_ru: Vec<DMatrix<C64>>,
        g_au: DMatrix<C64>,
    ) -> Result<Self> {
        let (k, m) = g_au.shape();
        if g_ar.len() != g_ru.len() {
            return Err(Error::domain("g_ar and g_ru must list the same RISs"));
        }
        let n = g_ar.first().map_or(0, |g| g.nrows());
        for (l, (a, r)) in g_ar.iter().zip(&g_ru).enumerate() {
            if a.shape() != (n, m) || r.shape() != (k, n) {
                return Err(Error::domain(format!(
                    "RIS {l}: expected G_AR {n}x{m} and g_RU {k}x{n}, got {:?} and {:?}",
                    a.shape(),
                    r.shape()
                )));
            }
        }
        let rho = DMatrix::from_fn(m, k, |mi, ki| u8::from(g_au[(ki, mi)] != C64::new(0.0, 0.0)));
        Ok(ChannelRealization {
            g_ar,
            g_ru,
            g_au,
            rho,
            ap_positions: Vec::new(),
            user_positions: Vec::new(),
            ris_positions: Vec::new(),
            seed: 0,
        })
    }

    pub fn num_aps(&self) -> usize {
        self.g_au.ncols()
    }

    pub fn num_users(&self) -> usize {
        self.g_au.nrows()
    }

    pub fn num_ris(&self) -> usize {
        self.g_ar.len()
    }

    pub fn elements(&self) -> usize {
        self.g_ar.first().map_or(0, |g| g.nrows())
    }

    pub fn num_phases(&self) -> usize {
        self.num_ris() * self.elements()
    }

    /// Copy with the RIS links removed (direct links only).
    pub fn without_ris(&self) -> Self {
        ChannelRealization {
            g_ar: Vec::new(),
            g_ru: Vec::new(),
            ..self.clone()
        }
    }

    /// FNV-1a hash over the bit patterns of every channel entry.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |x: f64| {
            for b in x.to_bits().to_le_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        let blocks = self.g_ar.iter().chain(&self.g_ru).chain(std::iter::once(&self.g_au));
        for m in blocks {
            for z in m.iter() {
                eat(z.re);
                eat(z.im);
            }
        }
        h
    }
}

fn distance(a: &Point, b: &Point) -> f64 {
    (Vector3::from(*a) - Vector3::from(*b)).norm()
}

/// Scalar LOS factor `exp(-j 2π d/λ)` of a single-antenna endpoint.
fn distance_phase(d: f64, wavelength: f64) -> C64 {
    C64::from_polar(1.0, -2.0 * PI * d / wavelength)
}

/// Draws a realization; a pure function of `(cfg, seed)`.
///
/// Positions, blockage and fading use separate sub-streams of `seed`.
pub fn generate_realization(cfg: &ScenarioConfig, seed: u64) -> Result<ChannelRealization> {
    cfg.validate()?;
    let mut rng_pos = ChaCha8Rng::seed_from_u64(split_seed(seed, 0));
    let mut rng_block = ChaCha8Rng::seed_from_u64(split_seed(seed, 1));
    let mut rng_fade = ChaCha8Rng::seed_from_u64(split_seed(seed, 2));

    let aps = cfg.aps.sample(&mut rng_pos);
    let users = cfg.users.sample(&mut rng_pos);
    let (m, k, n) = (aps.len(), users.len(), cfg.elements);
    let geom = cfg.array_geometry();
    let lam = cfg.wavelength;

    let rho = DMatrix::from_fn(m, k, |_, _| u8::from(rng_block.random::<f64>() >= cfg.p_au_block));

    let los = |ris: &Point, remote: &Point| -> Result<DVector<C64>> {
        let d = distance(ris, remote);
        let base = match cfg.los {
            LosModel::Ura => los_response(ris, remote, &geom)?,
            LosModel::AllOnes => DVector::from_element(n, C64::new(1.0, 0.0)),
        };
        Ok(base * distance_phase(d, lam))
    };

    let kappa_ar = db_to_linear(cfg.kappa_ar_db);
    let kappa_ru = db_to_linear(cfg.kappa_ru_db);
    let kappa_au = db_to_linear(cfg.kappa_au_db);

    let mut g_ar = Vec::with_capacity(cfg.num_ris());
    for ris in &cfg.ris_positions {
        let mut g = DMatrix::zeros(n, m);
        for (mi, ap) in aps.iter().enumerate() {
            let beta = path_loss(distance(ris, ap), cfg.alpha_ar, cfg.c0_db, cfg.d0)?;
            let col = rician_sample(beta, kappa_ar, &los(ris, ap)?, &mut rng_fade)?;
            g.set_column(mi, &col);
        }
        g_ar.push(g);
    }

    let mut g_ru = Vec::with_capacity(cfg.num_ris());
    for ris in &cfg.ris_positions {
        let mut g = DMatrix::zeros(k, n);
        for (ki, user) in users.iter().enumerate() {
            let beta = path_loss(distance(ris, user), cfg.alpha_ru, cfg.c0_db, cfg.d0)?;
            let row = rician_sample(beta, kappa_ru, &los(ris, user)?, &mut rng_fade)?;
            g.set_row(ki, &row.transpose());
        }
        g_ru.push(g);
    }

    let mut g_au = DMatrix::zeros(k, m);
    for (ki, user) in users.iter().enumerate() {
        for (mi, ap) in aps.iter().enumerate() {
            let d = distance(user, ap);
            let beta = path_loss(d, cfg.alpha_au, cfg.c0_db, cfg.d0)?;
            let los = DVector::from_element(1, distance_phase(d, lam));
            let h = rician_sample(beta, kappa_au, &los, &mut rng_fade)?[0];
            if rho[(mi, ki)] == 1 {
                g_au[(ki, mi)] = h;
            }
        }
    }

    Ok(ChannelRealization {
        g_ar,
        g_ru,
        g_au,
        rho,
        ap_positions: aps,
        user_positions: users,
        ris_positions: cfg.ris_positions.clone(),
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn path_loss_reference_values() {
        assert!(close(path_loss(1.0, 2.7, -30.0, 1.0).unwrap(), 1e-3, 1e-12));
        assert!(close(path_loss(37.0, 0.0, -30.0, 1.0).unwrap(), 1e-3, 1e-12));
        assert!(close(path_loss(10.0, 2.0, -30.0, 1.0).unwrap(), 1e-5, 1e-12));
        assert!(matches!(path_loss(0.0, 2.0, -30.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(path_loss(-1.0, 2.0, -30.0, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn los_single_element_and_broadside() {
        let g1 = ArrayGeometry::new(1, 1, 0.1);
        let r = los_response(&[0.0, 0.0, 0.0], &[3.0, 7.0, -2.0], &g1).unwrap();
        assert_eq!(r.len(), 1);
        assert!((r[0] - C64::new(1.0, 0.0)).norm() < 1e-15);

        let g = ArrayGeometry::new(3, 4, 0.1);
        let r = los_response(&[40.0, 3.0, 10.0], &[40.0, 30.0, 10.0], &g).unwrap();
        for z in r.iter() {
            assert!((z - C64::new(1.0, 0.0)).norm() < 1e-12);
        }
        assert!(los_response(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0], &g).is_err());
    }

    #[test]
    fn los_matches_per_element_geometry() {
        let g = ArrayGeometry::new(3, 4, 0.1);
        let a = [80.0, -3.0, 10.0];
        let b = [12.0, 25.0, 5.0];
        let r = los_response(&a, &b, &g).unwrap();
        let d = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
        let norm = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        for n in 0..12 {
            // Element grid written out independently: x varies along columns, z along rows.
            let row = (n / 4) as f64 - 1.0;
            let col = (n % 4) as f64 - 1.5;
            let off = [col * 0.05, 0.0, row * 0.05];
            let proj = (off[0] * d[0] + off[1] * d[1] + off[2] * d[2]) / norm;
            let want = C64::from_polar(1.0, 2.0 * PI * proj / 0.1);
            assert!((r[n] - want).norm() < 1e-12, "element {n}");
            assert!((r[n].norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn rician_limits() {
        let los = DVector::from_fn(6, |n, _| C64::from_polar(1.0, n as f64));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = rician_sample(2.5, 1e12, &los, &mut rng).unwrap();
        for n in 0..6 {
            assert!((s[n] - los[n] * 2.5f64.sqrt()).norm() <= 1e-5 * 2.5f64.sqrt());
        }
        let one = DVector::from_element(1, C64::new(1.0, 0.0));
        let draws = 100_000;
        let mean: f64 = (0..draws)
            .map(|_| rician_sample(0.7, 0.0, &one, &mut rng).unwrap()[0].norm_sqr())
            .sum::<f64>()
            / draws as f64;
        assert!((mean - 0.7).abs() < 0.02 * 0.7, "mean {mean}");
        assert!(rician_sample(-1.0, 0.0, &one, &mut rng).is_err());
        assert!(rician_sample(1.0, -1.0, &one, &mut rng).is_err());
    }

    #[test]
    fn rician_consumes_fixed_draws() {
        let los = DVector::from_element(4, C64::new(1.0, 0.0));
        let mut a = ChaCha8Rng::seed_from_u64(9);
        let mut b = ChaCha8Rng::seed_from_u64(9);
        rician_sample(1.0, 0.0, &los, &mut a).unwrap();
        rician_sample(1.0, f64::INFINITY, &los, &mut b).unwrap();
        assert_eq!(a.random::<u64>(), b.random::<u64>());
    }

    #[test]
    fn realization_is_deterministic_and_shaped() {
        let cfg = ScenarioConfig {
            users: Placement::UniformRect {
                count: 3,
                x: [0.0, 120.0],
                y: [-60.0, 60.0],
                height: USER_HEIGHT,
            },
            ..Default::default()
        };
        let a = generate_realization(&cfg, 42).unwrap();
        let b = generate_realization(&cfg, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.fingerprint(), b.fingerprint());
        let c = generate_realization(&cfg, 43).unwrap();
        assert_ne!(a.fingerprint(), c.fingerprint());
        assert_eq!(a.g_ar.len(), 4);
        assert_eq!(a.g_ar[0].shape(), (12, 8));
        assert_eq!(a.g_ru[0].shape(), (3, 12));
        assert_eq!(a.g_au.shape(), (3, 8));
        for m in 0..8 {
            for k in 0..3 {
                if a.rho[(m, k)] == 0 {
                    assert_eq!(a.g_au[(k, m)], C64::new(0.0, 0.0));
                }
            }
        }
        assert!(a.g_ar.iter().all(|g| g.iter().all(|z| z.re.is_finite() && z.im.is_finite())));
    }

    #[test]
    fn full_blockage_zeroes_direct_links() {
        let cfg = ScenarioConfig {
            p_au_block: 1.0,
            ..Default::default()
        };
        let r = generate_realization(&cfg, 1).unwrap();
        assert!(r.g_au.iter().all(|z| *z == C64::new(0.0, 0.0)));
        assert!(r.rho.iter().all(|&x| x == 0));
    }

    #[test]
    fn blockage_frequency() {
        let cfg = ScenarioConfig {
            elements: 1,
            ris_positions: vec![[40.0, 3.0, 10.0]],
            ..Default::default()
        };
        let reals = 10_000;
        let mut blocked = 0usize;
        let mut total = 0usize;
        for s in 0..reals {
            let r = generate_realization(&cfg, s).unwrap();
            blocked += r.rho.iter().filter(|&&x| x == 0).count();
            total += r.rho.len();
        }
        let frac = blocked as f64 / total as f64;
        assert!((frac - 0.2).abs() < 0.01, "blocked fraction {frac}");
    }

    #[test]
    fn config_validation() {
        let mut cfg = ScenarioConfig::default();
        assert!(cfg.validate().is_ok());
        assert!((cfg.snr_linear() - 1e8).abs() < 1e-3);
        cfg.p_au_block = 1.5;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let cfg = ScenarioConfig {
            ris_rows: Some(5),
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        assert_eq!(most_square_rows(12), 3);
        assert_eq!(most_square_rows(18), 3);
        assert_eq!(most_square_rows(7), 1);
    }

    #[test]
    fn split_seed_streams_differ() {
        let s: std::collections::HashSet<u64> = (0..1000).map(|i| split_seed(7, i)).collect();
        assert_eq!(s.len(), 1000);
        assert_ne!(split_seed(7, 0), split_seed(8, 0));
    }
}
