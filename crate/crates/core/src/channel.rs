//! One random channel realization: direct links `h_k`, BS to RIS `G`, and
//! RIS to user `g_k`.

use crate::scenario::{distance, place_users, rng_for, ScenarioConfig, Stream, UserLayout};
use crate::{CMatrix, CVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::io::{self, Read, Write};

#[derive(Debug, thiserror::Error)]
pub enum ChannelError {
    #[error("distance must be positive, got {0}")]
    NonPositiveDistance(f64),
    #[error("transmitter and receiver coincide")]
    CoincidentPositions,
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("not a channel dump (bad magic)")]
    BadMagic,
    #[error("channel dump has implausible header {0:?}")]
    BadHeader([u64; 4]),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// Direct BS to user links, one length-M vector per user.
    pub h: Vec<CVector>,
    /// BS to RIS, N x M.
    pub bs_ris: CMatrix,
    /// RIS to user links, one length-N vector per user.
    pub g: Vec<CVector>,
    /// Users `0..k0` see `v_t`, the rest `v_r`.
    pub k0: usize,
}

impl ChannelSet {
    pub fn m(&self) -> usize {
        self.bs_ris.ncols()
    }

    pub fn n(&self) -> usize {
        self.bs_ris.nrows()
    }

    pub fn k(&self) -> usize {
        self.h.len()
    }

    pub fn uses_transmit_side(&self, k: usize) -> bool {
        k < self.k0
    }

    pub fn is_finite(&self) -> bool {
        let finite = |z: &Complex64| z.re.is_finite() && z.im.is_finite();
        self.bs_ris.iter().all(finite)
            && self.h.iter().all(|v| v.iter().all(finite))
            && self.g.iter().all(|v| v.iter().all(finite))
    }
}

/// Large-scale amplitude gain `sqrt(L0 d^-c)`.
pub fn path_gain(distance_m: f64, exponent: f64, l0_db: f64) -> Result<f64, ChannelError> {
    if !(distance_m > 0.0) {
        return Err(ChannelError::NonPositiveDistance(distance_m));
    }
    Ok((10f64.powf(l0_db / 10.0) * distance_m.powf(-exponent)).sqrt())
}

fn steering(n: usize, cos_angle: f64) -> CVector {
    CVector::from_fn(n, |i, _| Complex64::from_polar(1.0, PI * i as f64 * cos_angle))
}

/// Rank-1 LoS response `a_rx a_tx^H` of two half-wavelength ULAs along the x
/// axis, `n_rx x n_tx`.
pub fn los_component(tx_pos: [f64; 2], rx_pos: [f64; 2], n_tx: usize, n_rx: usize) -> Result<CMatrix, ChannelError> {
    let d = distance(tx_pos, rx_pos);
    if d == 0.0 {
        return Err(ChannelError::CoincidentPositions);
    }
    // departure angle at tx, arrival angle at rx (pointing back to tx)
    let cos_dep = (rx_pos[0] - tx_pos[0]) / d;
    let cos_arr = -cos_dep;
    let a_tx = steering(n_tx, cos_dep);
    let a_rx = steering(n_rx, cos_arr);
    Ok(&a_rx * a_tx.adjoint())
}

fn cn01<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * FRAC_1_SQRT_2
}

fn rician(beta: f64, eps: f64, los: &CMatrix, rng: &mut (impl Rng + ?Sized)) -> CMatrix {
    let (w_los, w_nlos) = if eps.is_infinite() {
        (1.0, 0.0)
    } else {
        ((eps / (1.0 + eps)).sqrt(), (1.0 / (1.0 + eps)).sqrt())
    };
    CMatrix::from_fn(los.nrows(), los.ncols(), |i, j| (los[(i, j)] * w_los + cn01(rng) * w_nlos) * beta)
}

pub fn synthesize<R: Rng + ?Sized>(config: &ScenarioConfig, layout: &UserLayout, rng: &mut R) -> Result<ChannelSet, ChannelError> {
    let (m, n) = (config.m, config.n);
    let eps = config.rician_factor;
    let beta_bs_ris = path_gain(distance(config.bs_pos, config.ris_pos), config.exp_bs_ris, config.l0_db)?;
    let los = los_component(config.bs_pos, config.ris_pos, m, n)?;
    let bs_ris = rician(beta_bs_ris, eps, &los, rng);

    let mut h = Vec::with_capacity(config.k);
    let mut g = Vec::with_capacity(config.k);
    for pos in &layout.positions {
        let beta_g = path_gain(distance(config.ris_pos, *pos), config.exp_ris_user, config.l0_db)?;
        // g_k^H is the 1 x N RIS-to-user response
        let los_row = los_component(config.ris_pos, *pos, n, 1)?;
        let g_row = rician(beta_g, eps, &los_row, rng);
        g.push(g_row.adjoint().column(0).into_owned());

        let beta_h = path_gain(distance(config.bs_pos, *pos), config.exp_direct, config.l0_db)?;
        h.push(CVector::from_fn(m, |_, _| cn01(rng) * beta_h));
    }
    Ok(ChannelSet { h, bs_ris, g, k0: config.k0 })
}

/// User layout and channels drawn from `config.seed` on their own streams.
pub fn draw_channels(config: &ScenarioConfig) -> Result<(UserLayout, ChannelSet), ChannelError> {
    let layout = place_users(config, &mut rng_for(config.seed, Stream::Layout));
    let ch = synthesize(config, &layout, &mut rng_for(config.seed, Stream::Channel))?;
    Ok((layout, ch))
}

const MAGIC: &[u8; 8] = b"STARCHN1";

/// Little-endian dump: magic, `M N K k0` as u64, then interleaved re/im
/// f64 for every `h_k`, `G` (row-major) and every `g_k`.
pub fn write_channels<W: Write>(ch: &ChannelSet, mut out: W) -> Result<(), ChannelError> {
    out.write_all(MAGIC)?;
    for v in [ch.m(), ch.n(), ch.k(), ch.k0] {
        out.write_all(&(v as u64).to_le_bytes())?;
    }
    let mut put = |z: &Complex64| -> io::Result<()> {
        out.write_all(&z.re.to_le_bytes())?;
        out.write_all(&z.im.to_le_bytes())
    };
    for hk in &ch.h {
        hk.iter().try_for_each(&mut put)?;
    }
    for i in 0..ch.n() {
        for j in 0..ch.m() {
            put(&ch.bs_ris[(i, j)])?;
        }
    }
    for gk in &ch.g {
        gk.iter().try_for_each(&mut put)?;
    }
    Ok(())
}

pub fn read_channels<R: Read>(mut input: R) -> Result<ChannelSet, ChannelError> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(ChannelError::BadMagic);
    }
    let mut header = [0u64; 4];
    let mut word = [0u8; 8];
    for v in header.iter_mut() {
        input.read_exact(&mut word)?;
        *v = u64::from_le_bytes(word);
    }
    let [m, n, k, k0] = header;
    if m > 1 << 16 || n > 1 << 16 || k > 1 << 16 || k0 > k {
        return Err(ChannelError::BadHeader(header));
    }
    let (m, n, k) = (m as usize, n as usize, k as usize);
    let mut get = || -> io::Result<Complex64> {
        let mut re = [0u8; 8];
        let mut im = [0u8; 8];
        input.read_exact(&mut re)?;
        input.read_exact(&mut im)?;
        Ok(Complex64::new(f64::from_le_bytes(re), f64::from_le_bytes(im)))
    };
    let mut h = Vec::with_capacity(k);
    for _ in 0..k {
        let v: Vec<Complex64> = (0..m).map(|_| get()).collect::<io::Result<_>>()?;
        h.push(CVector::from_vec(v));
    }
    let mut bs_ris = CMatrix::zeros(n, m);
    for i in 0..n {
        for j in 0..m {
            bs_ris[(i, j)] = get()?;
        }
    }
    let mut g = Vec::with_capacity(k);
    for _ in 0..k {
        let v: Vec<Complex64> = (0..n).map(|_| get()).collect::<io::Result<_>>()?;
        g.push(CVector::from_vec(v));
    }
    Ok(ChannelSet { h, bs_ris, g, k0: k0 as usize })
}
