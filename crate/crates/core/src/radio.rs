//! Physical-layer arithmetic: access-link Shannon rates and their inverse,
//! mmWave path loss, EIRP-limited backhaul transmit power, backhaul SNR and
//! the resulting link capacity.
//!
//! All functions are pure. Units are carried in the names: `_db`, `_dbm`,
//! `_dbi`, `_hz`, `_bps`, `_watts`.

use std::f64::consts::LN_2;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RadioError {
    #[error("bandwidth must be positive, got {0}")]
    NonPositiveBandwidth(f64),
    #[error("transmit power must be non-negative, got {0}")]
    NegativePower(f64),
    #[error("rate must be non-negative, got {0}")]
    NegativeRate(f64),
    #[error("{name} must be positive, got {value}")]
    NonPositiveInput { name: &'static str, value: f64 },
}

/// mmWave backhaul band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Band {
    /// 71-76 GHz, used between the macro cell and cluster heads.
    Eband,
    /// 57-64 GHz, used between small cells.
    Vband,
}

impl Band {
    /// Antenna gain above which the EIRP cap starts to shrink.
    pub fn eirp_gain_threshold_dbi(self) -> f64 {
        match self {
            Band::Vband => 51.0,
            Band::Eband => 50.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Band::Eband => "e",
            Band::Vband => "v",
        }
    }

    pub fn parse(s: &str) -> Option<Band> {
        match s.to_ascii_lowercase().as_str() {
            "e" | "eband" | "e-band" => Some(Band::Eband),
            "v" | "vband" | "v-band" => Some(Band::Vband),
            _ => None,
        }
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Radio parameters shared by every link and user of an instance.
#[derive(Debug, Clone, PartialEq)]
pub struct RadioConfig {
    /// Spectrum of the macro tier.
    pub macro_bandwidth_hz: f64,
    pub macro_subcarriers: u32,
    /// Spectrum of the small-cell tier.
    pub small_bandwidth_hz: f64,
    pub small_subcarriers: u32,
    /// AWGN variance seen by macro-tier users.
    pub noise_variance_macro_watts: f64,
    /// AWGN variance seen by small-tier users.
    pub noise_variance_small_watts: f64,
    pub noise_figure_db: f64,
    pub thermal_noise_dbm: f64,
    pub tx_loss_db: f64,
    pub rx_loss_db: f64,
    pub link_margin_db: f64,
    pub rx_gain_dbi: f64,
    pub tx_gain_dbi_e: f64,
    pub tx_gain_dbi_v: f64,
    pub e_band_freq_ghz: f64,
    pub v_band_freq_ghz: f64,
    /// Channel bandwidth of a backhaul link, both bands.
    pub backhaul_bandwidth_hz: f64,
    /// Combined oxygen + vapour + rain attenuation.
    pub atmos_db_per_km: f64,
    pub y_min_bps: f64,
    pub y_max_bps: f64,
}

impl Default for RadioConfig {
    fn default() -> Self {
        let backhaul_bandwidth_hz: f64 = 100e6;
        RadioConfig {
            macro_bandwidth_hz: 20e6,
            macro_subcarriers: 10,
            small_bandwidth_hz: 40e6,
            small_subcarriers: 8,
            noise_variance_macro_watts: 1e-13,
            noise_variance_small_watts: 1e-13,
            noise_figure_db: 5.0,
            thermal_noise_dbm: -174.0 + 10.0 * backhaul_bandwidth_hz.log10(),
            tx_loss_db: 3.0,
            rx_loss_db: 3.0,
            link_margin_db: 5.0,
            rx_gain_dbi: 38.0,
            tx_gain_dbi_e: 50.0,
            tx_gain_dbi_v: 51.0,
            e_band_freq_ghz: 73.0,
            v_band_freq_ghz: 60.0,
            backhaul_bandwidth_hz,
            atmos_db_per_km: 16.7,
            y_min_bps: 1e6,
            y_max_bps: 40e6,
        }
    }
}

impl RadioConfig {
    /// Sub-carrier bandwidth of the macro tier.
    pub fn delta_b_macro_hz(&self) -> f64 {
        self.macro_bandwidth_hz / f64::from(self.macro_subcarriers)
    }

    /// Sub-carrier bandwidth of the small-cell tier.
    pub fn delta_b_small_hz(&self) -> f64 {
        self.small_bandwidth_hz / f64::from(self.small_subcarriers)
    }

    pub fn freq_ghz(&self, band: Band) -> f64 {
        match band {
            Band::Eband => self.e_band_freq_ghz,
            Band::Vband => self.v_band_freq_ghz,
        }
    }

    pub fn tx_gain_dbi(&self, band: Band) -> f64 {
        match band {
            Band::Eband => self.tx_gain_dbi_e,
            Band::Vband => self.tx_gain_dbi_v,
        }
    }

    /// Maximum backhaul transmit power of a link in `band`.
    pub fn backhaul_max_power_dbm(&self, band: Band) -> f64 {
        let gain = self.tx_gain_dbi(band);
        let eirp = eirp_max_dbm(band, excess_gain_db(band, gain));
        backhaul_max_power_dbm(eirp, self.tx_loss_db, gain)
    }

    /// Capacity of a link of `band` over `distance_km` when transmitting at
    /// its maximum power.
    pub fn link_capacity_at_max_power(&self, band: Band, distance_km: f64) -> Result<f64, RadioError> {
        let tpl = total_path_loss_db(self.freq_ghz(band), distance_km, self.atmos_db_per_km)?;
        let snr = backhaul_snr_db(self.backhaul_max_power_dbm(band), self, tpl);
        link_capacity_bps(snr, self.backhaul_bandwidth_hz)
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

/// Shannon rate of an access link: `ΔB·log2(1 + g·P/σ²)`.
pub fn access_rate(
    power_watts: f64,
    gain_sq: f64,
    delta_b_hz: f64,
    noise_variance: f64,
) -> Result<f64, RadioError> {
    if !(delta_b_hz > 0.0) {
        return Err(RadioError::NonPositiveBandwidth(delta_b_hz));
    }
    if !(power_watts >= 0.0) {
        return Err(RadioError::NegativePower(power_watts));
    }
    check_positive("gain_sq", gain_sq)?;
    check_positive("noise_variance", noise_variance)?;
    Ok(delta_b_hz * (gain_sq * power_watts / noise_variance).ln_1p() / LN_2)
}

/// Transmit power needed to reach `rate_bps`; the exact inverse of
/// [`access_rate`]: `(2^{y/ΔB} − 1)·σ²/g`.
pub fn access_power_for_rate(
    rate_bps: f64,
    gain_sq: f64,
    delta_b_hz: f64,
    noise_variance: f64,
) -> Result<f64, RadioError> {
    if !(rate_bps >= 0.0) {
        return Err(RadioError::NegativeRate(rate_bps));
    }
    if !(delta_b_hz > 0.0) {
        return Err(RadioError::NonPositiveBandwidth(delta_b_hz));
    }
    check_positive("gain_sq", gain_sq)?;
    check_positive("noise_variance", noise_variance)?;
    Ok((rate_bps / delta_b_hz * LN_2).exp_m1() * noise_variance / gain_sq)
}

/// Free-space path loss with frequency in GHz and distance in km.
pub fn fspl_db(freq_ghz: f64, dist_km: f64) -> Result<f64, RadioError> {
    check_positive("freq_ghz", freq_ghz)?;
    check_positive("dist_km", dist_km)?;
    Ok(92.4 + 20.0 * freq_ghz.log10() + 20.0 * dist_km.log10())
}

/// FSPL plus distance-proportional atmospheric attenuation.
pub fn total_path_loss_db(freq_ghz: f64, dist_km: f64, atmos_db_per_km: f64) -> Result<f64, RadioError> {
    if !(atmos_db_per_km >= 0.0) {
        return Err(RadioError::NonPositiveInput { name: "atmos_db_per_km", value: atmos_db_per_km });
    }
    Ok(fspl_db(freq_ghz, dist_km)? + dist_km * atmos_db_per_km)
}

/// Gain in excess of the band's EIRP threshold, clipped at zero.
pub fn excess_gain_db(band: Band, tx_gain_dbi: f64) -> f64 {
    (tx_gain_dbi - band.eirp_gain_threshold_dbi()).max(0.0)
}

/// Regulatory EIRP cap: 85 dBm reduced by twice the excess antenna gain.
/// Both bands share the same form; only the gain threshold differs.
pub fn eirp_max_dbm(_band: Band, excess_gain_db: f64) -> f64 {
    85.0 - 2.0 * excess_gain_db.max(0.0)
}

pub fn backhaul_max_power_dbm(eirp_max_dbm: f64, tx_loss_db: f64, tx_gain_dbi: f64) -> f64 {
    eirp_max_dbm + tx_loss_db - tx_gain_dbi
}

/// Receiver SNR of a backhaul link transmitting at `p_dbm` through `tpl_db`.
pub fn backhaul_snr_db(p_dbm: f64, cfg: &RadioConfig, tpl_db: f64) -> f64 {
    p_dbm - cfg.thermal_noise_dbm - cfg.noise_figure_db - cfg.tx_loss_db - cfg.rx_loss_db
        + cfg.rx_gain_dbi
        - cfg.link_margin_db
        - tpl_db
}

/// Shannon capacity at `snr_db`; `-inf` dB maps to zero.
pub fn link_capacity_bps(snr_db: f64, bandwidth_hz: f64) -> Result<f64, RadioError> {
    if !(bandwidth_hz > 0.0) {
        return Err(RadioError::NonPositiveBandwidth(bandwidth_hz));
    }
    Ok(bandwidth_hz * db_to_linear(snr_db).ln_1p() / LN_2)
}

/// One access user: the base station it is attached to and its channel.
#[derive(Debug, Clone, PartialEq)]
pub struct UserChannel {
    pub user_id: usize,
    pub attached_bs: usize,
    /// `|h_j|²`, dimensionless.
    pub gain_sq: f64,
    /// Service tier tag; carried through outputs only.
    pub demand_class: u32,
}

fn check_positive(name: &'static str, value: f64) -> Result<(), RadioError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(RadioError::NonPositiveInput { name, value })
    }
}
