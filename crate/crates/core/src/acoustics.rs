//! Acoustics agent: Brooks–Pope–Marcolini self-noise, spectral metrics,
//! directivity and validation against the airfoil self-noise table.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aero::BpmInputDoc;
use crate::model::{AcousticResult, AgentRole, MechanismSpl, Validate, Violation};
use crate::workspace::{ArtifactRecord, ProjectWorkspace, WorkspaceError};

/// Speed of sound at 15 °C, sea level.
pub const SPEED_OF_SOUND: f64 = 340.29;
pub const AIR_DENSITY: f64 = 1.225;
pub const REFERENCE_PRESSURE: f64 = 20e-6;
pub const METRICS_PATH: &str = "postProcessing/integrated/acoustics/acoustic_metrics.csv";
pub const THIRD_OCTAVE_PATH: &str = "postProcessing/integrated/acoustics/third_octave_spectrum.csv";
pub const SPECTRUM_PATH: &str = "postProcessing/integrated/acoustics/spl_spectrum.csv";

/// Nominal third-octave centres from 20 Hz to 20 kHz.
pub const NOMINAL_CENTERS: [f64; 31] = [
    20.0, 25.0, 31.5, 40.0, 50.0, 63.0, 80.0, 100.0, 125.0, 160.0, 200.0, 250.0, 315.0, 400.0,
    500.0, 630.0, 800.0, 1000.0, 1250.0, 1600.0, 2000.0, 2500.0, 3150.0, 4000.0, 5000.0, 6300.0,
    8000.0, 10000.0, 12500.0, 16000.0, 20000.0,
];

#[derive(Debug, Error)]
pub enum AcousticError {
    #[error("no noise mechanism selected")]
    NoMechanisms,
    #[error("frequency {0} Hz outside band [{1}, {2}] Hz")]
    FrequencyOutOfRange(f64, f64, f64),
    #[error("band {0} Hz not covered by spectrum")]
    BandOutOfRange(f64),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("dataset: {0}")]
    Dataset(String),
    #[error(transparent)]
    Workspace(#[from] WorkspaceError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Mechanism {
    TblTe,
    Separation,
    LblVs,
    BluntTe,
    TipVortex,
}

impl Mechanism {
    pub const ALL: [Mechanism; 5] = [
        Mechanism::TblTe,
        Mechanism::Separation,
        Mechanism::LblVs,
        Mechanism::BluntTe,
        Mechanism::TipVortex,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Mechanism::TblTe => "tbl_te",
            Mechanism::Separation => "separation",
            Mechanism::LblVs => "lbl_vs",
            Mechanism::BluntTe => "blunt_te",
            Mechanism::TipVortex => "tip_vortex",
        }
    }

    /// Mechanisms active for a spanwise-uniform 2D section with a sharp edge.
    /// Laminar vortex shedding needs an untripped boundary layer.
    pub fn defaults(tripped: bool) -> Vec<Mechanism> {
        let mut m = vec![Mechanism::TblTe, Mechanism::Separation];
        if !tripped {
            m.push(Mechanism::LblVs);
        }
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TipShape {
    Rounded,
    Flat,
}

/// Frequency band (Hz) in which spectra are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub min: f64,
    pub max: f64,
}

impl Band {
    pub const DEFAULT: Band = Band {
        min: 100.0,
        max: 10_000.0,
    };
    pub const AUDIBLE: Band = Band {
        min: 20.0,
        max: 20_000.0,
    };

    pub fn contains(&self, f: f64) -> bool {
        f >= self.min * (1.0 - 1e-9) && f <= self.max * (1.0 + 1e-9)
    }

    /// Nominal third-octave centres inside the band.
    pub fn centers(&self) -> Vec<f64> {
        NOMINAL_CENTERS
            .iter()
            .copied()
            .filter(|&f| self.contains(f))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BpmInput {
    pub chord: f64,
    pub span: f64,
    pub velocity: f64,
    pub aoa: f64,
    /// Boundary-layer overrides, e.g. from a CFD solution.
    pub delta_star_suction: Option<f64>,
    pub delta_star_pressure: Option<f64>,
    pub observer_distance: f64,
    /// Observer angles (θ from the chord line downstream, φ from the chord plane), deg.
    pub observer_theta: f64,
    pub observer_phi: f64,
    pub air_density: f64,
    pub speed_of_sound: f64,
    pub kinematic_viscosity: f64,
    pub tripped: bool,
    pub te_thickness: f64,
    pub te_angle: f64,
    pub tip: TipShape,
}

impl BpmInput {
    pub fn new(chord: f64, span: f64, velocity: f64, aoa: f64, nu: f64) -> Self {
        Self {
            chord,
            span,
            velocity,
            aoa,
            delta_star_suction: None,
            delta_star_pressure: None,
            observer_distance: 1.0,
            observer_theta: 90.0,
            observer_phi: 90.0,
            air_density: AIR_DENSITY,
            speed_of_sound: SPEED_OF_SOUND,
            kinematic_viscosity: nu,
            tripped: true,
            te_thickness: 0.0,
            te_angle: 14.0,
            tip: TipShape::Rounded,
        }
    }

    pub fn from_doc(doc: &BpmInputDoc) -> Self {
        let mut b = Self::new(
            doc.chord,
            doc.span,
            doc.velocity,
            doc.aoa,
            doc.kinematic_viscosity,
        );
        b.tripped = doc.tripped;
        b.delta_star_suction = doc.delta_star_suction;
        b.delta_star_pressure = doc.delta_star_pressure;
        b
    }

    pub fn mach(&self) -> f64 {
        self.velocity / self.speed_of_sound
    }

    pub fn reynolds(&self) -> f64 {
        self.velocity * self.chord / self.kinematic_viscosity
    }

    /// Boundary layers from correlations, with any supplied δ* substituted.
    pub fn boundary_layers(&self) -> BoundaryLayers {
        let mut bl = boundary_layer(self.reynolds(), self.chord, self.aoa, self.tripped);
        if let Some(d) = self.delta_star_suction {
            bl.suction.delta_star = d;
        }
        if let Some(d) = self.delta_star_pressure {
            bl.pressure.delta_star = d;
        }
        bl
    }
}

impl Validate for BpmInput {
    fn violations(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        for (name, x) in [
            ("chord", self.chord),
            ("span", self.span),
            ("observer_distance", self.observer_distance),
            ("speed_of_sound", self.speed_of_sound),
            ("kinematic_viscosity", self.kinematic_viscosity),
            ("air_density", self.air_density),
        ] {
            if !(x > 0.0 && x.is_finite()) {
                v.push(Violation::new(name, "> 0"));
            }
        }
        if !(self.velocity > 0.0) {
            v.push(Violation::new("velocity", "> 0"));
        } else if self.mach() >= 0.3 {
            v.push(Violation::new("velocity", "Mach < 0.3"));
        }
        if !(self.te_thickness >= 0.0) {
            v.push(Violation::new("te_thickness", ">= 0"));
        }
        for (name, d) in [
            ("delta_star_suction", self.delta_star_suction),
            ("delta_star_pressure", self.delta_star_pressure),
        ] {
            if matches!(d, Some(x) if !(x > 0.0)) {
                v.push(Violation::new(name, "> 0"));
            }
        }
        v
    }
}

/// Thickness, displacement thickness and momentum thickness (m).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryLayer {
    pub delta: f64,
    pub delta_star: f64,
    pub theta: f64,
}

impl BoundaryLayer {
    pub fn shape_factor(&self) -> f64 {
        self.delta_star / self.theta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryLayers {
    pub suction: BoundaryLayer,
    pub pressure: BoundaryLayer,
}

fn p10(x: f64) -> f64 {
    10f64.powf(x)
}

/// Trailing-edge boundary layers at chord Reynolds number `re`, `aoa` in degrees.
pub fn boundary_layer(re: f64, chord: f64, aoa: f64, tripped: bool) -> BoundaryLayers {
    let l = re.log10();
    let a = aoa.abs();
    let (d0, ds0, t0) = if tripped {
        let d0 = p10(1.892 - 0.9045 * l + 0.0596 * l * l);
        let (ds0, t0) = if re <= 3e5 {
            (0.0601 * re.powf(-0.114), 0.0723 * re.powf(-0.1765))
        } else {
            (
                p10(3.411 - 1.5397 * l + 0.1059 * l * l),
                p10(0.5578 - 0.7079 * l + 0.0404 * l * l),
            )
        };
        (d0, ds0, t0)
    } else {
        (
            p10(1.6569 - 0.9045 * l + 0.0596 * l * l),
            p10(3.0187 - 1.5397 * l + 0.1059 * l * l),
            p10(0.2021 - 0.7079 * l + 0.0404 * l * l),
        )
    };
    let pressure = BoundaryLayer {
        delta: chord * d0 * p10(-0.04175 * a + 0.00106 * a * a),
        delta_star: chord * ds0 * p10(-0.0432 * a + 0.00113 * a * a),
        theta: chord * t0 * p10(-0.04508 * a + 0.000873 * a * a),
    };
    let (sd, sds, st) = if tripped {
        if a <= 5.0 {
            (p10(0.0311 * a), p10(0.0679 * a), p10(0.0559 * a))
        } else if a <= 12.5 {
            (
                0.3468 * p10(0.1231 * a),
                0.381 * p10(0.1516 * a),
                0.6984 * p10(0.0869 * a),
            )
        } else {
            (
                5.718 * p10(0.0258 * a),
                14.296 * p10(0.0258 * a),
                4.0846 * p10(0.0258 * a),
            )
        }
    } else if a <= 7.5 {
        (p10(0.03114 * a), p10(0.0679 * a), p10(0.0559 * a))
    } else if a <= 12.5 {
        (
            0.0303 * p10(0.2336 * a),
            0.0162 * p10(0.3066 * a),
            0.0633 * p10(0.2157 * a),
        )
    } else {
        (
            12.0 * p10(0.0258 * a),
            52.42 * p10(0.0258 * a),
            14.977 * p10(0.0258 * a),
        )
    };
    let suction = BoundaryLayer {
        delta: chord * d0 * sd,
        delta_star: chord * ds0 * sds,
        theta: chord * t0 * st,
    };
    BoundaryLayers { suction, pressure }
}

/// High-frequency (cardioid) directivity; 1 at θ = φ = 90°.
pub fn directivity_high(theta: f64, phi: f64, mach: f64) -> f64 {
    let (t, p) = (theta.to_radians(), phi.to_radians());
    let mc = 0.8 * mach;
    2.0 * (t / 2.0).sin().powi(2) * p.sin().powi(2)
        / ((1.0 + mach * t.cos()) * (1.0 + (mach - mc) * t.cos()).powi(2))
}

/// Low-frequency (dipole) directivity; 1 at θ = φ = 90°.
pub fn directivity_low(theta: f64, phi: f64, mach: f64) -> f64 {
    let (t, p) = (theta.to_radians(), phi.to_radians());
    t.sin().powi(2) * p.sin().powi(2) / (1.0 + mach * t.cos()).powi(4)
}

fn a_min(a: f64) -> f64 {
    if a < 0.204 {
        (67.552 - 886.788 * a * a).sqrt() - 8.219
    } else if a <= 0.244 {
        -32.665 * a + 3.981
    } else {
        -142.795 * a.powi(3) + 103.656 * a * a - 57.757 * a + 6.006
    }
}

fn a_max(a: f64) -> f64 {
    if a < 0.13 {
        (67.552 - 886.788 * a * a).sqrt() - 8.219
    } else if a <= 0.321 {
        -15.901 * a + 1.098
    } else {
        -4.669 * a.powi(3) + 3.491 * a * a - 16.699 * a + 1.149
    }
}

fn b_min(b: f64) -> f64 {
    if b < 0.13 {
        (16.888 - 886.788 * b * b).sqrt() - 4.109
    } else if b <= 0.145 {
        -83.607 * b + 8.138
    } else {
        -817.81 * b.powi(3) + 355.21 * b * b - 135.024 * b + 10.619
    }
}

fn b_max(b: f64) -> f64 {
    if b < 0.10 {
        (16.888 - 886.788 * b * b).sqrt() - 4.109
    } else if b <= 0.187 {
        -31.33 * b + 1.854
    } else {
        -80.541 * b.powi(3) + 44.174 * b * b - 39.381 * b + 2.344
    }
}

/// Spectral shape A(St/St_peak) interpolated between A_min and A_max at Re.
fn shape_a(ratio: f64, re: f64) -> f64 {
    let a = ratio.log10().abs();
    let a0 = if re < 9.52e4 {
        0.57
    } else if re <= 8.57e5 {
        -9.57e-13 * (re - 8.57e5).powi(2) + 1.13
    } else {
        1.13
    };
    let r = (-20.0 - a_min(a0)) / (a_max(a0) - a_min(a0));
    a_min(a) + r * (a_max(a) - a_min(a))
}

fn shape_b(ratio: f64, re: f64) -> f64 {
    let b = ratio.log10().abs();
    let b0 = if re < 9.52e4 {
        0.30
    } else if re <= 8.57e5 {
        -4.48e-13 * (re - 8.57e5).powi(2) + 0.56
    } else {
        0.56
    };
    let r = (-20.0 - b_min(b0)) / (b_max(b0) - b_min(b0));
    b_min(b) + r * (b_max(b) - b_min(b))
}

fn amplitude_k1(re: f64) -> f64 {
    if re < 2.47e5 {
        -4.31 * re.log10() + 156.3
    } else if re <= 8.0e5 {
        -9.0 * re.log10() + 181.6
    } else {
        128.5
    }
}

/// Turbulent-boundary-layer trailing-edge noise (pressure + suction sides) and
/// separation noise at one frequency.
fn tbl_te(f: f64, inp: &BpmInput, bl: &BoundaryLayers) -> (f64, f64) {
    let m = inp.mach();
    let u = inp.velocity;
    let re = inp.reynolds();
    let alpha = inp.aoa.abs();
    let (dsp, dss) = (bl.pressure.delta_star, bl.suction.delta_star);
    let r2 = inp.observer_distance.powi(2);
    let dh = directivity_high(inp.observer_theta, inp.observer_phi, m);
    let dl = directivity_low(inp.observer_theta, inp.observer_phi, m);

    let st1 = 0.02 * m.powf(-0.6);
    let st2 = if alpha < 1.33 {
        st1
    } else if alpha <= 12.5 {
        st1 * p10(0.0054 * (alpha - 1.33).powi(2))
    } else {
        st1 * 4.72
    };
    let st_mean = 0.5 * (st1 + st2);
    let (stp, sts) = (f * dsp / u, f * dss / u);
    let k1 = amplitude_k1(re);
    let r_dsp = u * dsp / inp.kinematic_viscosity;
    let dk1 = if r_dsp <= 5000.0 {
        alpha * (1.43 * r_dsp.log10() - 5.29)
    } else {
        0.0
    };
    let gamma = 27.094 * m + 3.31;
    let gamma0 = 23.43 * m + 4.651;
    let beta = 72.65 * m + 10.74;
    let beta0 = -34.19 * m - 13.82;
    let k2 = if alpha < gamma0 - gamma {
        k1 - 1000.0
    } else if alpha <= gamma0 + gamma {
        k1 + (beta * beta - (beta / gamma).powi(2) * (alpha - gamma0).powi(2))
            .max(0.0)
            .sqrt()
            + beta0
    } else {
        k1 - 12.0
    };

    let scale_s = 10.0 * (dss * m.powi(5) * inp.span / r2).log10();
    if alpha > 12.5 || alpha > gamma0 {
        let sep = scale_s + 10.0 * dl.log10() + shape_a(sts / st2, 3.0 * re) + k2;
        return (f64::NEG_INFINITY, sep);
    }
    let dhl = 10.0 * dh.log10();
    let spl_p =
        10.0 * (dsp * m.powi(5) * inp.span / r2).log10() + dhl + shape_a(stp / st1, re) + k1 - 3.0
            + dk1;
    let spl_s = scale_s + dhl + shape_a(sts / st_mean, re) + k1 - 3.0;
    let sep = scale_s + dhl + shape_b(sts / st2, re) + k2;
    (energetic_sum([spl_p, spl_s]), sep)
}

fn lbl_vs(f: f64, inp: &BpmInput, bl: &BoundaryLayers) -> f64 {
    let m = inp.mach();
    let u = inp.velocity;
    let re = inp.reynolds();
    let alpha = inp.aoa.abs();
    let dp = bl.pressure.delta;
    let st1 = if re <= 1.3e5 {
        0.18
    } else if re <= 4.0e5 {
        0.001756 * re.powf(0.3931)
    } else {
        0.28
    };
    let st_peak = st1 * p10(-0.04 * alpha);
    let e = (f * dp / u) / st_peak;
    let le = e.log10();
    let g1 = if e <= 0.5974 {
        39.8 * le - 11.12
    } else if e <= 0.8545 {
        98.409 * le + 2.0
    } else if e <= 1.17 {
        -5.076 + (2.484 - 506.25 * le * le).max(0.0).sqrt()
    } else if e <= 1.674 {
        -98.409 * le + 2.0
    } else {
        -39.8 * le - 11.12
    };
    let rc0 = if alpha <= 3.0 {
        p10(0.215 * alpha + 4.978)
    } else {
        p10(0.120 * alpha + 5.263)
    };
    let d = re / rc0;
    let ld = d.log10();
    let g2 = if d <= 0.3237 {
        77.852 * ld + 15.328
    } else if d <= 0.5689 {
        65.188 * ld + 9.125
    } else if d <= 1.7579 {
        -114.052 * ld * ld
    } else if d <= 3.0889 {
        -65.188 * ld + 9.125
    } else {
        -77.852 * ld + 15.328
    };
    let g3 = 171.04 - 3.03 * alpha;
    let dh = directivity_high(inp.observer_theta, inp.observer_phi, m);
    10.0 * (dp * m.powi(5) * inp.span * dh / inp.observer_distance.powi(2)).log10() + g1 + g2 + g3
}

fn tip_vortex(f: f64, inp: &BpmInput) -> f64 {
    let m = inp.mach();
    let alpha = inp.aoa.abs();
    let l_over_c = match inp.tip {
        TipShape::Rounded => 0.008 * alpha,
        TipShape::Flat if alpha <= 2.0 => 0.0230 + 0.0169 * alpha,
        TipShape::Flat => 0.0378 + 0.0095 * alpha,
    };
    let ell = l_over_c * inp.chord;
    if ell <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let m_max = m * (1.0 + 0.036 * alpha);
    let u_max = m_max * inp.speed_of_sound;
    let st = f * ell / u_max;
    let dh = directivity_high(inp.observer_theta, inp.observer_phi, m);
    10.0 * (m * m * m_max * m_max * ell * ell * dh / inp.observer_distance.powi(2)).log10()
        - 30.5 * (st.log10() + 0.3).powi(2)
        + 126.0
}

fn g5_curve(h_ratio: f64, eta: f64) -> f64 {
    let mu = if h_ratio < 0.25 {
        0.1221
    } else if h_ratio < 0.62 {
        -0.2175 * h_ratio + 0.1755
    } else if h_ratio < 1.15 {
        -0.0308 * h_ratio + 0.0596
    } else {
        0.0242
    };
    let m = if h_ratio <= 0.02 {
        0.0
    } else if h_ratio <= 0.5 {
        68.724 * h_ratio - 1.35
    } else if h_ratio <= 0.62 {
        308.475 * h_ratio - 121.23
    } else if h_ratio <= 1.15 {
        224.811 * h_ratio - 69.35
    } else if h_ratio <= 1.2 {
        1583.28 * h_ratio - 1631.59
    } else {
        268.344
    };
    let eta0 = -((m * m * mu.powi(4)) / (6.25 + m * m * mu * mu)).sqrt();
    let k = 2.5 * (1.0 - (eta0 / mu).powi(2)).max(0.0).sqrt() - 2.5 - m * eta0;
    if eta < eta0 {
        m * eta + k
    } else if eta < 0.0 {
        2.5 * (1.0 - (eta / mu).powi(2)).max(0.0).sqrt() - 2.5
    } else if eta < 0.03616 {
        (1.5625 - 1194.99 * eta * eta).max(0.0).sqrt() - 1.25
    } else {
        -155.543 * eta + 4.375
    }
}

fn blunt_te(f: f64, inp: &BpmInput, bl: &BoundaryLayers) -> f64 {
    let h = inp.te_thickness;
    if h <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let m = inp.mach();
    let psi = inp.te_angle;
    let ds_avg = 0.5 * (bl.pressure.delta_star + bl.suction.delta_star);
    let hr = h / ds_avg;
    let st_peak = if hr >= 0.2 {
        (0.212 - 0.0045 * psi) / (1.0 + 0.235 / hr - 0.0132 / (hr * hr))
    } else {
        0.1 * hr + 0.095 - 0.00243 * psi
    };
    let eta = ((f * h / inp.velocity) / st_peak).log10();
    let g4 = if hr <= 5.0 {
        17.5 * hr.log10() + 157.5 - 1.114 * psi
    } else {
        169.7 - 1.114 * psi
    };
    let hr0 = 6.724 * hr * hr - 4.019 * hr + 1.107;
    let g5_0 = g5_curve(hr0, eta);
    let g5_14 = g5_curve(hr, eta);
    let g5 = g5_0 + 0.0714 * psi * (g5_14 - g5_0);
    let dh = directivity_high(inp.observer_theta, inp.observer_phi, m);
    10.0 * (h * m.powf(5.5) * inp.span * dh / inp.observer_distance.powi(2)).log10() + g4 + g5
}

/// 10·log₁₀ Σ 10^(Lᵢ/10); −∞ terms contribute nothing.
pub fn energetic_sum<I: IntoIterator<Item = f64>>(levels: I) -> f64 {
    let s: f64 = levels
        .into_iter()
        .filter(|l| l.is_finite())
        .map(|l| p10(l / 10.0))
        .sum();
    if s > 0.0 {
        10.0 * s.log10()
    } else {
        f64::NEG_INFINITY
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub frequencies: Vec<f64>,
    pub mechanisms: Vec<(Mechanism, Vec<f64>)>,
    pub total: Vec<f64>,
}

/// Per-mechanism and total third-octave band levels at `frequencies`.
pub fn spl_spectrum(
    input: &BpmInput,
    frequencies: &[f64],
    mechanisms: &[Mechanism],
    band: Band,
) -> Result<Spectrum, AcousticError> {
    if mechanisms.is_empty() {
        return Err(AcousticError::NoMechanisms);
    }
    let bad = input.violations();
    if !bad.is_empty() {
        return Err(AcousticError::InvalidInput(
            bad.iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join("; "),
        ));
    }
    if let Some(&f) = frequencies.iter().find(|&&f| !band.contains(f)) {
        return Err(AcousticError::FrequencyOutOfRange(f, band.min, band.max));
    }
    let mut selected: Vec<Mechanism> = mechanisms.to_vec();
    selected.sort();
    selected.dedup();
    let bl = input.boundary_layers();
    let mut rows: Vec<(Mechanism, Vec<f64>)> = selected
        .iter()
        .map(|&m| (m, Vec::with_capacity(frequencies.len())))
        .collect();
    for &f in frequencies {
        let (tbl, sep) = tbl_te(f, input, &bl);
        for (m, levels) in rows.iter_mut() {
            levels.push(match m {
                Mechanism::TblTe => tbl,
                Mechanism::Separation => sep,
                Mechanism::LblVs => lbl_vs(f, input, &bl),
                Mechanism::BluntTe => blunt_te(f, input, &bl),
                Mechanism::TipVortex => tip_vortex(f, input),
            });
        }
    }
    let total = (0..frequencies.len())
        .map(|i| energetic_sum(rows.iter().map(|(_, l)| l[i])))
        .collect();
    Ok(Spectrum {
        frequencies: frequencies.to_vec(),
        mechanisms: rows,
        total,
    })
}

pub fn oaspl(levels: &[f64]) -> f64 {
    energetic_sum(levels.iter().copied())
}

fn r_a(f: f64) -> f64 {
    let f2 = f * f;
    12194f64.powi(2) * f2 * f2
        / ((f2 + 20.6f64.powi(2))
            * ((f2 + 107.7f64.powi(2)) * (f2 + 737.9f64.powi(2))).sqrt()
            * (f2 + 12194f64.powi(2)))
}

fn r_c(f: f64) -> f64 {
    let f2 = f * f;
    12194f64.powi(2) * f2 / ((f2 + 20.6f64.powi(2)) * (f2 + 12194f64.powi(2)))
}

/// A-weighting correction (dB), exactly zero at 1 kHz.
pub fn a_weighting(f: f64) -> f64 {
    20.0 * (r_a(f) / r_a(1000.0)).log10()
}

/// C-weighting correction (dB), exactly zero at 1 kHz.
pub fn c_weighting(f: f64) -> f64 {
    20.0 * (r_c(f) / r_c(1000.0)).log10()
}

pub fn oaspl_a(frequencies: &[f64], levels: &[f64]) -> f64 {
    energetic_sum(
        frequencies
            .iter()
            .zip(levels)
            .map(|(&f, &l)| l + a_weighting(f)),
    )
}

pub fn oaspl_c(frequencies: &[f64], levels: &[f64]) -> f64 {
    energetic_sum(
        frequencies
            .iter()
            .zip(levels)
            .map(|(&f, &l)| l + c_weighting(f)),
    )
}

/// Exact base-10 band edges for a nominal centre.
pub fn band_edges(nominal: f64) -> (f64, f64) {
    let k = (10.0 * (nominal / 1000.0).log10()).round();
    let fc = 1000.0 * p10(k / 10.0);
    (fc * p10(-0.05), fc * p10(0.05))
}

/// Band levels of a third-octave spectrum at the requested nominal centres.
pub fn third_octave(
    frequencies: &[f64],
    levels: &[f64],
    centers: &[f64],
) -> Result<Vec<(f64, f64)>, AcousticError> {
    centers
        .iter()
        .map(|&c| {
            frequencies
                .iter()
                .position(|&f| (f / c - 1.0).abs() < 1e-6)
                .map(|i| (c, levels[i]))
                .ok_or(AcousticError::BandOutOfRange(c))
        })
        .collect()
}

/// Integrates a narrowband PSD (dB re p_ref²/Hz) into third-octave band levels.
pub fn psd_to_third_octave(
    frequencies: &[f64],
    psd_db: &[f64],
    centers: &[f64],
) -> Result<Vec<(f64, f64)>, AcousticError> {
    let (fmin, fmax) = match (frequencies.first(), frequencies.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => return Err(AcousticError::InvalidInput("empty spectrum".into())),
    };
    let power = |f: f64| -> f64 {
        let i = frequencies
            .partition_point(|&x| x < f)
            .clamp(1, frequencies.len() - 1);
        let (f0, f1) = (frequencies[i - 1], frequencies[i]);
        let t = if f1 > f0 { (f - f0) / (f1 - f0) } else { 0.0 };
        p10((psd_db[i - 1] + t * (psd_db[i] - psd_db[i - 1])) / 10.0)
    };
    centers
        .iter()
        .map(|&c| {
            let (lo, hi) = band_edges(c);
            if lo < fmin * (1.0 - 1e-9) || hi > fmax * (1.0 + 1e-9) {
                return Err(AcousticError::BandOutOfRange(c));
            }
            const N: usize = 256;
            let h = (hi - lo) / N as f64;
            let sum: f64 = (0..N).map(|k| power(lo + (k as f64 + 0.5) * h) * h).sum();
            Ok((c, 10.0 * sum.log10()))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectivityPoint {
    pub theta: f64,
    pub phi: f64,
    pub oaspl: f64,
    /// Level relative to the perpendicular observer.
    pub relative: f64,
}

/// OASPL over an observer angle grid at fixed distance.
pub fn directivity(
    input: &BpmInput,
    angles: &[(f64, f64)],
    mechanisms: &[Mechanism],
    band: Band,
) -> Result<Vec<DirectivityPoint>, AcousticError> {
    let freqs = band.centers();
    let mut reference = input.clone();
    reference.observer_theta = 90.0;
    reference.observer_phi = 90.0;
    let ref_level = oaspl(&spl_spectrum(&reference, &freqs, mechanisms, band)?.total);
    angles
        .iter()
        .map(|&(theta, phi)| {
            let mut i = input.clone();
            i.observer_theta = theta;
            i.observer_phi = phi;
            let level = oaspl(&spl_spectrum(&i, &freqs, mechanisms, band)?.total);
            Ok(DirectivityPoint {
                theta,
                phi,
                oaspl: level,
                relative: level - ref_level,
            })
        })
        .collect()
}

/// Full metric set for one observer.
pub fn analyze(
    input: &BpmInput,
    mechanisms: &[Mechanism],
    band: Band,
) -> Result<AcousticResult, AcousticError> {
    let freqs = band.centers();
    let s = spl_spectrum(input, &freqs, mechanisms, band)?;
    let third = third_octave(&s.frequencies, &s.total, &freqs)?;
    Ok(AcousticResult {
        oaspl: oaspl(&s.total),
        oaspl_dba: oaspl_a(&s.frequencies, &s.total),
        mechanisms: s
            .mechanisms
            .iter()
            .map(|(m, l)| MechanismSpl {
                mechanism: m.as_str().to_string(),
                spl: l.clone(),
            })
            .collect(),
        total_spl: s.total,
        frequencies: s.frequencies,
        third_octave: third,
        observer_distance: input.observer_distance,
        observer_angle: input.observer_theta,
    })
}

/// Observer distances evaluated for every case.
pub const OBSERVER_DISTANCES: [f64; 2] = [1.0, 2.0];

/// Reads the case's BPM input, evaluates every observer and writes the
/// integrated acoustics tables. Returns one result per observer distance.
pub fn run_case(
    ws: &ProjectWorkspace,
    case_id: &str,
    band: Band,
) -> Result<Vec<AcousticResult>, AcousticError> {
    let role = AgentRole::Acoustics;
    let raw = ws.read_for(role, &format!("{case_id}/{}", crate::aero::BPM_INPUT_JSON))?;
    let doc: BpmInputDoc =
        serde_json::from_slice(&raw).map_err(|e| AcousticError::InvalidInput(e.to_string()))?;
    let base = BpmInput::from_doc(&doc);
    let mechanisms = Mechanism::defaults(base.tripped);
    let mut results = Vec::new();
    for r in OBSERVER_DISTANCES {
        let mut i = base.clone();
        i.observer_distance = r;
        results.push(analyze(&i, &mechanisms, band)?);
    }
    let main = &results[0];

    let mut metrics = String::from("observer_distance_m,observer_angle_deg,oaspl_db,oaspl_dba,oaspl_dbc,peak_frequency_hz,peak_spl_db\n");
    for r in &results {
        let (pf, ps) = r.frequencies.iter().zip(&r.total_spl).fold(
            (0.0, f64::NEG_INFINITY),
            |acc, (&f, &l)| if l > acc.1 { (f, l) } else { acc },
        );
        let _ = writeln!(
            metrics,
            "{},{},{:.4},{:.4},{:.4},{},{:.4}",
            r.observer_distance,
            r.observer_angle,
            r.oaspl,
            r.oaspl_dba,
            oaspl_c(&r.frequencies, &r.total_spl),
            pf,
            ps
        );
    }
    let mut third = String::from("center_hz,lower_hz,upper_hz,spl_db,spl_dba\n");
    for &(c, l) in &main.third_octave {
        let (lo, hi) = band_edges(c);
        let _ = writeln!(
            third,
            "{c},{lo:.3},{hi:.3},{l:.4},{:.4}",
            l + a_weighting(c)
        );
    }
    let mut spectrum = String::from("frequency_hz");
    for m in &main.mechanisms {
        let _ = write!(spectrum, ",{}", m.mechanism);
    }
    spectrum.push_str(",total\n");
    for (i, f) in main.frequencies.iter().enumerate() {
        let _ = write!(spectrum, "{f}");
        for m in &main.mechanisms {
            let _ = write!(spectrum, ",{:.4}", m.spl[i]);
        }
        let _ = writeln!(spectrum, ",{:.4}", main.total_spl[i]);
    }
    for (path, body) in [
        (METRICS_PATH, metrics),
        (THIRD_OCTAVE_PATH, third),
        (SPECTRUM_PATH, spectrum),
    ] {
        ws.publish(
            ArtifactRecord::new(format!("{case_id}/{path}"), role),
            body.as_bytes(),
        )?;
    }
    Ok(results)
}

/// One row of the airfoil self-noise table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelfNoiseRow {
    pub frequency: f64,
    pub aoa: f64,
    pub chord: f64,
    pub velocity: f64,
    pub delta_star: f64,
    /// Scaled sound pressure level, dB.
    pub spl: f64,
}

/// Parses the whitespace/tab separated six-column table.
pub fn parse_self_noise(text: &str) -> Result<Vec<SelfNoiseRow>, AcousticError> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (n, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| AcousticError::Dataset(e.to_string()))?;
        let fields: Vec<&str> = rec.iter().flat_map(|f| f.split_whitespace()).collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 6 {
            return Err(AcousticError::Dataset(format!(
                "line {}: expected 6 columns, got {}",
                n + 1,
                fields.len()
            )));
        }
        let v: Vec<f64> = fields
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| AcousticError::Dataset(format!("line {}: {e}", n + 1)))?;
        rows.push(SelfNoiseRow {
            frequency: v[0],
            aoa: v[1],
            chord: v[2],
            velocity: v[3],
            delta_star: v[4],
            spl: v[5],
        });
    }
    Ok(rows)
}

pub fn load_self_noise(path: &Path) -> Result<Vec<SelfNoiseRow>, AcousticError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| AcousticError::Dataset(format!("{}: {e}", path.display())))?;
    parse_self_noise(&text)
}

/// Wind-tunnel setup of the self-noise measurements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TunnelSetup {
    pub observer_distance: f64,
    pub span: f64,
    pub speed_of_sound: f64,
    pub kinematic_viscosity: f64,
}

impl Default for TunnelSetup {
    fn default() -> Self {
        Self {
            observer_distance: 1.22,
            span: 0.4572,
            speed_of_sound: 340.46,
            kinematic_viscosity: 1.4529e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationCase {
    pub chord: f64,
    pub velocity: f64,
    pub aoa: f64,
    pub rows: usize,
    pub rmse: f64,
    /// (frequency, predicted scaled SPL, measured scaled SPL)
    pub points: Vec<(f64, f64, f64)>,
}

/// Compares predicted (tripped, default mechanisms) against measured levels in
/// the table's scaled form, SPL − 10·log₁₀(δ*·M⁵·L/r²), per operating case.
pub fn validate_against(
    rows: &[SelfNoiseRow],
    setup: TunnelSetup,
    band: Band,
) -> Result<Vec<ValidationCase>, AcousticError> {
    let mut groups: BTreeMap<(u64, u64, u64), Vec<&SelfNoiseRow>> = BTreeMap::new();
    for r in rows.iter().filter(|r| band.contains(r.frequency)) {
        groups
            .entry((r.chord.to_bits(), r.velocity.to_bits(), r.aoa.to_bits()))
            .or_default()
            .push(r);
    }
    let mut out = Vec::new();
    for group in groups.values() {
        let first = group[0];
        let mut input = BpmInput::new(
            first.chord,
            setup.span,
            first.velocity,
            first.aoa,
            setup.kinematic_viscosity,
        );
        input.speed_of_sound = setup.speed_of_sound;
        input.observer_distance = setup.observer_distance;
        let mut freqs: Vec<f64> = group.iter().map(|r| r.frequency).collect();
        freqs.sort_by(f64::total_cmp);
        freqs.dedup();
        let s = spl_spectrum(&input, &freqs, &Mechanism::defaults(true), band)?;
        let m5 = input.mach().powi(5);
        let mut points = Vec::new();
        for r in group {
            let i = freqs.iter().position(|&f| f == r.frequency).unwrap_or(0);
            let offset =
                10.0 * (r.delta_star * m5 * setup.span / setup.observer_distance.powi(2)).log10();
            points.push((r.frequency, s.total[i] - offset, r.spl));
        }
        let mse = points.iter().map(|(_, p, m)| (p - m).powi(2)).sum::<f64>() / points.len() as f64;
        out.push(ValidationCase {
            chord: first.chord,
            velocity: first.velocity,
            aoa: first.aoa,
            rows: points.len(),
            rmse: mse.sqrt(),
            points,
        });
    }
    Ok(out)
}

/// Bundled benchmark rows of the self-noise table.
pub fn bundled_self_noise() -> Vec<SelfNoiseRow> {
    parse_self_noise(include_str!("../data/self_noise_fixture.dat"))
        .expect("bundled fixture parses")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> BpmInput {
        BpmInput::new(0.1, 0.2, 30.0, 3.0, 1.5e-5)
    }

    #[test]
    fn zero_incidence_sides_match() {
        for tripped in [true, false] {
            let bl = boundary_layer(3e5, 0.1, 0.0, tripped);
            assert_eq!(bl.suction, bl.pressure);
        }
    }

    #[test]
    fn thickness_trends() {
        let a = boundary_layer(3e5, 1.0, 4.0, true);
        let b = boundary_layer(6e5, 1.0, 4.0, true);
        assert!(b.pressure.delta_star < a.pressure.delta_star);
        let mut prev = boundary_layer(3e5, 1.0, 0.0, true);
        for k in 1..=24 {
            let cur = boundary_layer(3e5, 1.0, f64::from(k) * 0.5, true);
            assert!(cur.suction.delta_star > prev.suction.delta_star);
            assert!(cur.pressure.delta_star < prev.pressure.delta_star);
            prev = cur;
        }
    }

    #[test]
    fn tripped_reference_thickness() {
        // row δ* of the 71.3 m/s benchmark case
        let bl = boundary_layer(71.3 * 0.3048 / 1.4529e-5, 0.3048, 0.0, true);
        assert!((bl.suction.delta_star / 0.00266337 - 1.0).abs() < 1e-4);
    }

    #[test]
    fn directivity_reference_and_symmetry() {
        assert!((directivity_high(90.0, 90.0, 0.1) - 1.0).abs() < 1e-12);
        assert!((directivity_low(90.0, 90.0, 0.1) - 1.0).abs() < 1e-12);
        for t in [30.0, 60.0, 120.0] {
            for p in [20.0, 45.0, 80.0] {
                let m = 0.09;
                assert!((directivity_high(t, p, m) - directivity_high(t, -p, m)).abs() < 1e-12);
                assert!(
                    (directivity_low(t, p, m) - directivity_low(t, 180.0 - p, m)).abs() < 1e-12
                );
            }
        }
    }

    #[test]
    fn perpendicular_pattern_matches_reference() {
        let b = base();
        let mech = Mechanism::defaults(true);
        let p = directivity(
            &b,
            &[(90.0, 90.0), (45.0, 90.0), (30.0, 60.0)],
            &mech,
            Band::DEFAULT,
        )
        .unwrap();
        let reference = analyze(&b, &mech, Band::DEFAULT).unwrap().oaspl;
        assert!((p[0].oaspl - reference).abs() < 1e-12 && p[0].relative.abs() < 1e-12);
        assert!(p[2].relative < 0.0);
    }

    #[test]
    fn energetic_sums() {
        assert_eq!(oaspl(&[80.0]), 80.0);
        assert!((energetic_sum([70.0, 70.0]) - (70.0 + 10.0 * 2f64.log10())).abs() < 1e-12);
        assert_eq!(energetic_sum([f64::NEG_INFINITY, 55.0]), 55.0);
        assert_eq!(energetic_sum([f64::NEG_INFINITY]), f64::NEG_INFINITY);
    }

    #[test]
    fn single_mechanism_total_is_identity() {
        let f = Band::DEFAULT.centers();
        let s = spl_spectrum(&base(), &f, &[Mechanism::TblTe], Band::DEFAULT).unwrap();
        assert_eq!(s.total, s.mechanisms[0].1);
    }

    #[test]
    fn weighting_curves() {
        assert_eq!(a_weighting(1000.0), 0.0);
        assert_eq!(c_weighting(1000.0), 0.0);
        // tabulated IEC 61672 values
        assert!((a_weighting(100.0) + 19.1).abs() < 0.1);
        assert!((a_weighting(10_000.0) + 2.5).abs() < 0.1);
        assert!((c_weighting(100.0) + 0.3).abs() < 0.1);
        assert!((c_weighting(31.5) + 3.0).abs() < 0.1);
    }

    #[test]
    fn a_weighted_below_flat_for_low_frequency_content() {
        let f = [100.0, 125.0, 160.0, 200.0];
        let l = [90.0, 85.0, 80.0, 70.0];
        assert!(oaspl_a(&f, &l) < oaspl(&l));
    }

    #[test]
    fn flat_psd_has_equal_bandwidth_corrected_levels() {
        let freqs: Vec<f64> = (0..=20_000).map(|i| 50.0 + i as f64).collect();
        let psd = vec![40.0; freqs.len()];
        let centers = Band::DEFAULT.centers();
        let bands = psd_to_third_octave(&freqs, &psd, &centers).unwrap();
        for (c, l) in bands {
            let (lo, hi) = band_edges(c);
            assert!((l - 10.0 * (hi - lo).log10() - 40.0).abs() < 1e-6);
        }
        assert!(matches!(
            psd_to_third_octave(&freqs, &psd, &[20.0]),
            Err(AcousticError::BandOutOfRange(_))
        ));
    }

    #[test]
    fn third_octave_requires_coverage() {
        let f = Band::DEFAULT.centers();
        let s = spl_spectrum(&base(), &f, &Mechanism::defaults(true), Band::DEFAULT).unwrap();
        assert_eq!(
            third_octave(&s.frequencies, &s.total, &f).unwrap().len(),
            21
        );
        assert!(third_octave(&s.frequencies, &s.total, &[16000.0]).is_err());
    }

    #[test]
    fn preconditions() {
        let f = [1000.0];
        assert!(matches!(
            spl_spectrum(&base(), &f, &[], Band::DEFAULT),
            Err(AcousticError::NoMechanisms)
        ));
        assert!(matches!(
            spl_spectrum(&base(), &[50.0], &[Mechanism::TblTe], Band::DEFAULT),
            Err(AcousticError::FrequencyOutOfRange(..))
        ));
        let mut fast = base();
        fast.velocity = 120.0;
        assert!(!fast.is_valid());
    }

    #[test]
    fn all_mechanisms_evaluate() {
        let mut b = BpmInput::new(0.3048, 0.4572, 39.6, 4.0, 1.4529e-5);
        b.tripped = false;
        b.te_thickness = 0.0025;
        let f = Band::AUDIBLE.centers();
        let r = spl_spectrum(&b, &f, &Mechanism::ALL, Band::AUDIBLE).unwrap();
        for (m, levels) in &r.mechanisms {
            assert!(levels.iter().any(|l| l.is_finite() && *l > 0.0), "{m:?}");
        }
        for (i, t) in r.total.iter().enumerate() {
            for (_, l) in &r.mechanisms {
                assert!(*t >= l[i] - 1e-9);
            }
        }
    }

    #[test]
    fn lbl_vs_peaks_near_shedding_frequency() {
        let mut b = BpmInput::new(0.1016, 0.4572, 71.3, 0.0, 1.4529e-5);
        b.tripped = false;
        let f = Band::AUDIBLE.centers();
        let s = spl_spectrum(&b, &f, &[Mechanism::LblVs], Band::AUDIBLE).unwrap();
        let (imax, _) = s.mechanisms[0]
            .1
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |a, (i, &l)| if l > a.1 { (i, l) } else { a });
        let dp = b.boundary_layers().pressure.delta;
        let re = b.reynolds();
        let st1 = 0.001756 * re.powf(0.3931);
        let expect = st1 * 71.3 / dp;
        assert!(
            (f[imax] / expect).log10().abs() < 0.15,
            "{} vs {expect}",
            f[imax]
        );
    }

    #[test]
    fn stall_switch_moves_energy_to_separation() {
        let mut b = BpmInput::new(0.1, 0.2, 30.0, 15.0, 1.5e-5);
        b.aoa = 15.0;
        let s = spl_spectrum(
            &b,
            &[1000.0],
            &[Mechanism::TblTe, Mechanism::Separation],
            Band::DEFAULT,
        )
        .unwrap();
        assert_eq!(s.mechanisms[0].1[0], f64::NEG_INFINITY);
        assert!(s.mechanisms[1].1[0].is_finite());
    }

    #[test]
    fn oaspl_rises_with_velocity() {
        for aoa in 0..=6 {
            let mut last = f64::NEG_INFINITY;
            for u in [25.0, 30.0, 35.0] {
                let b = BpmInput::new(0.1, 0.2, u, f64::from(aoa), 1.5e-5);
                let o = analyze(&b, &Mechanism::defaults(true), Band::DEFAULT).unwrap();
                assert!(o.is_valid());
                assert!(o.oaspl > last);
                last = o.oaspl;
            }
        }
    }

    #[test]
    fn dataset_parser() {
        let rows = parse_self_noise(
            "800\t0\t0.3048\t71.3\t0.00266337\t126.201\n1000 0 0.3048 71.3 0.00266337 125.201\n",
        )
        .unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].spl, 125.201);
        assert!(parse_self_noise("1\t2\t3\n").is_err());
    }

    #[test]
    fn bundled_rows_validate() {
        let cases =
            validate_against(&bundled_self_noise(), TunnelSetup::default(), Band::DEFAULT).unwrap();
        assert_eq!(cases.len(), 2);
        for c in cases {
            assert!(c.rows >= 5 && c.rmse < 3.0, "{c:?}");
        }
    }
}
