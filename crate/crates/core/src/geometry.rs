//! NACA 4-digit airfoils and the idealized thin-walled wing section built on them.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::StructConfig;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("invalid NACA 4-digit designator '{0}'")]
    BadDesignator(String),
    #[error("chord fraction {0} outside [0, 1]")]
    Domain(f64),
    #[error("thickness ratio must be positive, got {0}")]
    Thickness(f64),
    #[error("camber m={m} requires 0 < p < 1, got p={p}")]
    CamberPosition { m: f64, p: f64 },
    #[error("need at least 20 points per surface, got {0}")]
    TooFewPoints(usize),
    #[error("internal members do not fit the section: {0}")]
    Overlap(String),
}

/// Trailing-edge closure of the thickness polynomial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrailingEdge {
    /// Classic coefficient −0.1015, leaves a small base at x = 1.
    #[default]
    Finite,
    /// Coefficient −0.1036, surfaces meet at x = 1.
    Closed,
}

impl TrailingEdge {
    fn x4_coefficient(self) -> f64 {
        match self {
            TrailingEdge::Finite => -0.1015,
            TrailingEdge::Closed => -0.1036,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AirfoilSpec {
    pub designator: String,
    /// maximum camber, fraction of chord
    pub m: f64,
    /// chordwise position of maximum camber, fraction of chord
    pub p: f64,
    /// maximum thickness, fraction of chord
    pub t: f64,
}

impl AirfoilSpec {
    /// Accepts `NACA4412`, `naca 4412` or bare `4412`.
    pub fn parse(s: &str) -> Result<Self, GeometryError> {
        let bad = || GeometryError::BadDesignator(s.to_string());
        let trimmed = s.trim();
        let digits = if trimmed.len() >= 4 && trimmed[..4].eq_ignore_ascii_case("naca") {
            trimmed[4..].trim_start()
        } else {
            trimmed
        };
        if digits.len() != 4 || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let d: Vec<u32> = digits.bytes().map(|b| u32::from(b - b'0')).collect();
        let m = f64::from(d[0]) / 100.0;
        let p = f64::from(d[1]) / 10.0;
        let t = f64::from(d[2] * 10 + d[3]) / 100.0;
        if t == 0.0 || (m > 0.0) != (p > 0.0) {
            return Err(bad());
        }
        Ok(Self {
            designator: format!("NACA{digits}"),
            m,
            p,
            t,
        })
    }

    pub fn is_symmetric(&self) -> bool {
        self.m == 0.0
    }
}

/// Half-thickness y_t at chord fraction `x` for thickness ratio `t`.
pub fn thickness(x: f64, t: f64) -> Result<f64, GeometryError> {
    thickness_with(x, t, TrailingEdge::Finite)
}

pub fn thickness_with(x: f64, t: f64, te: TrailingEdge) -> Result<f64, GeometryError> {
    if !(0.0..=1.0).contains(&x) {
        return Err(GeometryError::Domain(x));
    }
    if !(t > 0.0) {
        return Err(GeometryError::Thickness(t));
    }
    Ok(5.0
        * t
        * (0.2969 * x.sqrt() - 0.1260 * x - 0.3516 * x * x
            + 0.2843 * x.powi(3)
            + te.x4_coefficient() * x.powi(4)))
}

/// Mean camber line ordinate and slope at chord fraction `x`.
pub fn camber(x: f64, m: f64, p: f64) -> Result<(f64, f64), GeometryError> {
    if !(0.0..=1.0).contains(&x) {
        return Err(GeometryError::Domain(x));
    }
    if m == 0.0 {
        return Ok((0.0, 0.0));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(GeometryError::CamberPosition { m, p });
    }
    if x <= p {
        let k = m / (p * p);
        Ok((k * (2.0 * p * x - x * x), 2.0 * k * (p - x)))
    } else {
        let k = m / ((1.0 - p) * (1.0 - p));
        Ok((
            k * ((1.0 - 2.0 * p) + 2.0 * p * x - x * x),
            2.0 * k * (p - x),
        ))
    }
}

/// Surface coordinates, chord-normalized, each surface ordered leading edge to trailing edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AirfoilCoordinates {
    pub designator: String,
    pub upper: Vec<[f64; 2]>,
    pub lower: Vec<[f64; 2]>,
    /// Chordwise stations the surfaces were built on.
    pub stations: Vec<f64>,
    pub camber_line: Vec<[f64; 2]>,
}

impl AirfoilCoordinates {
    pub fn point_count(&self) -> usize {
        self.upper.len() + self.lower.len()
    }

    /// Closed outline: upper TE→LE, then lower LE→TE (a shared leading edge is not repeated).
    pub fn outline(&self) -> Vec<[f64; 2]> {
        let mut pts: Vec<[f64; 2]> = self.upper.iter().rev().copied().collect();
        let skip = usize::from(self.lower.first() == self.upper.first());
        pts.extend(self.lower.iter().skip(skip).copied());
        pts
    }

    /// Shoelace area of the closed outline (the trailing-edge base closes it).
    pub fn enclosed_area(&self) -> f64 {
        polygon_area(&self.outline()).abs()
    }

    pub fn perimeter(&self) -> f64 {
        let pts = self.outline();
        let n = pts.len();
        (0..n).map(|i| dist(pts[i], pts[(i + 1) % n])).sum()
    }

    /// Upper minus lower surface ordinate at chord fraction `x`.
    pub fn depth_at(&self, x: f64) -> f64 {
        interp_surface(&self.upper, x) - interp_surface(&self.lower, x)
    }

    pub fn mid_at(&self, x: f64) -> f64 {
        0.5 * (interp_surface(&self.upper, x) + interp_surface(&self.lower, x))
    }

    /// Selig-style listing: name line, upper TE→LE, lower LE→TE.
    pub fn to_selig(&self) -> String {
        let mut s = format!("{}\n", self.designator);
        for [x, y] in self.outline() {
            let _ = writeln!(s, " {x:.8}  {y:.8}");
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("surface,x,y\n");
        for [x, y] in &self.upper {
            let _ = writeln!(s, "upper,{x:.10},{y:.10}");
        }
        for [x, y] in &self.lower {
            let _ = writeln!(s, "lower,{x:.10},{y:.10}");
        }
        s
    }

    /// Gmsh geometry description scaled to `chord` metres.
    pub fn to_geo(&self, chord: f64, mesh_size: f64) -> String {
        let pts = self.outline();
        let mut s = String::new();
        let _ = writeln!(s, "// {} section, chord {chord} m", self.designator);
        let _ = writeln!(s, "lc = {mesh_size};");
        for (i, [x, y]) in pts.iter().enumerate() {
            let _ = writeln!(
                s,
                "Point({}) = {{{:.8}, {:.8}, 0, lc}};",
                i + 1,
                x * chord,
                y * chord
            );
        }
        let n = pts.len();
        let ids: Vec<String> = (1..=n).map(|i| i.to_string()).collect();
        let _ = writeln!(s, "Spline(1) = {{{}}};", ids.join(", "));
        let _ = writeln!(s, "Line(2) = {{{n}, 1}};");
        let _ = writeln!(s, "Curve Loop(1) = {{1, 2}};");
        let _ = writeln!(s, "Physical Curve(\"airfoil\") = {{1, 2}};");
        s
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

pub(crate) fn polygon_area(pts: &[[f64; 2]]) -> f64 {
    let n = pts.len();
    0.5 * (0..n)
        .map(|i| {
            let a = pts[i];
            let b = pts[(i + 1) % n];
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
}

fn interp_surface(surface: &[[f64; 2]], x: f64) -> f64 {
    // Surfaces may run slightly past [0, 1] after the perpendicular offset.
    let mut pts = surface.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]));
    if x <= pts[0][0] {
        return pts[0][1];
    }
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if x <= b[0] {
            if b[0] == a[0] {
                return b[1];
            }
            let s = (x - a[0]) / (b[0] - a[0]);
            return a[1] + s * (b[1] - a[1]);
        }
    }
    pts[pts.len() - 1][1]
}

/// Cosine-spaced stations from 0 to 1 inclusive.
pub fn cosine_stations(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            if i == 0 {
                0.0
            } else if i == n - 1 {
                1.0
            } else {
                0.5 * (1.0 - (PI * i as f64 / (n - 1) as f64).cos())
            }
        })
        .collect()
}

pub fn generate(spec: &AirfoilSpec, n_points: usize) -> Result<AirfoilCoordinates, GeometryError> {
    generate_with(spec, n_points, TrailingEdge::Finite)
}

/// Distributes the thickness perpendicular to the camber line at `n_points` stations per surface.
pub fn generate_with(
    spec: &AirfoilSpec,
    n_points: usize,
    te: TrailingEdge,
) -> Result<AirfoilCoordinates, GeometryError> {
    if n_points < 20 {
        return Err(GeometryError::TooFewPoints(n_points));
    }
    let stations = cosine_stations(n_points);
    let mut upper = Vec::with_capacity(n_points);
    let mut lower = Vec::with_capacity(n_points);
    let mut camber_line = Vec::with_capacity(n_points);
    for &x in &stations {
        let yt = thickness_with(x, spec.t, te)?;
        let (yc, slope) = camber(x, spec.m, spec.p)?;
        let th = slope.atan();
        let (s, c) = th.sin_cos();
        upper.push([x - yt * s, yc + yt * c]);
        lower.push([x + yt * s, yc - yt * c]);
        camber_line.push([x, yc]);
    }
    Ok(AirfoilCoordinates {
        designator: spec.designator.clone(),
        upper,
        lower,
        stations,
        camber_line,
    })
}

/// Chordwise spar stations for two or three spars.
pub fn spar_stations(n_spars: u32) -> Vec<f64> {
    match n_spars {
        0 => vec![],
        1 => vec![0.25],
        2 => vec![0.25, 0.60],
        3 => vec![0.25, 0.425, 0.60],
        n => (0..n)
            .map(|i| 0.25 + 0.35 * f64::from(i) / f64::from(n - 1))
            .collect(),
    }
}

/// Idealized thin-walled section of a constant-chord wing panel. SI units throughout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionProperties {
    pub perimeter: f64,
    pub enclosed_area: f64,
    pub shell_area: f64,
    pub spar_heights: Vec<f64>,
    pub spar_area: f64,
    pub rib_area: f64,
    pub centroid_y: f64,
    /// Second moment about the horizontal centroidal axis (m⁴).
    pub second_moment: f64,
    /// Largest distance from the neutral axis to the outer surface (m).
    pub y_max: f64,
    pub shell_volume: f64,
    pub spar_volume: f64,
    pub rib_volume: f64,
}

impl SectionProperties {
    pub fn material_volume(&self) -> f64 {
        self.shell_volume + self.spar_volume + self.rib_volume
    }
}

/// Section properties for a shell of `config.shell_thickness` with spars and ribs,
/// over a panel of length `span` (m). Member sizes in `config` are in mm.
pub fn wing_section_properties(
    coords: &AirfoilCoordinates,
    config: &StructConfig,
    chord: f64,
    span: f64,
) -> Result<SectionProperties, GeometryError> {
    let t_shell = config.shell_thickness * 1e-3;
    let w_spar = config.spar_width * 1e-3;
    let t_rib = config.rib_thickness * 1e-3;

    let outline: Vec<[f64; 2]> = coords
        .outline()
        .into_iter()
        .map(|[x, y]| [x * chord, y * chord])
        .collect();
    let n = outline.len();
    let perimeter: f64 = (0..n).map(|i| dist(outline[i], outline[(i + 1) % n])).sum();
    let enclosed_area = polygon_area(&outline).abs();
    let shell_area = perimeter * t_shell;

    let stations = spar_stations(config.n_spars);
    for w in stations.windows(2) {
        if (w[1] - w[0]) * chord <= w_spar {
            return Err(GeometryError::Overlap(format!(
                "spar width {} mm exceeds spar spacing",
                config.spar_width
            )));
        }
    }
    let mut spar_heights = Vec::with_capacity(stations.len());
    let mut spar_mids = Vec::with_capacity(stations.len());
    for &xs in &stations {
        let h = coords.depth_at(xs) * chord - 2.0 * t_shell;
        if h <= 0.0 {
            return Err(GeometryError::Overlap(format!(
                "shell {} mm leaves no room for spar at x/c = {xs}",
                config.shell_thickness
            )));
        }
        spar_heights.push(h);
        spar_mids.push(coords.mid_at(xs) * chord);
    }
    let spar_area: f64 = spar_heights.iter().map(|h| h * w_spar).sum();
    let rib_area = enclosed_area - shell_area - spar_area;
    if rib_area <= 0.0 {
        return Err(GeometryError::Overlap(
            "shell and spars fill the section".to_string(),
        ));
    }
    if f64::from(config.n_ribs) * t_rib > span {
        return Err(GeometryError::Overlap(
            "ribs exceed panel length".to_string(),
        ));
    }

    // centroid of shell strips and spar webs
    let mut area = 0.0;
    let mut first = 0.0;
    for i in 0..n {
        let (a, b) = (outline[i], outline[(i + 1) % n]);
        let da = dist(a, b) * t_shell;
        area += da;
        first += da * 0.5 * (a[1] + b[1]);
    }
    for (h, ym) in spar_heights.iter().zip(&spar_mids) {
        area += h * w_spar;
        first += h * w_spar * ym;
    }
    let centroid_y = if area > 0.0 { first / area } else { 0.0 };

    let mut second_moment = 0.0;
    for i in 0..n {
        let (a, b) = (outline[i], outline[(i + 1) % n]);
        let da = dist(a, b) * t_shell;
        let ym = 0.5 * (a[1] + b[1]) - centroid_y;
        let dy = b[1] - a[1];
        second_moment += da * (ym * ym + dy * dy / 12.0);
    }
    for (h, ym) in spar_heights.iter().zip(&spar_mids) {
        let d = ym - centroid_y;
        second_moment += w_spar * h.powi(3) / 12.0 + w_spar * h * d * d;
    }
    let y_max = outline
        .iter()
        .map(|p| (p[1] - centroid_y).abs())
        .fold(0.0, f64::max);

    Ok(SectionProperties {
        perimeter,
        enclosed_area,
        shell_area,
        spar_heights,
        spar_area,
        rib_area,
        centroid_y,
        second_moment,
        y_max,
        shell_volume: shell_area * span,
        spar_volume: spar_area * span,
        rib_volume: rib_area * t_rib * f64::from(config.n_ribs),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naca(s: &str) -> AirfoilSpec {
        AirfoilSpec::parse(s).unwrap()
    }

    #[test]
    fn parses_designators() {
        let a = naca("NACA4412");
        assert_eq!((a.m, a.p, a.t), (0.04, 0.4, 0.12));
        let s = naca("0015");
        assert_eq!((s.m, s.p, s.t), (0.0, 0.0, 0.15));
        assert!(s.is_symmetric());
        assert!(AirfoilSpec::parse("NACA23012").is_err());
        assert!(AirfoilSpec::parse("NACA4012").is_err());
        assert!(AirfoilSpec::parse("NACA0000").is_err());
    }

    #[test]
    fn thickness_at_leading_edge_is_zero() {
        assert_eq!(thickness(0.0, 0.12).unwrap(), 0.0);
    }

    #[test]
    fn thickness_at_trailing_edge() {
        // 5 * 0.12 * (0.2969 - 0.1260 - 0.3516 + 0.2843 - 0.1015) = 0.6 * 0.0021
        let yt = thickness(1.0, 0.12).unwrap();
        assert!((yt - 0.00126).abs() < 1e-12, "{yt}");
        assert!(
            thickness_with(1.0, 0.12, TrailingEdge::Closed)
                .unwrap()
                .abs()
                < 1e-12
        );
    }

    #[test]
    fn thickness_rejects_bad_domain() {
        assert_eq!(thickness(1.5, 0.12), Err(GeometryError::Domain(1.5)));
        assert_eq!(thickness(0.5, 0.0), Err(GeometryError::Thickness(0.0)));
    }

    #[test]
    fn max_thickness_is_t_near_thirty_percent() {
        let n = 100_000;
        let (mut best, mut at) = (0.0, 0.0);
        for i in 0..=n {
            let x = i as f64 / n as f64;
            let v = 2.0 * thickness(x, 0.12).unwrap();
            if v > best {
                best = v;
                at = x;
            }
        }
        assert!((best - 0.12).abs() < 1e-3, "{best}");
        assert!((at - 0.30).abs() < 0.01, "{at}");
    }

    #[test]
    fn symmetric_camber_is_flat() {
        for i in 0..=10 {
            assert_eq!(camber(i as f64 / 10.0, 0.0, 0.0).unwrap(), (0.0, 0.0));
        }
    }

    #[test]
    fn camber_peaks_at_p() {
        let (yc, slope) = camber(0.4, 0.04, 0.4).unwrap();
        assert!((yc - 0.04).abs() < 1e-15);
        assert!(slope.abs() < 1e-15);
    }

    #[test]
    fn camber_is_continuous_at_p() {
        let eps = 1e-7;
        let a = camber(0.4 - eps, 0.04, 0.4).unwrap().0;
        let b = camber(0.4 + eps, 0.04, 0.4).unwrap().0;
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn camber_requires_position() {
        assert!(matches!(
            camber(0.5, 0.02, 0.0),
            Err(GeometryError::CamberPosition { .. })
        ));
    }

    #[test]
    fn generate_needs_twenty_points() {
        assert_eq!(
            generate(&naca("0012"), 19),
            Err(GeometryError::TooFewPoints(19))
        );
    }

    #[test]
    fn naca0012_is_mirror_symmetric() {
        let c = generate(&naca("NACA0012"), 161).unwrap();
        for (u, l) in c.upper.iter().zip(&c.lower) {
            assert_eq!(u[0], l[0]);
            assert!((u[1] + l[1]).abs() <= 1e-12);
        }
    }

    #[test]
    fn naca4412_camber_line_nonnegative() {
        let c = generate(&naca("NACA4412"), 201).unwrap();
        let max = c.camber_line.iter().map(|p| p[1]).fold(f64::MIN, f64::max);
        assert!(c.camber_line.iter().all(|p| p[1] >= 0.0));
        assert!((max - 0.04).abs() < 1e-4);
    }

    #[test]
    fn surfaces_meet_at_leading_edge_and_closed_trailing_edge() {
        let c = generate_with(&naca("NACA2412"), 120, TrailingEdge::Closed).unwrap();
        let (u0, l0) = (c.upper[0], c.lower[0]);
        assert!(dist(u0, l0) < 1e-6);
        let (u1, l1) = (*c.upper.last().unwrap(), *c.lower.last().unwrap());
        assert!(dist(u1, l1) < 1e-6);
        assert!((u1[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn finite_trailing_edge_leaves_a_base() {
        let c = generate(&naca("NACA0012"), 120).unwrap();
        let gap = c.upper.last().unwrap()[1] - c.lower.last().unwrap()[1];
        assert!((gap - 0.00252).abs() < 1e-12);
    }

    #[test]
    fn enclosed_area_matches_integrated_thickness() {
        // closed form: 10 t (0.2969*2/3 - 0.126/2 - 0.3516/3 + 0.2843/4 - 0.1015/5)
        let exact = 1.2 * (0.2969 * 2.0 / 3.0 - 0.063 - 0.3516 / 3.0 + 0.2843 / 4.0 - 0.0203);
        let c = generate(&naca("NACA0012"), 400).unwrap();
        let area = c.enclosed_area();
        assert!((area - exact).abs() / exact < 1e-3, "{area} vs {exact}");
    }

    #[test]
    fn outline_does_not_self_intersect() {
        fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
            (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
        }
        for name in ["NACA0012", "NACA0015", "NACA2412", "NACA4412"] {
            let pts = generate(&naca(name), 60).unwrap().outline();
            let n = pts.len();
            for i in 0..n {
                for j in i + 2..n {
                    if i == 0 && j == n - 1 {
                        continue;
                    }
                    let (a, b) = (pts[i], pts[(i + 1) % n]);
                    let (c, d) = (pts[j], pts[(j + 1) % n]);
                    let hit = cross(a, b, c) * cross(a, b, d) < 0.0
                        && cross(c, d, a) * cross(c, d, b) < 0.0;
                    assert!(!hit, "{name}: segments {i} and {j} cross");
                }
            }
        }
    }

    #[test]
    fn geo_and_selig_outputs() {
        let c = generate(&naca("NACA0012"), 20).unwrap();
        let geo = c.to_geo(0.1, 0.002);
        assert!(geo.contains("Spline(1)"));
        assert_eq!(geo.matches("Point(").count(), c.outline().len());
        let selig = c.to_selig();
        assert_eq!(selig.lines().count(), 1 + c.outline().len());
        assert!(c.to_csv().starts_with("surface,x,y\n"));
    }

    fn cfg(shell: f64) -> StructConfig {
        StructConfig {
            spar_width: 1.0,
            rib_thickness: 1.0,
            shell_thickness: shell,
            n_spars: 2,
            n_ribs: 2,
        }
    }

    #[test]
    fn rectangular_section_matches_closed_form() {
        // 100 x 10 mm box, 1 mm wall, two 1 mm spars, 0.1 m panel.
        let rect = AirfoilCoordinates {
            designator: "box".into(),
            upper: vec![[0.0, 0.05], [1.0, 0.05]],
            lower: vec![[0.0, -0.05], [1.0, -0.05]],
            stations: vec![0.0, 1.0],
            camber_line: vec![[0.0, 0.0], [1.0, 0.0]],
        };
        let p = wing_section_properties(&rect, &cfg(1.0), 0.1, 0.1).unwrap();
        let (b, h, t, w) = (0.1, 0.01, 1e-3, 1e-3);
        let perimeter = 2.0 * (b + h);
        assert!((p.perimeter - perimeter).abs() < 1e-12);
        assert!((p.shell_volume - perimeter * t * 0.1).abs() < 1e-15);
        let web = h - 2.0 * t;
        assert!((p.spar_volume - 2.0 * w * web * 0.1).abs() < 1e-15);
        let rib = (b * h - perimeter * t - 2.0 * w * web) * 1e-3 * 2.0;
        assert!((p.rib_volume - rib).abs() < 1e-15);
        // flanges (as strips) + side walls + spar webs about the mid-plane
        let i_flanges = 2.0 * b * t * (h / 2.0) * (h / 2.0);
        let i_sides = 2.0 * t * h.powi(3) / 12.0;
        let i_webs = 2.0 * w * web.powi(3) / 12.0;
        let i = i_flanges + i_sides + i_webs;
        assert!(p.centroid_y.abs() < 1e-15);
        assert!(
            (p.second_moment - i).abs() / i < 1e-12,
            "{} vs {i}",
            p.second_moment
        );
        assert!((p.y_max - h / 2.0).abs() < 1e-15);
    }

    #[test]
    fn zero_shell_has_zero_shell_volume() {
        let c = generate(&naca("NACA4412"), 100).unwrap();
        let p = wing_section_properties(&c, &cfg(0.0), 0.1, 0.1).unwrap();
        assert_eq!(p.shell_volume, 0.0);
    }

    #[test]
    fn doubling_span_doubles_shell_and_spar_volume() {
        let c = generate(&naca("NACA4412"), 100).unwrap();
        let a = wing_section_properties(&c, &cfg(1.0), 0.1, 0.1).unwrap();
        let b = wing_section_properties(&c, &cfg(1.0), 0.1, 0.2).unwrap();
        assert!((b.shell_volume - 2.0 * a.shell_volume).abs() < 1e-18);
        assert!((b.spar_volume - 2.0 * a.spar_volume).abs() < 1e-18);
        assert_eq!(a.rib_volume, b.rib_volume);
    }

    #[test]
    fn oversized_shell_is_rejected() {
        let c = generate(&naca("NACA4412"), 100).unwrap();
        let err = wing_section_properties(&c, &cfg(8.0), 0.1, 0.1).unwrap_err();
        assert!(matches!(err, GeometryError::Overlap(_)));
    }
}
