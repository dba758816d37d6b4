//! Pipeline stages. Each stage recomputes what it needs from the config, so
//! any stage can run on its own; outputs go to one directory.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Deserialize;
use twoscale_core::curvature::{find_stationary_points, identity_suite, omega11, omega33, PointKind, StationaryPoint};
use twoscale_core::envelope::{dalembert_spectra, solve_2d_separated, solve_envelope, EnvelopeCoefficients, EnvelopeSolution, SpectralData};
use twoscale_core::floquet::{band_edges, dispersion_f, Polarization};
use twoscale_core::lattice::SlowLattice;
use twoscale_core::linalg::C64;
use twoscale_core::synth::{diagnostics_point, first_order_field, principal_field, AsymptoticField};
use twoscale_core::Error;

use crate::config::{Format, ProfileKind, RunConfig, Selection};
use crate::error::{CliError, CliResult};
use crate::export::{csv_string, write_csv, write_text, BinaryGrid, Cell, ENV_MAGIC, FLD_MAGIC};
use crate::validation::{run_suite, ValidationReport};

/// Files written and warnings raised by one stage.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StageOutput {
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

fn ensure_dir(out: &Path) -> CliResult<()> {
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))
}

fn num(v: f64) -> Cell {
    Cell::Num(v)
}

/// `omega, half_trace, p_z_b_over_pi, gap` over the configured scan; `p_z` is
/// NaN inside gaps (`|F| > 1`).
pub fn bands_csv(cfg: &RunConfig) -> CliResult<String> {
    let (lo, hi) = cfg.omega_range();
    let n = cfg.bands.scan_points;
    let b = &cfg.bands;
    let rows = (0..n)
        .into_par_iter()
        .map(|i| {
            let w = if i == n - 1 { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 };
            let f = dispersion_f(&cfg.stack, b.polarization, b.p_par_sq, w)?;
            let gap = f.abs() > 1.0;
            let pz = if gap { f64::NAN } else { f.acos() / std::f64::consts::PI };
            Ok(vec![num(w), num(f), num(pz), Cell::Int(gap as i64)])
        })
        .collect::<Result<Vec<_>, Error>>()?;
    Ok(csv_string(&["omega", "half_trace", "p_z_b_over_pi", "gap"], &rows))
}

/// `band_index, omega_star, edge_sign, p_z_b_over_pi, degenerate`.
pub fn edges_csv(cfg: &RunConfig) -> CliResult<String> {
    let b = &cfg.bands;
    let edges = band_edges(&cfg.stack, b.polarization, b.p_par_sq, cfg.omega_range(), b.scan_points)?;
    let period = cfg.stack.period();
    let rows: Vec<Vec<Cell>> = edges
        .iter()
        .map(|e| {
            vec![
                Cell::Int(e.band_index as i64),
                num(e.omega_star),
                Cell::Int(e.edge_sign as i64),
                num(e.p_z_star * period / std::f64::consts::PI),
                Cell::Int(e.degenerate as i64),
            ]
        })
        .collect();
    Ok(csv_string(&["band_index", "omega_star", "edge_sign", "p_z_b_over_pi", "degenerate"], &rows))
}

pub fn run_bands(cfg: &RunConfig, out: &Path) -> CliResult<StageOutput> {
    ensure_dir(out)?;
    let mut o = StageOutput::default();
    for (name, text) in [("bands.csv", bands_csv(cfg)?), ("edges.csv", edges_csv(cfg)?)] {
        let p = out.join(name);
        write_text(&p, &text)?;
        o.files.push(p);
    }
    Ok(o)
}

/// Stationary points with their checked curvatures and the report table.
#[derive(Debug, Clone)]
pub struct StationaryReport {
    pub points: Vec<StationaryPoint>,
    pub csv: String,
    pub warnings: Vec<String>,
}

const STATIONARY_HEADER: [&str; 14] = [
    "index",
    "omega_star",
    "p_z_b_over_pi",
    "kind",
    "w11_h",
    "w11_e",
    "w33",
    "u_xx",
    "w33_fd",
    "w33_identity",
    "w11_h_fd",
    "w11_e_fd",
    "gradient_exponent",
    "identity_max_violation",
];

/// Finds, checks and tabulates the stationary points. Fails with a
/// numerical error when any curvature estimate disagrees.
pub fn stationary_report(cfg: &RunConfig) -> CliResult<StationaryReport> {
    let edges = band_edges(&cfg.stack, Polarization::Axial, 0.0, cfg.omega_range(), cfg.bands.scan_points)?;
    let warnings = edges
        .iter()
        .filter(|e| e.degenerate)
        .map(|e| Error::DegenerateEdge { omega: e.omega_star }.to_string())
        .collect();
    let points = find_stationary_points(&cfg.stack, cfg.omega_range(), &cfg.curvature_options())?;
    let period = cfg.stack.period();
    let rows = points
        .par_iter()
        .enumerate()
        .map(|(i, sp)| {
            omega33(sp)?;
            omega11(sp, Polarization::TM)?;
            omega11(sp, Polarization::TE)?;
            let ids = identity_suite(sp, cfg.seed)?;
            let e = &sp.estimates;
            Ok(vec![
                Cell::Int(i as i64),
                num(sp.omega_star),
                num(sp.p_z_star * period / std::f64::consts::PI),
                Cell::Text(sp.kind.to_string()),
                num(sp.w11_h),
                num(sp.w11_e),
                num(sp.w33),
                num(sp.u_xx),
                num(e.w33_fd),
                num(e.w33_identity),
                num(e.w11_h_fd),
                num(e.w11_e_fd),
                num(sp.stationarity.gradient_exponent),
                num(ids.max_violation()),
            ])
        })
        .collect::<Result<Vec<_>, Error>>()?;
    Ok(StationaryReport {
        points,
        csv: csv_string(&STATIONARY_HEADER, &rows),
        warnings,
    })
}

pub fn run_stationary(cfg: &RunConfig, out: &Path) -> CliResult<StageOutput> {
    ensure_dir(out)?;
    let rep = stationary_report(cfg)?;
    let p = out.join("stationary.csv");
    write_text(&p, &rep.csv)?;
    Ok(StageOutput {
        files: vec![p],
        warnings: rep.warnings,
    })
}

/// The point chosen by `stationary.select`.
pub fn select_point(cfg: &RunConfig, points: &[StationaryPoint]) -> CliResult<StationaryPoint> {
    let found = match cfg.stationary.select {
        Selection::Hyperbolic => points.iter().find(|p| p.kind == PointKind::Hyperbolic),
        Selection::Elliptic => points.iter().find(|p| p.kind == PointKind::Elliptic),
        Selection::Index(i) => points.get(i),
    };
    found.cloned().ok_or_else(|| CliError::Config {
        field: "stationary.select".into(),
        message: format!("{:?} matches none of the {} stationary points in range", cfg.stationary.select, points.len()),
    })
}

fn rebuild_point(cfg: &RunConfig) -> CliResult<StationaryPoint> {
    let pts = find_stationary_points(&cfg.stack, cfg.omega_range(), &cfg.curvature_options())?;
    select_point(cfg, &pts)
}

fn complex(v: [f64; 2]) -> C64 {
    C64::new(v[0], v[1])
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpectrumFile {
    tau_plus_1: Vec<[f64; 2]>,
    tau_minus_1: Vec<[f64; 2]>,
    tau_plus_2: Vec<[f64; 2]>,
    tau_minus_2: Vec<[f64; 2]>,
}

fn read_spectrum_file(path: &Path, lattice: SlowLattice) -> CliResult<SpectralData> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let f: SpectrumFile = serde_json::from_str(&text).map_err(|e| CliError::Config {
        field: "envelope.file".into(),
        message: format!("{}: {e}", path.display()),
    })?;
    let conv = |v: Vec<[f64; 2]>| v.into_iter().map(complex).collect::<Vec<_>>();
    Ok(SpectralData::new(
        lattice,
        conv(f.tau_plus_1),
        conv(f.tau_minus_1),
        conv(f.tau_plus_2),
        conv(f.tau_minus_2),
    )?)
}

/// `τ̂` data for the configured 3D profile.
pub fn spectral_data(cfg: &RunConfig, lattice: SlowLattice) -> CliResult<SpectralData> {
    let e = &cfg.envelope;
    let (a1, a2) = (complex(e.amplitude_1), complex(e.amplitude_2));
    match e.profile {
        ProfileKind::Gaussian => {
            let mut d = SpectralData::gaussian_ring(lattice, e.p0, e.width, a1, a2)?;
            // translate to the centre: f(ρ - c) ↔ e^{-i p·c} f̂
            for k in 0..lattice.len() {
                let (px, py) = lattice.wavevector(k);
                let s = C64::from_polar(1.0, -(px * e.center[0] + py * e.center[1]));
                d.tau_plus_1[k] *= s;
                d.tau_plus_2[k] *= s;
            }
            Ok(d)
        }
        ProfileKind::Plane => {
            let m = (e.p0 * lattice.n_xi as f64 * lattice.d_xi / (2.0 * std::f64::consts::PI)).round() as i64;
            let i = m.rem_euclid(lattice.n_xi as i64) as usize;
            let k = lattice.index(i, 0);
            let n = lattice.len() as f64;
            let z = vec![C64::new(0.0, 0.0); lattice.len()];
            let (mut t1, mut t2) = (z.clone(), z.clone());
            t1[k] = a1 * n;
            t2[k] = a2 * n;
            Ok(SpectralData::new(lattice, t1, z.clone(), t2, z)?)
        }
        ProfileKind::File => {
            let path = e.file.as_deref().expect("validated");
            read_spectrum_file(Path::new(path), lattice)
        }
    }
}

/// Envelope for the configured profile at `ζ = 0, dζ, …`. A Gaussian on an
/// `η`-independent lattice is a right-moving profile
/// `α_j = a_j exp(-w²(ξ - c)²/2) e^{i p0 ξ}` split by d'Alembert.
pub fn build_envelope(cfg: &RunConfig, sp: &StationaryPoint) -> CliResult<EnvelopeSolution> {
    let e = &cfg.envelope;
    let lattice = SlowLattice::new(e.n_xi, e.n_eta, e.d_xi, e.d_eta)?;
    let coeffs = EnvelopeCoefficients::from_stationary(sp, e.delta_omega, e.chi)?;
    let zeta: Vec<f64> = (0..e.n_zeta).map(|i| i as f64 * e.d_zeta).collect();
    if e.profile == ProfileKind::Gaussian && e.n_eta == 1 {
        let zs = vec![C64::new(0.0, 0.0); lattice.len()];
        let prof = |a: C64| {
            lattice.sample(|x, _| {
                let g = (-(e.width * (x - e.center[0])).powi(2) / 2.0).exp();
                a * C64::from_polar(g, e.p0 * x)
            })
        };
        let spectra = [
            dalembert_spectra(&lattice, &prof(complex(e.amplitude_1)), &zs),
            dalembert_spectra(&lattice, &prof(complex(e.amplitude_2)), &zs),
        ];
        return Ok(solve_2d_separated(&coeffs, spectra, lattice, &zeta)?);
    }
    let data = spectral_data(cfg, lattice)?;
    Ok(solve_envelope(&coeffs, &data, &zeta)?)
}

fn envelope_grid(env: &EnvelopeSolution, d_zeta: f64) -> BinaryGrid {
    let l = env.lattice;
    BinaryGrid {
        magic: *ENV_MAGIC,
        dims: [l.n_xi as u64, l.n_eta as u64, env.zeta.len() as u64],
        spacings: [l.d_xi, l.d_eta, d_zeta],
        arrays: vec![env.alpha1.iter().copied().collect(), env.alpha2.iter().copied().collect()],
    }
}

fn envelope_csv(env: &EnvelopeSolution) -> String {
    let l = env.lattice;
    let mut rows = Vec::with_capacity(env.zeta.len() * l.len());
    for (iz, &z) in env.zeta.iter().enumerate() {
        let (a1, a2) = (env.alpha_slice(0, iz), env.alpha_slice(1, iz));
        for i in 0..l.n_xi {
            for j in 0..l.n_eta {
                let k = l.index(i, j);
                rows.push(vec![
                    num(z),
                    num(l.xi(i)),
                    num(l.eta(j)),
                    num(a1[k].re),
                    num(a1[k].im),
                    num(a2[k].re),
                    num(a2[k].im),
                ]);
            }
        }
    }
    csv_string(&["zeta", "xi", "eta", "re_alpha1", "im_alpha1", "re_alpha2", "im_alpha2"], &rows)
}

pub fn run_envelope(cfg: &RunConfig, out: &Path) -> CliResult<StageOutput> {
    ensure_dir(out)?;
    let sp = rebuild_point(cfg)?;
    let env = build_envelope(cfg, &sp)?;
    let r = env.residuals();
    let mut o = StageOutput::default();
    if cfg.wants(Format::Bin) {
        let p = out.join("envelope.bin");
        envelope_grid(&env, cfg.envelope.d_zeta).write(&p)?;
        o.files.push(p);
    }
    if cfg.wants(Format::Csv) {
        let p = out.join("envelope.csv");
        write_text(&p, &envelope_csv(&env))?;
        o.files.push(p);
    }
    let p = out.join("envelope_residuals.csv");
    write_csv(
        &p,
        &["tau_pde", "alpha_pde", "laplacian"],
        &[vec![num(r.tau_pde), num(r.alpha_pde), num(r.laplacian)]],
    )?;
    o.files.push(p);
    Ok(o)
}

/// Synthesized field on the configured stack.
pub fn build_field(cfg: &RunConfig) -> CliResult<AsymptoticField> {
    let sp = rebuild_point(cfg)?;
    let env = build_envelope(cfg, &sp)?;
    let chi = cfg.envelope.chi;
    Ok(if cfg.synth.order == 0 {
        principal_field(&sp, &env, chi)?
    } else {
        first_order_field(&sp, &env, chi)?
    })
}

/// `Ψ` on `periods · samples_per_period` uniform fast samples, `(z, ξ, η)` order.
pub fn field_grid(cfg: &RunConfig, field: &AsymptoticField) -> BinaryGrid {
    let b = cfg.stack.period();
    let nz = cfg.synth.periods * cfg.synth.samples_per_period;
    let dz = b / cfg.synth.samples_per_period as f64;
    let lat = *field.lattice();
    let slices: Vec<Vec<[C64; 6]>> = (0..nz).into_par_iter().map(|m| field.psi_at(m as f64 * dz)).collect();
    let arrays = (0..6)
        .map(|c| slices.iter().flat_map(|s| s.iter().map(move |v| v[c])).collect())
        .collect();
    BinaryGrid {
        magic: *FLD_MAGIC,
        dims: [nz as u64, lat.n_xi as u64, lat.n_eta as u64],
        spacings: [dz, lat.d_xi, lat.d_eta],
        arrays,
    }
}

/// `z, xi, e2, s_z` along the central `η` row.
fn field_csv(cfg: &RunConfig, grid: &BinaryGrid, lattice: &SlowLattice) -> String {
    let [nz, nx, ny] = grid.dims.map(|d| d as usize);
    let j = ny / 2;
    let mut rows = Vec::with_capacity(nz * nx);
    for m in 0..nz {
        let z = m as f64 * grid.spacings[0];
        let med = cfg.stack.sample_profile(z);
        for i in 0..nx {
            let k = (m * nx + i) * ny + j;
            let v: [C64; 6] = std::array::from_fn(|c| grid.arrays[c][k]);
            let e2: f64 = v[..3].iter().map(|x| x.norm_sqr()).sum();
            let (s, _) = diagnostics_point(med.eps_norm, med.mu_norm, &v);
            rows.push(vec![num(z), num(lattice.xi(i)), num(e2), num(s[2])]);
        }
    }
    csv_string(&["z", "xi", "e2", "s_z"], &rows)
}

pub fn run_synthesize(cfg: &RunConfig, out: &Path) -> CliResult<StageOutput> {
    ensure_dir(out)?;
    let field = build_field(cfg)?;
    let grid = field_grid(cfg, &field);
    let mut o = StageOutput::default();
    if cfg.wants(Format::Bin) {
        let p = out.join("field.bin");
        grid.write(&p)?;
        o.files.push(p);
    }
    if cfg.wants(Format::Csv) {
        let p = out.join("field.csv");
        write_text(&p, &field_csv(cfg, &grid, field.lattice()))?;
        o.files.push(p);
    }
    let r = field.maxwell_residual();
    let p = out.join("residual.csv");
    write_csv(
        &p,
        &["order", "chi", "l2", "sup", "l2_e", "l2_h"],
        &[vec![
            Cell::Int(field.order as i64),
            num(field.chi),
            num(r.l2),
            num(r.sup),
            num(r.l2_e),
            num(r.l2_h),
        ]],
    )?;
    o.files.push(p);
    Ok(o)
}

/// Runs the acceptance suite and writes `validation.json`; the report is
/// returned whether or not every criterion passed.
pub fn run_validate(cfg: &RunConfig, out: &Path) -> CliResult<(ValidationReport, StageOutput)> {
    ensure_dir(out)?;
    let report = run_suite(cfg);
    let p = out.join("validation.json");
    write_text(&p, &report.to_json())?;
    Ok((
        report,
        StageOutput {
            files: vec![p],
            warnings: Vec::new(),
        },
    ))
}
