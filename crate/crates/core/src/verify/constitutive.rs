use super::Check;
use crate::constitutive::{
    material_tangent, piola_stress, softplus, strain_energy, stress_param_gradient, AnalyticKind, AnalyticModel, ConstitutiveModel,
    Hnn, HnnArchitecture, HnnParams,
};
use crate::kinematics::{rotation, Invariants, Tensor2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibilityOptions {
    /// Random parameter draws, cycled over [`sample_architectures`].
    pub draws: usize,
    /// Random `(R, F)` pairs in total.
    pub rotations: usize,
    /// Random segments in total for the midpoint convexity test.
    pub segments: usize,
}

impl Default for AdmissibilityOptions {
    fn default() -> Self {
        Self { draws: 100, rotations: 1000, segments: 10_000 }
    }
}

/// Architectures spanning depth, width, skip connections, input sets and
/// scales.
pub fn sample_architectures() -> Vec<HnnArchitecture> {
    vec![
        HnnArchitecture::uniform(1, 5, false, false, 10.0, 0.1),
        HnnArchitecture::uniform(2, 5, false, false, 1.0, 0.6),
        HnnArchitecture::uniform(2, 10, true, false, 5.0, 0.5),
        HnnArchitecture::uniform(3, 5, true, false, 20.0, 0.2),
        HnnArchitecture::uniform(3, 20, false, false, 1.0, 0.8),
        HnnArchitecture::uniform(2, 5, false, true, 1.0, 0.6),
        HnnArchitecture::uniform(3, 10, true, true, 10.0, 0.05),
    ]
}

/// Every raw parameter, biases included, drawn from a standard normal.
fn random_hnn(arch: &HnnArchitecture, rng: &mut ChaCha8Rng) -> Hnn {
    let n = HnnParams::zeros(arch).flatten().len();
    let flat: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    Hnn::new(arch.clone(), HnnParams::unflatten(arch, &flat).expect("flat length")).expect("valid architecture")
}

fn random_f(rng: &mut ChaCha8Rng, amp: f64) -> Tensor2 {
    loop {
        let f = Tensor2::identity() + Tensor2::from_fn(|_, _| rng.random_range(-amp..amp));
        if f.determinant() > 0.2 {
            return f;
        }
    }
}

fn random_rotation(rng: &mut ChaCha8Rng) -> Tensor2 {
    let axis = [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)];
    rotation(axis, rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))
}

fn energy(m: &Hnn, inv: Invariants) -> f64 {
    m.energy(inv).w
}

fn scaled_identity(e: f64) -> Invariants {
    Invariants::new(3.0 * e * e, 3.0 * e.powi(4), e.powi(3))
}

#[derive(Default)]
struct Worst {
    r1: f64,
    r2: f64,
    rot: f64,
    convexity: f64,
    omega_fd: f64,
    monotone_violations: usize,
    min_growth_ratio: f64,
    min_coercivity: f64,
    superlinear_violations: usize,
}

/// Structural admissibility of random HNN parameter draws.
pub fn admissibility_suite(opts: &AdmissibilityOptions, seed: u64) -> Vec<Check> {
    let archs = sample_architectures();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_native = (0..opts.draws).filter(|d| !archs[d % archs.len()].isochoric).count().max(1);
    let rot_per_draw = opts.rotations.div_ceil(opts.draws.max(1));
    let seg_per_draw = opts.segments.div_ceil(n_native);
    let mut w = Worst { min_growth_ratio: f64::INFINITY, min_coercivity: f64::INFINITY, ..Default::default() };
    let (mut n_rot, mut n_seg) = (0, 0);
    for d in 0..opts.draws {
        let arch = &archs[d % archs.len()];
        let m = random_hnn(arch, &mut rng);
        let model: ConstitutiveModel = m.clone().into();
        let wbar = arch.w_scale;

        w.r1 = w.r1.max(energy(&m, Invariants::REFERENCE).abs() / wbar);
        let p = piola_stress(&model, &Tensor2::identity()).expect("reference is admissible");
        w.r2 = w.r2.max(p.norm() / wbar);

        // Stress at F = I from central differences of W.
        let h = 1e-5;
        let mut fd = Tensor2::zeros();
        for i in 0..3 {
            for j in 0..3 {
                let mut fp = Tensor2::identity();
                let mut fm = Tensor2::identity();
                fp[(i, j)] += h;
                fm[(i, j)] -= h;
                fd[(i, j)] = (strain_energy(&model, &fp).unwrap() - strain_energy(&model, &fm).unwrap()) / (2.0 * h);
            }
        }
        w.omega_fd = w.omega_fd.max(fd.norm() / wbar);

        for _ in 0..rot_per_draw {
            let f = random_f(&mut rng, 0.4);
            let r = random_rotation(&mut rng);
            let w0 = strain_energy(&model, &f).unwrap();
            let wl = strain_energy(&model, &(r * f)).unwrap();
            let wr = strain_energy(&model, &(f * r)).unwrap();
            w.rot = w.rot.max((wl - w0).abs().max((wr - w0).abs()) / w0.abs().max(wbar));
            n_rot += 1;
        }

        // Compression sweep ε from 0.3 down to the smallest ε whose invariants
        // (I2 = 3ε⁴ is the first to leave the normal range) are all normal doubles.
        let sweep: Vec<f64> = (0..).map(|k| 0.3 * 10f64.powf(-0.25 * k as f64)).take_while(|e| e.powi(4) > 1e-300).collect();
        let vals: Vec<f64> = sweep.iter().map(|&e| energy(&m, scaled_identity(e))).collect();
        w.monotone_violations += vals.windows(2).filter(|v| !(v[1] > v[0])).count();
        w.min_growth_ratio = w.min_growth_ratio.min(vals.iter().copied().fold(f64::NEG_INFINITY, f64::max) / wbar);

        let lambdas: Vec<f64> = (0..=20).map(|k| 10f64.powf(1.0 + 0.1 * k as f64)).collect();
        if arch.isochoric {
            let per_l: Vec<f64> = lambdas.iter().map(|&l| energy(&m, scaled_identity(l)) / l).collect();
            w.superlinear_violations += per_l.windows(2).filter(|v| !(v[1] > v[0])).count();
        } else {
            for &l in &lambdas {
                w.min_coercivity = w.min_coercivity.min(energy(&m, scaled_identity(l)) / (l * l) / wbar);
            }
            for _ in 0..seg_per_draw {
                w.convexity = w.convexity.max(midpoint_gap(&m, &mut rng) / wbar);
                n_seg += 1;
            }
        }
    }
    vec![
        Check::below("r1_reference_energy", w.r1, 1e-12).with_detail(format!("{} draws, relative to W_scale", opts.draws)),
        Check::below("r2_reference_stress", w.r2, 1e-10),
        Check::below("r3_r4_rotation_invariance", w.rot, 1e-12).with_detail(format!("{n_rot} random (R, F)")),
        Check::below("r5_midpoint_convexity", w.convexity, 1e-10).with_detail(format!("{n_seg} segments, native inputs")),
        Check::below("r6_compression_monotone", w.monotone_violations as f64, 0.5).with_detail("violations over eps in (0, 0.3]"),
        Check::above("r6_compression_magnitude", w.min_growth_ratio, 1e3)
            .with_detail("min over draws of max W(eps I)/W_scale; volumetric growth is only logarithmic in J")
            .advisory(),
        Check::above("r7_coercivity_native", w.min_coercivity, 0.0).with_detail("min W(lI)/(l^2 W_scale), l in [10, 1000]"),
        Check::below("r7_superlinear_isochoric", w.superlinear_violations as f64, 0.5),
        Check::below("omega_stress_free_fd", w.omega_fd, 1e-8),
    ]
}

/// `g(mid) − (g(x) + g(y))/2` on a random segment in `(A, B, t)` space with
/// `I1 = |A|²`, `I2 = |B|²`, `J = t`.
fn midpoint_gap(m: &Hnn, rng: &mut ChaCha8Rng) -> f64 {
    let amp = rng.random_range(0.1..1.5);
    let mut point = || {
        let a = Tensor2::identity() + Tensor2::from_fn(|_, _| amp * rng.sample::<f64, _>(StandardNormal));
        let b = Tensor2::identity() + Tensor2::from_fn(|_, _| amp * rng.sample::<f64, _>(StandardNormal));
        (a, b, rng.random_range(0.05..3.0))
    };
    let (x, y) = (point(), point());
    let g = |a: &Tensor2, b: &Tensor2, t: f64| energy(m, Invariants::new(a.norm_squared(), b.norm_squared(), t));
    let mid = g(&((x.0 + y.0) / 2.0), &((x.1 + y.1) / 2.0), 0.5 * (x.2 + y.2));
    mid - 0.5 * (g(&x.0, &x.1, x.2) + g(&y.0, &y.1, y.2))
}

/// Tangent and parameter-sensitivity oracles against central differences
/// on `cases` random (model, F) pairs.
pub fn derivative_oracle_suite(cases: usize, seed: u64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let archs = sample_architectures();
    let mut worst_tangent = 0.0f64;
    let mut worst_param = 0.0f64;
    let mut worst_symmetry = 0.0f64;
    for c in 0..cases {
        let model: ConstitutiveModel = if c % 3 == 0 {
            let kind = AnalyticKind::ALL[(c / 3) % AnalyticKind::ALL.len()];
            let coeffs = kind.default_coefficients().iter().map(|v| v * rng.random_range(0.5..1.5)).collect();
            AnalyticModel::new(kind, coeffs).unwrap().into()
        } else {
            let arch = &archs[c % archs.len()];
            let mut m = random_hnn(arch, &mut rng);
            // Tone the draw down so stresses stay moderate.
            let flat: Vec<f64> = m.params().flatten().iter().map(|v| 0.5 * v).collect();
            m = Hnn::new(arch.clone(), HnnParams::unflatten(arch, &flat).unwrap()).unwrap();
            m.into()
        };
        let f = random_f(&mut rng, 0.3);
        let a = material_tangent(&model, &f).unwrap();
        worst_symmetry = worst_symmetry.max((a - a.transpose()).norm() / a.norm());
        let h = 1e-6;
        let mut fd = a;
        for k in 0..3 {
            for l in 0..3 {
                let mut fp = f;
                let mut fm = f;
                fp[(k, l)] += h;
                fm[(k, l)] -= h;
                let dp = (piola_stress(&model, &fp).unwrap() - piola_stress(&model, &fm).unwrap()) / (2.0 * h);
                for i in 0..3 {
                    for j in 0..3 {
                        fd[(3 * i + j, 3 * k + l)] = dp[(i, j)];
                    }
                }
            }
        }
        worst_tangent = worst_tangent.max((fd - a).norm() / a.norm());

        let g = stress_param_gradient(&model, &f).unwrap();
        let raw = model.raw_params();
        let (mut num, mut den) = (0.0, 0.0);
        for p in 0..raw.len() {
            let mut rp = raw.clone();
            let mut rm = raw.clone();
            rp[p] += h;
            rm[p] -= h;
            let sp = piola_stress(&model.with_raw_params(&rp).unwrap(), &f).unwrap();
            let sm = piola_stress(&model.with_raw_params(&rm).unwrap(), &f).unwrap();
            num += ((sp - sm) / (2.0 * h) - g[p]).norm_squared();
            den += g[p].norm_squared();
        }
        worst_param = worst_param.max((num / den).sqrt());
    }
    vec![
        Check::below("tangent_vs_fd", worst_tangent, 1e-5).with_detail(format!("{cases} random (model, F)")),
        Check::below("tangent_major_symmetry", worst_symmetry, 1e-10),
        Check::below("stress_param_gradient_vs_fd", worst_param, 1e-5),
    ]
}

/// `E[τ(σ Z)]` for standard normal `Z` by trapezoidal quadrature, which is
/// spectrally accurate for this smooth, rapidly decaying integrand.
pub fn expected_softplus(sigma: f64) -> f64 {
    let (lim, n) = (12.0, 4800);
    let dz = 2.0 * lim / n as f64;
    let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    (0..=n)
        .map(|k| {
            let z = -lim + k as f64 * dz;
            let wgt = if k == 0 || k == n { 0.5 } else { 1.0 };
            wgt * norm * (-0.5 * z * z).exp() * softplus(sigma * z)
        })
        .sum::<f64>()
        * dz
}

/// Expected `∂W/∂I1` at the reference state for freshly initialized
/// parameters. With `γ = w̄ ρ'(0)` the skip variant sums the direct paths of
/// every layer, the plain variant keeps only the path through all layers.
pub fn init_slope_expectation(arch: &HnnArchitecture) -> f64 {
    let wbar = expected_softplus(arch.sigma_init);
    let gamma = 0.5 * wbar;
    let l = arch.depth() as i32;
    if arch.skip {
        arch.w_scale * wbar * gamma * (1.0 - gamma.powi(l)) / (1.0 - gamma)
    } else {
        arch.w_scale * wbar * gamma.powi(l)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitStatistic {
    pub draws: usize,
    pub mean: f64,
    pub std_error: f64,
    pub expected: f64,
}

impl InitStatistic {
    /// Deviation of the sample mean in standard errors.
    pub fn z_score(&self) -> f64 {
        (self.mean - self.expected).abs() / self.std_error
    }
}

/// Monte Carlo mean of `∂W/∂I1` at the reference over seeded initializations.
pub fn init_slope_statistic(arch: &HnnArchitecture, draws: usize, seed: u64) -> InitStatistic {
    let (mut sum, mut sq) = (0.0, 0.0);
    for k in 0..draws {
        let m = Hnn::from_init(arch.clone(), seed.wrapping_mul(1_000_003).wrapping_add(k as u64)).expect("valid architecture");
        let v = m.energy(Invariants::REFERENCE).dw[0];
        sum += v;
        sq += v * v;
    }
    let n = draws as f64;
    let mean = sum / n;
    let var = (sq - n * mean * mean) / (n - 1.0);
    InitStatistic { draws, mean, std_error: (var / n).sqrt(), expected: init_slope_expectation(arch) }
}

/// Initialization statistics for both variants at two widths.
pub fn init_statistics_suite(draws: usize, seed: u64) -> Vec<Check> {
    let mut out = Vec::new();
    for skip in [true, false] {
        for n in [5, 20] {
            let arch = HnnArchitecture::uniform(3, n, skip, false, 10.0, 0.6);
            let s = init_slope_statistic(&arch, draws, seed);
            let name = format!("init_slope_{}_n{n}", if skip { "skip" } else { "plain" });
            out.push(
                Check::below(&name, s.z_score(), 3.0)
                    .with_detail(format!("mean {:.6e}, expected {:.6e}, {} draws", s.mean, s.expected, s.draws)),
            );
        }
    }
    out
}
