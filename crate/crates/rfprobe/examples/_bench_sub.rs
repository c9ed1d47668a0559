use rfprobe::net::{make_synthetic_unit, GaborSpec, Responder, SyntheticUnitParams};
use rfprobe::revcorr::{eig_sym, AwcForm, RevCorrAccumulator};
use rfprobe::stimulus::NoiseSpec;
use rfprobe::ImageTensor;

fn orthonormalize(a: &[f64], b: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
    let na = norm(a);
    let u1: Vec<f64> = a.iter().map(|x| x / na).collect();
    let proj = dot(b, &u1);
    let mut u2: Vec<f64> = b.iter().zip(&u1).map(|(x, u)| x - proj * u).collect();
    let n2 = norm(&u2);
    for v in &mut u2 { *v /= n2; }
    (u1, u2)
}

// largest principal angle (deg) between span(e1,e2) and span(k1,k2)
fn max_principal_angle(e1: &[f64], e2: &[f64], k1: &[f64], k2: &[f64]) -> f64 {
    let (u1, u2) = orthonormalize(k1, k2);
    let (v1, v2) = orthonormalize(e1, e2);
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
    let m = [dot(&v1, &u1), dot(&v1, &u2), dot(&v2, &u1), dot(&v2, &u2)];
    // singular values of 2x2 M: eigenvalues of MᵀM
    let g00 = m[0] * m[0] + m[2] * m[2];
    let g01 = m[0] * m[1] + m[2] * m[3];
    let g11 = m[1] * m[1] + m[3] * m[3];
    let tr = g00 + g11;
    let det = g00 * g11 - g01 * g01;
    let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
    let smin = (tr / 2.0 - disc).max(0.0).sqrt();
    smin.clamp(0.0, 1.0).acos().to_degrees()
}

fn run(kind: &str, n: usize) {
    let shape = (16, 16, 1);
    let g = GaborSpec::centered(16, 16, 0.0);
    let q = GaborSpec::centered(16, 16, 90.0);
    let params = match kind {
        "energy" => SyntheticUnitParams::Energy { gabor: g },
        _ => SyntheticUnitParams::SuppressedEnergy { gabor: g, suppressor: q, gain: 1.0 },
    };
    let unit = make_synthetic_unit(&params, shape).unwrap();
    let spec = NoiseSpec { seed: 42, count: n, shape, mean: 0.0, std: 1.0 };
    let mut acc = RevCorrAccumulator::new(shape, AwcForm::StandardStc).unwrap();
    for i in 0..n {
        let stim = spec.sample(i as u64);
        acc.accumulate(&stim, unit.respond(&stim).unwrap()).unwrap();
    }
    let awa = acc.finalize_awa().unwrap();
    let dec = eig_sym(&acc.finalize_awc().unwrap()).unwrap();
    let nn = dec.eigenvalues.len();
    let exc = unit.excitatory_filters();
    let top_angle = max_principal_angle(
        &dec.eigenvectors[0], &dec.eigenvectors[1],
        exc[0].values(), exc[1].values(),
    );
    println!("{kind}: |AWA| = {:.4}, λ_top = [{:.3}, {:.3}, {:.3}], λ_bot = [{:.3}, {:.3}, {:.3}]",
        awa.values.norm(), dec.eigenvalues[0], dec.eigenvalues[1], dec.eigenvalues[2],
        dec.eigenvalues[nn-3], dec.eigenvalues[nn-2], dec.eigenvalues[nn-1]);
    println!("  top-2 vs k-plane angle = {:.2}°", top_angle);
    if kind == "suppressed" {
        let sup: Vec<&ImageTensor> = unit.suppressive_filters().iter().collect();
        let bot_angle = max_principal_angle(
            &dec.eigenvectors[nn-1], &dec.eigenvectors[nn-2],
            sup[0].values(), sup[1].values(),
        );
        println!("  bottom-2 vs q-plane angle = {:.2}°", bot_angle);
    }
}

fn main() {
    run("energy", 200_000);
    run("suppressed", 200_000);
}
