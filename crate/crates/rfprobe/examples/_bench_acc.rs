use rfprobe::net::{make_synthetic_unit, GaborSpec, Responder, SyntheticUnitParams};
use rfprobe::revcorr::{AwcForm, RevCorrAccumulator, eig_sym};
use rfprobe::stimulus::NoiseSpec;
use std::time::Instant;

fn main() {
    let shape = (16, 16, 1);
    let unit = make_synthetic_unit(
        &SyntheticUnitParams::LinearHalfRect { gabor: GaborSpec::centered(16, 16, 0.0) },
        shape,
    )
    .unwrap();
    let spec = NoiseSpec { seed: 11, count: 200_000, shape, mean: 0.0, std: 1.0 };
    let t0 = Instant::now();
    let mut acc = RevCorrAccumulator::new(shape, AwcForm::StandardStc).unwrap();
    for i in 0..spec.count {
        let stim = spec.sample(i as u64);
        let r = unit.respond(&stim).unwrap();
        acc.accumulate(&stim, r).unwrap();
    }
    let accumulate_time = t0.elapsed();
    let awa = acc.finalize_awa().unwrap();
    let k = &unit.excitatory_filters()[0];
    let cos = awa.values.dot(k).unwrap() / awa.values.norm();
    println!("accumulate 2e5 x 256: {:?}, cos = {cos:.5}", accumulate_time);
    let t1 = Instant::now();
    let awc = acc.finalize_awc().unwrap();
    let dec = eig_sym(&awc).unwrap();
    println!("finalize+eig 256x256: {:?}, top λ = {:.4}, mean λ = {:.4}", t1.elapsed(), dec.eigenvalues[0], dec.mean_eigenvalue);
}
