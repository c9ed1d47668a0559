use rfprobe::lnmodel::{awa_only_filters, bank_filters, chance_level_fit, split_fit, Rectifier};
use rfprobe::net::*;
use rfprobe::revcorr::{eig_sym, select_subfilters, AwcForm, RevCorrAccumulator};
use rfprobe::stimulus::{gen_white_noise, NoiseSpec};
use rfprobe::ImageTensor;
use std::sync::Arc;
use std::time::Instant;

fn pipeline(responder: &dyn Responder, shape: (usize, usize, usize), n: usize, seed: u64) -> rfprobe::revcorr::SubFilterBank {
    let spec = NoiseSpec { seed, count: n, shape, mean: 0.0, std: 1.0 };
    let mut acc = RevCorrAccumulator::new(shape, AwcForm::StandardStc).unwrap();
    for i in 0..n {
        let stim = spec.sample(i as u64);
        acc.accumulate(&stim, responder.respond(&stim).unwrap()).unwrap();
    }
    let awa = acc.finalize_awa().unwrap();
    let dec = eig_sym(&acc.finalize_awc().unwrap()).unwrap();
    select_subfilters(awa, &dec, 9, 10, AwcForm::StandardStc).unwrap()
}

fn main() {
    let shape = (16, 16, 1);
    let g = GaborSpec::centered(16, 16, 0.0);
    let t0 = Instant::now();

    // pure linear probe: single conv, kernel = gabor, 16x16 kernel pad 8
    let k = gabor(shape, &g).unwrap();
    let conv = rfprobe::net::ConvParams {
        out_ch: 1, in_ch: 1, kh: 16, kw: 16, padding: 8,
        kernel: k.values().to_vec(), bias: vec![0.0],
    };
    let model = Arc::new(rfprobe::net::ModelSpec::new(shape, vec![rfprobe::net::Layer { name: "lin".into(), spec: rfprobe::net::LayerSpec::Conv(conv) }]).unwrap());
    let probe = NetworkProbe::new(model, "lin", 0).unwrap();
    // sanity: probe == k·s
    let s0 = NoiseSpec { seed: 5, count: 1, shape, mean: 0.0, std: 1.0 }.sample(0);
    println!("probe sanity: {:.6} vs {:.6}", probe.respond(&s0).unwrap(), k.dot(&s0).unwrap());

    let units: Vec<(&str, Box<dyn Responder>, usize)> = vec![
        ("linear(probe)", Box::new(probe), 50_000),
        ("halfrect", Box::new(make_synthetic_unit(&SyntheticUnitParams::LinearHalfRect { gabor: g }, shape).unwrap()), 200_000),
        ("energy", Box::new(make_synthetic_unit(&SyntheticUnitParams::Energy { gabor: g }, shape).unwrap()), 200_000),
        ("suppressed", Box::new(make_synthetic_unit(&SyntheticUnitParams::SuppressedEnergy { gabor: g, suppressor: GaborSpec::centered(16, 16, 90.0), gain: 1.0 }, shape).unwrap()), 200_000),
    ];

    for (name, unit, n) in &units {
        let bank = pipeline(unit.as_ref(), shape, *n, 42);
        // fit set: 13334 stimuli → n_train 10000
        let fit_spec = NoiseSpec { seed: 43, count: 13_334, shape, mean: 0.0, std: 1.0 };
        let stimuli: Vec<ImageTensor> = gen_white_noise(&fit_spec).unwrap().collect();
        let responses: Vec<f64> = stimuli.iter().map(|s| unit.respond(s).unwrap()).collect();
        let awc = split_fit(&bank_filters(&bank), &stimuli, &responses, Rectifier::Abs).unwrap();
        let awa = split_fit(&awa_only_filters(&bank), &stimuli, &responses, Rectifier::Abs).unwrap();
        let (_, chance) = chance_level_fit(&stimuli, &responses, shape, 19, 777, Rectifier::Abs).unwrap();
        println!("{name}: r_awc = {:.4}, r_awa = {:.4}, chance = {:.4}, n_train = {}", awc.r_test, awa.r_test, chance, awc.n_train);
    }
    println!("total {:?}", t0.elapsed());
}
